#pragma once

#include "fbsde/backward.hpp"
#include "fbsde/common.hpp"
#include "fbsde/comparison.hpp"
#include "fbsde/config.hpp"
#include "fbsde/diagnostics.hpp"
#include "fbsde/expr.hpp"
#include "fbsde/model.hpp"
#include "fbsde/picard.hpp"
#include "fbsde/regression.hpp"
#include "fbsde/registry.hpp"
#include "fbsde/reports.hpp"
#include "fbsde/rng.hpp"
#include "fbsde/simulation.hpp"
