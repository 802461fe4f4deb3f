#pragma once

// Arithmetic expression language for coefficient functions declared in
// config files.  Grammar (standard precedence, ^ right-associative):
//
//   expr    := term  (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Identifiers: t, x1..xn, y1..yn, z1..zd (1-based), plus the built-in
// functions abs, exp, log, sqrt, sin, cos, tanh, min, max.
// ASTs are immutable after construction; evaluation is reentrant.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fbsde {

// Parse/validation failure; position is the 1-based character offset.
class ExprError : public std::runtime_error {
 public:
  ExprError(std::string message, std::size_t position)
      : std::runtime_error(message + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Evaluation point.  Spans refer to caller-owned storage; z is the single
// diagonal row z^i seen by generator components.
struct EvalEnv {
  double t = 0.0;
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> z;
};

namespace expr_detail {

enum class NodeKind : std::uint8_t { Literal, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class VarKind : std::uint8_t { T, X, Y, Z };
enum class Builtin : std::uint8_t { Abs, Exp, Log, Sqrt, Sin, Cos, Tanh, Min, Max };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind;
  double literal = 0.0;               // Literal
  VarKind var = VarKind::T;           // Var
  std::size_t index = 0;              // Var, 0-based
  Builtin fn = Builtin::Abs;          // Call
  std::vector<NodePtr> args;          // children
};

inline const char* builtin_name(Builtin f) {
  switch (f) {
    case Builtin::Abs: return "abs";
    case Builtin::Exp: return "exp";
    case Builtin::Log: return "log";
    case Builtin::Sqrt: return "sqrt";
    case Builtin::Sin: return "sin";
    case Builtin::Cos: return "cos";
    case Builtin::Tanh: return "tanh";
    case Builtin::Min: return "min";
    case Builtin::Max: return "max";
  }
  return "?";
}

inline std::size_t builtin_arity(Builtin f) {
  return (f == Builtin::Min || f == Builtin::Max) ? 2 : 1;
}

inline std::optional<Builtin> builtin_from_name(std::string_view s) {
  if (s == "abs") return Builtin::Abs;
  if (s == "exp") return Builtin::Exp;
  if (s == "log") return Builtin::Log;
  if (s == "sqrt") return Builtin::Sqrt;
  if (s == "sin") return Builtin::Sin;
  if (s == "cos") return Builtin::Cos;
  if (s == "tanh") return Builtin::Tanh;
  if (s == "min") return Builtin::Min;
  if (s == "max") return Builtin::Max;
  return std::nullopt;
}

inline double eval_node(const Node& n, const EvalEnv& env) {
  switch (n.kind) {
    case NodeKind::Literal:
      return n.literal;
    case NodeKind::Var:
      switch (n.var) {
        case VarKind::T: return env.t;
        case VarKind::X: return env.x[n.index];
        case VarKind::Y: return env.y[n.index];
        case VarKind::Z: return env.z[n.index];
      }
      return 0.0;
    case NodeKind::Neg:
      return -eval_node(*n.args[0], env);
    case NodeKind::Add:
      return eval_node(*n.args[0], env) + eval_node(*n.args[1], env);
    case NodeKind::Sub:
      return eval_node(*n.args[0], env) - eval_node(*n.args[1], env);
    case NodeKind::Mul:
      return eval_node(*n.args[0], env) * eval_node(*n.args[1], env);
    case NodeKind::Div:
      return eval_node(*n.args[0], env) / eval_node(*n.args[1], env);
    case NodeKind::Pow:
      return std::pow(eval_node(*n.args[0], env), eval_node(*n.args[1], env));
    case NodeKind::Call: {
      const double a = eval_node(*n.args[0], env);
      switch (n.fn) {
        case Builtin::Abs: return std::fabs(a);
        case Builtin::Exp: return std::exp(a);
        case Builtin::Log: return std::log(a);
        case Builtin::Sqrt: return std::sqrt(a);
        case Builtin::Sin: return std::sin(a);
        case Builtin::Cos: return std::cos(a);
        case Builtin::Tanh: return std::tanh(a);
        case Builtin::Min: {
          const double b = eval_node(*n.args[1], env);
          if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
          return a < b ? a : b;
        }
        case Builtin::Max: {
          const double b = eval_node(*n.args[1], env);
          if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
          return a > b ? a : b;
        }
      }
      return 0.0;
    }
  }
  return 0.0;
}

}  // namespace expr_detail

// Which inputs an expression (or coefficient) reads.
struct VarUsage {
  bool t = false, x = false, y = false, z = false;
};

class ExprAst {
 public:
  ExprAst() = default;

  // Parses `text` against dimensions (n, d).  Throws ExprError on lexical
  // errors, syntax errors, unknown identifiers, out-of-range indices and
  // arity mismatches.
  static ExprAst parse(std::string_view text, std::size_t n, std::size_t d);

  bool empty() const noexcept { return root_ == nullptr; }
  std::size_t dim_n() const noexcept { return n_; }
  std::size_t dim_d() const noexcept { return d_; }

  // Plain IEEE-754 evaluation; division by zero, log of non-positive
  // values etc. propagate as non-finite results flagged by the caller.
  double evaluate(const EvalEnv& env) const { return expr_detail::eval_node(*root_, env); }

  // Elementwise equal to evaluate() per env, bit-exact.
  std::vector<double> evaluate_batch(std::span<const EvalEnv> envs) const {
    std::vector<double> out(envs.size());
    for (std::size_t i = 0; i < envs.size(); ++i) out[i] = expr_detail::eval_node(*root_, envs[i]);
    return out;
  }

  // Locates the deepest subexpression that first produces a non-finite
  // value under env; empty when the whole expression is finite.
  std::string diagnose_nonfinite(const EvalEnv& env) const;

  // Collapses all-constant subtrees with finite results.  Never changes
  // the value of evaluate() on any env.
  ExprAst fold_constants() const;

  // Minimal-parentheses rendering; re-parsing yields a structurally
  // identical AST.
  std::string to_string() const;

  VarUsage uses() const;

  bool structurally_equal(const ExprAst& other) const;

 private:
  ExprAst(expr_detail::NodePtr root, std::size_t n, std::size_t d)
      : root_(std::move(root)), n_(n), d_(d) {}

  expr_detail::NodePtr root_;
  std::size_t n_ = 0, d_ = 0;
};

namespace expr_detail {

// ---- lexer ----------------------------------------------------------------

enum class TokKind : std::uint8_t { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  TokKind kind;
  double value = 0.0;     // Number
  std::string text;       // Ident
  std::size_t pos = 0;    // 1-based offset of first char
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      const std::size_t pos = i_ + 1;
      if (i_ >= src_.size()) {
        out.push_back({TokKind::End, 0.0, {}, pos});
        return out;
      }
      const char c = src_[i_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back(lex_number(pos));
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back(lex_ident(pos));
      } else {
        TokKind k;
        switch (c) {
          case '+': k = TokKind::Plus; break;
          case '-': k = TokKind::Minus; break;
          case '*': k = TokKind::Star; break;
          case '/': k = TokKind::Slash; break;
          case '^': k = TokKind::Caret; break;
          case '(': k = TokKind::LParen; break;
          case ')': k = TokKind::RParen; break;
          case ',': k = TokKind::Comma; break;
          default:
            throw ExprError(std::string("unexpected character '") + c + "'", pos);
        }
        ++i_;
        out.push_back({k, 0.0, {}, pos});
      }
    }
  }

 private:
  void skip_ws() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
  }

  Token lex_number(std::size_t pos) {
    const std::size_t start = i_;
    while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) ++i_;
    if (i_ < src_.size() && src_[i_] == '.') {
      ++i_;
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) ++i_;
    }
    if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
      std::size_t j = i_ + 1;
      if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
      if (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) {
        i_ = j;
        while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) ++i_;
      }
    }
    const std::string_view lit = src_.substr(start, i_ - start);
    double v = 0.0;
    const auto res = std::from_chars(lit.data(), lit.data() + lit.size(), v);
    if (res.ec != std::errc{} || res.ptr != lit.data() + lit.size())
      throw ExprError("malformed number literal", pos);
    return {TokKind::Number, v, {}, pos};
  }

  Token lex_ident(std::size_t pos) {
    const std::size_t start = i_;
    while (i_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_'))
      ++i_;
    return {TokKind::Ident, 0.0, std::string(src_.substr(start, i_ - start)), pos};
  }

  std::string_view src_;
  std::size_t i_ = 0;
};

// ---- parser ---------------------------------------------------------------

class Parser {
 public:
  Parser(std::vector<Token> toks, std::size_t n, std::size_t d)
      : toks_(std::move(toks)), n_(n), d_(d) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    if (cur().kind != TokKind::End)
      throw ExprError("unexpected trailing input", cur().pos);
    return e;
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  void advance() { ++i_; }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    while (cur().kind == TokKind::Plus || cur().kind == TokKind::Minus) {
      const NodeKind k = cur().kind == TokKind::Plus ? NodeKind::Add : NodeKind::Sub;
      advance();
      NodePtr rhs = parse_term();
      lhs = binary(k, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    while (cur().kind == TokKind::Star || cur().kind == TokKind::Slash) {
      const NodeKind k = cur().kind == TokKind::Star ? NodeKind::Mul : NodeKind::Div;
      advance();
      NodePtr rhs = parse_unary();
      lhs = binary(k, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  NodePtr parse_unary() {
    if (cur().kind == TokKind::Minus) {
      advance();
      NodePtr a = parse_unary();
      auto node = std::make_shared<Node>();
      node->kind = NodeKind::Neg;
      node->args.push_back(std::move(a));
      return node;
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (cur().kind == TokKind::Caret) {
      advance();
      NodePtr exp = parse_unary();  // right-associative; exponent may carry unary minus
      return binary(NodeKind::Pow, std::move(base), std::move(exp));
    }
    return base;
  }

  NodePtr parse_primary() {
    const Token& t = cur();
    switch (t.kind) {
      case TokKind::Number: {
        auto node = std::make_shared<Node>();
        node->kind = NodeKind::Literal;
        node->literal = t.value;
        advance();
        return node;
      }
      case TokKind::LParen: {
        advance();
        NodePtr e = parse_expr();
        if (cur().kind != TokKind::RParen)
          throw ExprError("expected ')'", cur().pos);
        advance();
        return e;
      }
      case TokKind::Ident:
        return parse_ident();
      default:
        throw ExprError("expected a value, variable or '('", t.pos);
    }
  }

  NodePtr parse_ident() {
    const Token tok = cur();
    advance();
    if (cur().kind == TokKind::LParen) {
      const auto fn = builtin_from_name(tok.text);
      if (!fn) throw ExprError("unknown function '" + tok.text + "'", tok.pos);
      advance();
      std::vector<NodePtr> args;
      if (cur().kind != TokKind::RParen) {
        args.push_back(parse_expr());
        while (cur().kind == TokKind::Comma) {
          advance();
          args.push_back(parse_expr());
        }
      }
      if (cur().kind != TokKind::RParen)
        throw ExprError("expected ')' after arguments", cur().pos);
      advance();
      if (args.size() != builtin_arity(*fn))
        throw ExprError("function '" + tok.text + "' expects " +
                            std::to_string(builtin_arity(*fn)) + " argument(s), got " +
                            std::to_string(args.size()),
                        tok.pos);
      auto node = std::make_shared<Node>();
      node->kind = NodeKind::Call;
      node->fn = *fn;
      node->args = std::move(args);
      return node;
    }
    return make_var(tok);
  }

  NodePtr make_var(const Token& tok) {
    const std::string& s = tok.text;
    auto node = std::make_shared<Node>();
    node->kind = NodeKind::Var;
    if (s == "t") {
      node->var = VarKind::T;
      return node;
    }
    if ((s[0] == 'x' || s[0] == 'y' || s[0] == 'z') && s.size() > 1) {
      bool all_digits = true;
      for (std::size_t i = 1; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) { all_digits = false; break; }
      if (all_digits) {
        std::size_t idx = 0;
        const auto res = std::from_chars(s.data() + 1, s.data() + s.size(), idx);
        if (res.ec != std::errc{})
          throw ExprError("malformed variable index in '" + s + "'", tok.pos);
        const std::size_t limit = (s[0] == 'z') ? d_ : n_;
        if (idx < 1 || idx > limit)
          throw ExprError("variable '" + s + "' index out of range (1.." +
                              std::to_string(limit) + ")",
                          tok.pos);
        node->var = s[0] == 'x' ? VarKind::X : (s[0] == 'y' ? VarKind::Y : VarKind::Z);
        node->index = idx - 1;
        return node;
      }
    }
    throw ExprError("unknown identifier '" + s + "'", tok.pos);
  }

  static NodePtr binary(NodeKind k, NodePtr l, NodePtr r) {
    auto node = std::make_shared<Node>();
    node->kind = k;
    node->args.push_back(std::move(l));
    node->args.push_back(std::move(r));
    return node;
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  std::size_t n_, d_;
};

// ---- printing -------------------------------------------------------------

// Precedence levels: Add/Sub 1, Mul/Div 2, Neg 3, Pow 4, atoms 5.
inline int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Neg: return 3;
    case NodeKind::Pow: return 4;
    default: return 5;
  }
}

inline void print_node(const Node& n, std::string& out);

inline void print_child(const Node& child, int min_prec, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print_node(child, out);
    out += ')';
  } else {
    print_node(child, out);
  }
}

inline void print_double(double v, std::string& out) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Literal:
      print_double(n.literal, out);
      return;
    case NodeKind::Var:
      switch (n.var) {
        case VarKind::T: out += 't'; return;
        case VarKind::X: out += 'x'; break;
        case VarKind::Y: out += 'y'; break;
        case VarKind::Z: out += 'z'; break;
      }
      out += std::to_string(n.index + 1);
      return;
    case NodeKind::Neg:
      out += '-';
      print_child(*n.args[0], 3, out);
      return;
    case NodeKind::Add:
    case NodeKind::Sub:
      print_child(*n.args[0], 1, out);
      out += n.kind == NodeKind::Add ? " + " : " - ";
      print_child(*n.args[1], 2, out);  // right operand of left-assoc chain
      return;
    case NodeKind::Mul:
    case NodeKind::Div:
      print_child(*n.args[0], 2, out);
      out += n.kind == NodeKind::Mul ? "*" : "/";
      print_child(*n.args[1], 3, out);
      return;
    case NodeKind::Pow:
      print_child(*n.args[0], 5, out);  // (a^b)^c keeps parens on the left
      out += '^';
      print_child(*n.args[1], 3, out);  // bare unary minus allowed as exponent
      return;
    case NodeKind::Call:
      out += builtin_name(n.fn);
      out += '(';
      print_node(*n.args[0], out);
      for (std::size_t i = 1; i < n.args.size(); ++i) {
        out += ", ";
        print_node(*n.args[i], out);
      }
      out += ')';
      return;
  }
}

// ---- folding --------------------------------------------------------------

// Constant = literal or negated literal (the canonical form of a negative
// constant, since the parser never produces negative Literal nodes).
inline bool is_constant(const Node& n, double& value) {
  if (n.kind == NodeKind::Literal) {
    value = n.literal;
    return true;
  }
  if (n.kind == NodeKind::Neg && n.args[0]->kind == NodeKind::Literal) {
    value = -n.args[0]->literal;
    return true;
  }
  return false;
}

inline NodePtr make_constant(double v) {
  auto lit = std::make_shared<Node>();
  lit->kind = NodeKind::Literal;
  if (std::signbit(v)) {
    lit->literal = -v;
    auto neg = std::make_shared<Node>();
    neg->kind = NodeKind::Neg;
    neg->args.push_back(std::move(lit));
    return neg;
  }
  lit->literal = v;
  return lit;
}

inline NodePtr fold_node(const NodePtr& n) {
  if (n->kind == NodeKind::Literal || n->kind == NodeKind::Var) return n;
  std::vector<NodePtr> folded;
  folded.reserve(n->args.size());
  bool changed = false;
  bool all_const = true;
  for (const auto& a : n->args) {
    NodePtr f = fold_node(a);
    changed = changed || f != a;
    double unused;
    all_const = all_const && is_constant(*f, unused);
    folded.push_back(std::move(f));
  }
  auto rebuilt = std::make_shared<Node>(*n);
  rebuilt->args = std::move(folded);
  if (all_const) {
    const double v = eval_node(*rebuilt, EvalEnv{});
    if (std::isfinite(v)) return make_constant(v);
  }
  return changed ? NodePtr(rebuilt) : n;
}

inline void collect_uses(const Node& n, VarUsage& u) {
  if (n.kind == NodeKind::Var) {
    switch (n.var) {
      case VarKind::T: u.t = true; break;
      case VarKind::X: u.x = true; break;
      case VarKind::Y: u.y = true; break;
      case VarKind::Z: u.z = true; break;
    }
  }
  for (const auto& a : n.args) collect_uses(*a, u);
}

inline bool nodes_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case NodeKind::Literal:
      // bit-level comparison; folding must preserve exact values
      if (!(a.literal == b.literal && std::signbit(a.literal) == std::signbit(b.literal)))
        return false;
      break;
    case NodeKind::Var:
      if (a.var != b.var || a.index != b.index) return false;
      break;
    case NodeKind::Call:
      if (a.fn != b.fn) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!nodes_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

inline const Node* find_nonfinite(const Node& n, const EvalEnv& env) {
  for (const auto& a : n.args) {
    if (const Node* hit = find_nonfinite(*a, env)) return hit;
  }
  return std::isfinite(eval_node(n, env)) ? nullptr : &n;
}

}  // namespace expr_detail

inline ExprAst ExprAst::parse(std::string_view text, std::size_t n, std::size_t d) {
  expr_detail::Lexer lex(text);
  expr_detail::Parser parser(lex.run(), n, d);
  return ExprAst(parser.run(), n, d);
}

inline std::string ExprAst::diagnose_nonfinite(const EvalEnv& env) const {
  const expr_detail::Node* hit = expr_detail::find_nonfinite(*root_, env);
  if (!hit) return {};
  std::string out;
  expr_detail::print_node(*hit, out);
  return out;
}

inline ExprAst ExprAst::fold_constants() const {
  return ExprAst(expr_detail::fold_node(root_), n_, d_);
}

inline std::string ExprAst::to_string() const {
  std::string out;
  expr_detail::print_node(*root_, out);
  return out;
}

inline VarUsage ExprAst::uses() const {
  VarUsage u;
  expr_detail::collect_uses(*root_, u);
  return u;
}

inline bool ExprAst::structurally_equal(const ExprAst& other) const {
  if (n_ != other.n_ || d_ != other.d_) return false;
  return expr_detail::nodes_equal(*root_, *other.root_);
}

}  // namespace fbsde
