#include "gctl/expr.hpp"

#include "gctl/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <utility>

namespace gctl {

namespace {

struct FuncInfo {
  std::string_view name;
  Func func;
  int min_args;
  int max_args;  // -1: unbounded
};

constexpr std::array<FuncInfo, 12> kFunctions{{
    {"min", Func::Min, 2, -1},
    {"max", Func::Max, 2, -1},
    {"abs", Func::Abs, 1, 1},
    {"exp", Func::Exp, 1, 1},
    {"log", Func::Log, 1, 1},
    {"sqrt", Func::Sqrt, 1, 1},
    {"sin", Func::Sin, 1, 1},
    {"cos", Func::Cos, 1, 1},
    {"tanh", Func::Tanh, 1, 1},
    {"pos", Func::Pos, 1, 1},
    {"neg", Func::Neg, 1, 1},
    {"erf", Func::Erf, 1, 1},
}};

constexpr int kMaxDepth = 200;

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind = Tok::End;
  std::size_t offset = 0;
  std::string_view text;
  double number = 0.0;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r')) {
      ++pos_;
    }
    Token tok;
    tok.offset = pos_;
    if (pos_ >= src_.size()) return tok;
    const char c = src_[pos_];
    auto single = [&](Tok k) {
      tok.kind = k;
      tok.text = src_.substr(pos_, 1);
      ++pos_;
      return tok;
    };
    switch (c) {
      case '+': return single(Tok::Plus);
      case '-': return single(Tok::Minus);
      case '*': return single(Tok::Star);
      case '/': return single(Tok::Slash);
      case '^': return single(Tok::Caret);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case ',': return single(Tok::Comma);
      default: break;
    }
    // U+2212 MINUS SIGN
    if (src_.substr(pos_, 3) == "\xE2\x88\x92") {
      tok.kind = Tok::Minus;
      tok.text = src_.substr(pos_, 3);
      pos_ += 3;
      return tok;
    }
    if (is_digit(c) || (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
      return number(tok);
    }
    if (is_alpha(c)) {
      std::size_t end = pos_;
      while (end < src_.size() && (is_alpha(src_[end]) || is_digit(src_[end]))) ++end;
      tok.kind = Tok::Ident;
      tok.text = src_.substr(pos_, end - pos_);
      pos_ = end;
      return tok;
    }
    throw SyntaxError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

 private:
  Token number(Token tok) {
    std::size_t end = pos_;
    while (end < src_.size() && is_digit(src_[end])) ++end;
    if (end < src_.size() && src_[end] == '.') {
      ++end;
      while (end < src_.size() && is_digit(src_[end])) ++end;
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
      if (e < src_.size() && is_digit(src_[e])) {
        while (e < src_.size() && is_digit(src_[e])) ++e;
        end = e;
      } else {
        throw SyntaxError("malformed exponent in number", end);
      }
    }
    tok.kind = Tok::Number;
    tok.text = src_.substr(pos_, end - pos_);
    const auto res = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), tok.number);
    if (res.ec != std::errc() || res.ptr != tok.text.data() + tok.text.size() ||
        !std::isfinite(tok.number)) {
      throw SyntaxError("number out of range", pos_);
    }
    pos_ = end;
    return tok;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Node construction helpers

NodePtr make_constant(double c, std::size_t off = 0) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Constant;
  n->value = c;
  n->offset = off;
  return n;
}

NodePtr make_variable(VarKind k, int index, std::size_t off) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Variable;
  n->var = k;
  n->index = index;
  n->offset = off;
  return n;
}

NodePtr make_negate(NodePtr a, std::size_t off) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Negate;
  n->args = {std::move(a)};
  n->offset = off;
  return n;
}

NodePtr make_binary(BinOp op, NodePtr a, NodePtr b, std::size_t off) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Binary;
  n->op = op;
  n->args = {std::move(a), std::move(b)};
  n->offset = off;
  return n;
}

NodePtr make_call(Func f, std::vector<NodePtr> args, std::size_t off) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Call;
  n->func = f;
  n->args = std::move(args);
  n->offset = off;
  return n;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(std::string_view src, const Symbols& sym) : lex_(src), sym_(sym) { advance(); }

  NodePtr parse() {
    NodePtr e = expr();
    if (cur_.kind != Tok::End) {
      throw SyntaxError("unexpected token '" + std::string(cur_.text) + "'", cur_.offset);
    }
    return e;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p(p) {
      if (++p.depth_ > kMaxDepth) throw SyntaxError("expression nested too deeply", p.cur_.offset);
    }
    ~DepthGuard() { --p.depth_; }
    Parser& p;
  };

  NodePtr expr() {
    DepthGuard g(*this);
    NodePtr lhs = term();
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      const BinOp op = cur_.kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
      const std::size_t off = cur_.offset;
      advance();
      lhs = make_binary(op, lhs, term(), off);
    }
    return lhs;
  }

  NodePtr term() {
    NodePtr lhs = factor();
    while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
      const BinOp op = cur_.kind == Tok::Star ? BinOp::Mul : BinOp::Div;
      const std::size_t off = cur_.offset;
      advance();
      lhs = make_binary(op, lhs, factor(), off);
    }
    return lhs;
  }

  NodePtr factor() {
    DepthGuard g(*this);
    if (cur_.kind == Tok::Minus) {
      const std::size_t off = cur_.offset;
      advance();
      return make_negate(power(), off);
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (cur_.kind == Tok::Caret) {
      const std::size_t off = cur_.offset;
      advance();
      return make_binary(BinOp::Pow, base, factor(), off);
    }
    return base;
  }

  NodePtr atom() {
    DepthGuard g(*this);
    const Token tok = cur_;
    switch (tok.kind) {
      case Tok::Number:
        advance();
        return make_constant(tok.number, tok.offset);
      case Tok::LParen: {
        advance();
        NodePtr e = expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident:
        advance();
        if (cur_.kind == Tok::LParen) return call(tok);
        return variable(tok);
      case Tok::End:
        throw SyntaxError("unexpected end of expression", tok.offset);
      default:
        throw SyntaxError("unexpected token '" + std::string(tok.text) + "'", tok.offset);
    }
  }

  NodePtr call(const Token& name) {
    const FuncInfo* info = nullptr;
    for (const FuncInfo& f : kFunctions) {
      if (f.name == name.text) info = &f;
    }
    if (info == nullptr) {
      throw UnknownIdentifier("unknown function '" + std::string(name.text) + "'", name.offset);
    }
    advance();  // '('
    std::vector<NodePtr> args;
    args.push_back(expr());
    while (cur_.kind == Tok::Comma) {
      advance();
      args.push_back(expr());
    }
    expect(Tok::RParen, "')'");
    const int count = static_cast<int>(args.size());
    if (count < info->min_args || (info->max_args >= 0 && count > info->max_args)) {
      throw ArityError("function '" + std::string(info->name) + "' called with " +
                           std::to_string(count) + " argument(s)",
                       name.offset);
    }
    return make_call(info->func, std::move(args), name.offset);
  }

  NodePtr variable(const Token& tok) {
    const std::string_view s = tok.text;
    if (s == "t" && sym_.time) return make_variable(VarKind::Time, 0, tok.offset);
    for (const FuncInfo& f : kFunctions) {
      if (f.name == s) {
        throw SyntaxError("function '" + std::string(s) + "' requires an argument list",
                          tok.offset);
      }
    }
    if (s.size() >= 2 && s[1] != '0') {
      VarKind kind;
      int limit;
      switch (s[0]) {
        case 'x': kind = VarKind::State; limit = sym_.x; break;
        case 'v': kind = VarKind::Control; limit = sym_.v; break;
        case 'y': kind = VarKind::Increment; limit = sym_.y; break;
        default: kind = VarKind::Time; limit = 0; break;
      }
      int idx = 0;
      const auto res = std::from_chars(s.data() + 1, s.data() + s.size(), idx);
      if (limit > 0 && res.ec == std::errc() && res.ptr == s.data() + s.size() && idx >= 1 &&
          idx <= limit) {
        return make_variable(kind, idx - 1, tok.offset);
      }
    }
    throw UnknownIdentifier("unknown identifier '" + std::string(s) + "'", tok.offset);
  }

  void expect(Tok k, const char* what) {
    if (cur_.kind != k) {
      throw SyntaxError(std::string("expected ") + what, cur_.offset);
    }
    advance();
  }

  Lexer lex_;
  Symbols sym_;
  Token cur_;
  int depth_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation

double checked(double r, const Node& n, const char* what) {
  if (!std::isfinite(r)) throw DomainError(what, n.offset);
  return r;
}

double eval_node(const Node& n, const EvalPoint& p) {
  switch (n.kind) {
    case Node::Kind::Constant:
      return n.value;
    case Node::Kind::Variable: {
      std::span<const double> src;
      switch (n.var) {
        case VarKind::Time: return p.t;
        case VarKind::State: src = p.x; break;
        case VarKind::Control: src = p.v; break;
        case VarKind::Increment: src = p.y; break;
      }
      if (static_cast<std::size_t>(n.index) >= src.size()) {
        throw DimensionError("evaluation point is missing variable index " +
                             std::to_string(n.index + 1));
      }
      return src[static_cast<std::size_t>(n.index)];
    }
    case Node::Kind::Negate:
      return -eval_node(*n.args[0], p);
    case Node::Kind::Binary: {
      const double a = eval_node(*n.args[0], p);
      const double b = eval_node(*n.args[1], p);
      switch (n.op) {
        case BinOp::Add: return checked(a + b, n, "overflow in addition");
        case BinOp::Sub: return checked(a - b, n, "overflow in subtraction");
        case BinOp::Mul: return checked(a * b, n, "overflow in multiplication");
        case BinOp::Div:
          if (b == 0.0) throw DomainError("division by zero", n.offset);
          return checked(a / b, n, "overflow in division");
        case BinOp::Pow:
          return checked(std::pow(a, b), n, "power outside its domain");
      }
      break;
    }
    case Node::Kind::Call: {
      const double a = eval_node(*n.args[0], p);
      switch (n.func) {
        case Func::Min: {
          double r = a;
          for (std::size_t i = 1; i < n.args.size(); ++i) r = std::min(r, eval_node(*n.args[i], p));
          return r;
        }
        case Func::Max: {
          double r = a;
          for (std::size_t i = 1; i < n.args.size(); ++i) r = std::max(r, eval_node(*n.args[i], p));
          return r;
        }
        case Func::Abs: return std::abs(a);
        case Func::Exp: return checked(std::exp(a), n, "overflow in exp");
        case Func::Log:
          if (!(a > 0.0)) throw DomainError("log of nonpositive value", n.offset);
          return std::log(a);
        case Func::Sqrt:
          if (a < 0.0) throw DomainError("sqrt of negative value", n.offset);
          return std::sqrt(a);
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Tanh: return std::tanh(a);
        case Func::Pos: return a > 0.0 ? a : 0.0;
        case Func::Neg: return a < 0.0 ? -a : 0.0;
        case Func::Erf: return std::erf(a);
        case Func::Step: return a > 0.0 ? 1.0 : 0.0;
      }
      break;
    }
  }
  throw DomainError("malformed expression node", n.offset);
}

// ---------------------------------------------------------------------------
// Printing

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::Constant:
      if (n.value < 0.0 || std::signbit(n.value)) {
        out += "(-";
        out += format_number(-n.value);
        out += ')';
      } else {
        out += format_number(n.value);
      }
      return;
    case Node::Kind::Variable:
      switch (n.var) {
        case VarKind::Time: out += 't'; return;
        case VarKind::State: out += 'x'; break;
        case VarKind::Control: out += 'v'; break;
        case VarKind::Increment: out += 'y'; break;
      }
      out += std::to_string(n.index + 1);
      return;
    case Node::Kind::Negate:
      out += "(-";
      print_node(*n.args[0], out);
      out += ')';
      return;
    case Node::Kind::Binary: {
      static constexpr std::array<char, 5> ops{'+', '-', '*', '/', '^'};
      out += '(';
      print_node(*n.args[0], out);
      out += ops[static_cast<std::size_t>(n.op)];
      print_node(*n.args[1], out);
      out += ')';
      return;
    }
    case Node::Kind::Call:
      out += function_name(n.func);
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i > 0) out += ',';
        print_node(*n.args[i], out);
      }
      out += ')';
      return;
  }
}

// ---------------------------------------------------------------------------
// Differentiation with light constant folding

bool is_const(const NodePtr& n, double c) {
  return n->kind == Node::Kind::Constant && n->value == c;
}

NodePtr fold_add(NodePtr a, NodePtr b, std::size_t off) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (a->kind == Node::Kind::Constant && b->kind == Node::Kind::Constant) {
    return make_constant(a->value + b->value, off);
  }
  return make_binary(BinOp::Add, std::move(a), std::move(b), off);
}

NodePtr fold_neg(NodePtr a, std::size_t off) {
  if (a->kind == Node::Kind::Constant) return make_constant(-a->value, off);
  return make_negate(std::move(a), off);
}

NodePtr fold_sub(NodePtr a, NodePtr b, std::size_t off) {
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return fold_neg(std::move(b), off);
  if (a->kind == Node::Kind::Constant && b->kind == Node::Kind::Constant) {
    return make_constant(a->value - b->value, off);
  }
  return make_binary(BinOp::Sub, std::move(a), std::move(b), off);
}

NodePtr fold_mul(NodePtr a, NodePtr b, std::size_t off) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_constant(0.0, off);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (a->kind == Node::Kind::Constant && b->kind == Node::Kind::Constant) {
    return make_constant(a->value * b->value, off);
  }
  return make_binary(BinOp::Mul, std::move(a), std::move(b), off);
}

NodePtr fold_div(NodePtr a, NodePtr b, std::size_t off) {
  if (is_const(a, 0.0)) return make_constant(0.0, off);
  if (is_const(b, 1.0)) return a;
  return make_binary(BinOp::Div, std::move(a), std::move(b), off);
}

NodePtr call1(Func f, NodePtr a, std::size_t off) { return make_call(f, {std::move(a)}, off); }

NodePtr diff(const NodePtr& n, VarKind kind, int index) {
  const std::size_t off = n->offset;
  switch (n->kind) {
    case Node::Kind::Constant:
      return make_constant(0.0, off);
    case Node::Kind::Variable:
      return make_constant(n->var == kind && (kind == VarKind::Time || n->index == index) ? 1.0 : 0.0,
                           off);
    case Node::Kind::Negate:
      return fold_neg(diff(n->args[0], kind, index), off);
    case Node::Kind::Binary: {
      const NodePtr& a = n->args[0];
      const NodePtr& b = n->args[1];
      NodePtr da = diff(a, kind, index);
      NodePtr db = diff(b, kind, index);
      switch (n->op) {
        case BinOp::Add: return fold_add(da, db, off);
        case BinOp::Sub: return fold_sub(da, db, off);
        case BinOp::Mul: return fold_add(fold_mul(da, b, off), fold_mul(a, db, off), off);
        case BinOp::Div:
          return fold_sub(fold_div(da, b, off),
                          fold_div(fold_mul(a, db, off), fold_mul(b, b, off), off), off);
        case BinOp::Pow:
          if (b->kind == Node::Kind::Constant) {
            NodePtr reduced = make_binary(BinOp::Pow, a, make_constant(b->value - 1.0, off), off);
            return fold_mul(fold_mul(make_constant(b->value, off), reduced, off), da, off);
          } else {
            NodePtr log_term = fold_mul(db, call1(Func::Log, a, off), off);
            NodePtr ratio = fold_div(fold_mul(b, da, off), a, off);
            return fold_mul(n, fold_add(log_term, ratio, off), off);
          }
      }
      break;
    }
    case Node::Kind::Call: {
      if (n->func == Func::Min || n->func == Func::Max) {
        // fold left: f(a1, a2, a3) = f(f(a1, a2), a3)
        NodePtr acc = n->args[0];
        NodePtr dacc = diff(acc, kind, index);
        for (std::size_t i = 1; i < n->args.size(); ++i) {
          const NodePtr& b = n->args[i];
          NodePtr db = diff(b, kind, index);
          // sel = 1 when acc is selected
          NodePtr sel = n->func == Func::Min ? call1(Func::Step, fold_sub(b, acc, off), off)
                                             : call1(Func::Step, fold_sub(acc, b, off), off);
          NodePtr one_minus = fold_sub(make_constant(1.0, off), sel, off);
          dacc = fold_add(fold_mul(sel, dacc, off), fold_mul(one_minus, db, off), off);
          acc = make_call(n->func, {acc, b}, off);
        }
        return dacc;
      }
      const NodePtr& a = n->args[0];
      NodePtr da = diff(a, kind, index);
      if (is_const(da, 0.0)) return da;
      NodePtr outer;
      switch (n->func) {
        case Func::Abs:
          outer = fold_sub(fold_mul(make_constant(2.0, off), call1(Func::Step, a, off), off),
                           make_constant(1.0, off), off);
          break;
        case Func::Exp: outer = n; break;
        case Func::Log: return fold_div(da, a, off);
        case Func::Sqrt:
          return fold_div(da, fold_mul(make_constant(2.0, off), n, off), off);
        case Func::Sin: outer = call1(Func::Cos, a, off); break;
        case Func::Cos: outer = fold_neg(call1(Func::Sin, a, off), off); break;
        case Func::Tanh:
          outer = fold_sub(make_constant(1.0, off), fold_mul(n, n, off), off);
          break;
        case Func::Pos: outer = call1(Func::Step, a, off); break;
        case Func::Neg:
          outer = fold_neg(call1(Func::Step, fold_neg(a, off), off), off);
          break;
        case Func::Erf:
          outer = fold_mul(make_constant(2.0 / std::sqrt(std::numbers::pi), off),
                           call1(Func::Exp, fold_neg(fold_mul(a, a, off), off), off), off);
          break;
        case Func::Step: return make_constant(0.0, off);
        case Func::Min:
        case Func::Max: break;
      }
      return fold_mul(outer, da, off);
    }
  }
  return make_constant(0.0, off);
}

bool uses_node(const Node& n, VarKind k) {
  if (n.kind == Node::Kind::Variable) return n.var == k;
  for (const NodePtr& a : n.args) {
    if (uses_node(*a, k)) return true;
  }
  return false;
}

std::size_t count_nodes(const Node& n) {
  std::size_t c = 1;
  for (const NodePtr& a : n.args) c += count_nodes(*a);
  return c;
}

}  // namespace

std::string_view function_name(Func f) {
  if (f == Func::Step) return "step";
  for (const FuncInfo& info : kFunctions) {
    if (info.func == f) return info.name;
  }
  return "?";
}

Expr::Expr() : root_(make_constant(0.0)) {}

Expr::Expr(NodePtr root, std::string source) : root_(std::move(root)), source_(std::move(source)) {}

Expr Expr::constant(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  return Expr(make_constant(c), buf);
}

double Expr::eval(const EvalPoint& p) const { return eval_node(*root_, p); }

std::string Expr::print() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

bool Expr::uses(VarKind kind) const { return uses_node(*root_, kind); }

bool Expr::is_constant() const {
  return !uses(VarKind::Time) && !uses(VarKind::State) && !uses(VarKind::Control) &&
         !uses(VarKind::Increment);
}

Expr Expr::derivative(VarKind kind, int index) const {
  return Expr(diff(root_, kind, index));
}

std::size_t Expr::node_count() const { return count_nodes(*root_); }

bool structurally_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case Node::Kind::Constant:
      if (a.value != b.value) return false;
      break;
    case Node::Kind::Variable:
      if (a.var != b.var || a.index != b.index) return false;
      break;
    case Node::Kind::Binary:
      if (a.op != b.op) return false;
      break;
    case Node::Kind::Call:
      if (a.func != b.func) return false;
      break;
    case Node::Kind::Negate:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

bool operator==(const Expr& a, const Expr& b) { return structurally_equal(*a.root_, *b.root_); }

Expr parse_expr(std::string_view source, const Symbols& symbols) {
  if (source.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw SyntaxError("empty expression", 0);
  }
  Parser p(source, symbols);
  return Expr(p.parse(), std::string(source));
}

Expr parse_expr(std::string_view source, int n, int m) {
  return parse_expr(source, Symbols{true, n, m, 0});
}

}  // namespace gctl
