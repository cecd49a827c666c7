#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gctl {

// Arithmetic expressions over (t, x1..xn, v1..vm) used to define the
// coefficients of a control problem from text. Grammar:
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-'? power
//   power  := atom ('^' factor)?
//   atom   := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: min, max (two or more arguments), abs, exp, log, sqrt, sin, cos,
// tanh, pos (a^+), neg (a^-), erf.

enum class VarKind : std::uint8_t { Time, State, Control, Increment };

enum class Func : std::uint8_t {
  Min, Max, Abs, Exp, Log, Sqrt, Sin, Cos, Tanh, Pos, Neg, Erf,
  Step,  // internal: Heaviside, produced only by differentiation
};

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Pow };

struct Node {
  enum class Kind : std::uint8_t { Constant, Variable, Negate, Binary, Call };

  Kind kind = Kind::Constant;
  double value = 0.0;
  VarKind var = VarKind::Time;
  int index = 0;  // zero-based variable index
  BinOp op = BinOp::Add;
  Func func = Func::Abs;
  std::vector<std::shared_ptr<const Node>> args;
  std::size_t offset = 0;  // byte offset of the token that produced the node
};

using NodePtr = std::shared_ptr<const Node>;

/// Which identifiers an expression may reference.
struct Symbols {
  bool time = true;
  int x = 0;  // x1..x{x}
  int v = 0;  // v1..v{v}
  int y = 0;  // y1..y{y}
};

struct EvalPoint {
  double t = 0.0;
  std::span<const double> x;
  std::span<const double> v;
  std::span<const double> y;
};

/// Immutable expression tree; copies share structure.
class Expr {
 public:
  Expr();  // the constant 0
  explicit Expr(NodePtr root, std::string source = {});

  static Expr constant(double c);

  /// Throws DomainError on log/sqrt/division outside the domain or on
  /// non-finite results.
  double eval(const EvalPoint& p) const;
  double operator()(double t, std::span<const double> x, std::span<const double> v = {}) const {
    return eval(EvalPoint{t, x, v, {}});
  }

  /// Fully parenthesised rendering; reparses to a structurally equal tree.
  std::string print() const;

  bool uses(VarKind kind) const;
  bool is_constant() const;
  /// Symbolic partial derivative with respect to one variable.
  Expr derivative(VarKind kind, int index = 0) const;

  const Node& root() const { return *root_; }
  const std::string& source() const { return source_; }
  std::size_t node_count() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  NodePtr root_;
  std::string source_;
};

bool structurally_equal(const Node& a, const Node& b);

/// Parses over t, x1..xn, v1..vm.
Expr parse_expr(std::string_view source, int n, int m);
Expr parse_expr(std::string_view source, const Symbols& symbols);

/// Name of a known function, e.g. "max".
std::string_view function_name(Func f);

}  // namespace gctl
