#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stochsym {

/// A phase-space coordinate p_k or q_k (k is 1-based). The generating-function
/// momentum P shares the p family: coefficients G(P,q) are stored in p.
struct PhaseVar {
    enum class Kind : std::uint8_t { P, Q };
    Kind kind = Kind::P;
    int index = 1;

    friend auto operator<=>(const PhaseVar&, const PhaseVar&) = default;
};

inline PhaseVar momentum(int k = 1) { return {PhaseVar::Kind::P, k}; }
inline PhaseVar position(int k = 1) { return {PhaseVar::Kind::Q, k}; }

/// "p", "q" for index 1, "p2", "q3", ... otherwise. `momentum_symbol` selects
/// the letter used for the momentum family ('p' or 'P').
std::string phase_var_name(PhaseVar v, char momentum_symbol = 'p');

enum class NodeKind : std::uint8_t {
    Const,
    Param,
    Var,
    Abstract, // unspecified smooth function of the phase variables
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Sin,
    Cos,
    Exp,
};

class Expr;

/// Values for parameters, phase variables (by phase_var_name) and abstract
/// function derivatives (by their rendered form).
using Binding = std::map<std::string, double, std::less<>>;

/// Immutable expression tree with shared structure.
class Expr {
public:
    struct Node;

    Expr();
    Expr(double value);

    static Expr constant(double value);
    static Expr param(std::string name);
    static Expr var(PhaseVar v);
    static Expr p(int k = 1) { return var(momentum(k)); }
    static Expr q(int k = 1) { return var(position(k)); }
    /// Abstract function `name` of all phase variables, optionally already
    /// differentiated (derivative orders per variable).
    static Expr abstract(std::string name, std::vector<std::pair<PhaseVar, int>> derivatives = {});

    static Expr unary(NodeKind kind, Expr arg);
    static Expr binary(NodeKind kind, Expr lhs, Expr rhs);
    /// n-ary Add or Mul.
    static Expr nary(NodeKind kind, std::vector<Expr> args);
    static Expr power(Expr base, int exponent);

    NodeKind kind() const noexcept;
    double value() const;                 // Const
    const std::string& name() const;      // Param, Abstract
    PhaseVar variable() const;            // Var
    int exponent() const;                 // Pow
    std::span<const Expr> args() const;   // operators and functions
    std::span<const std::pair<PhaseVar, int>> derivatives() const; // Abstract

    bool is_constant() const noexcept { return kind() == NodeKind::Const; }
    bool is_constant(double v) const noexcept;

    friend Expr operator-(Expr a);
    friend Expr operator+(Expr a, Expr b);
    friend Expr operator-(Expr a, Expr b);
    friend Expr operator*(Expr a, Expr b);
    friend Expr operator/(Expr a, Expr b);

    /// Structural equality (no simplification).
    friend bool operator==(const Expr& a, const Expr& b);
    friend int compare(const Expr& a, const Expr& b);

private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

Expr sin(Expr a);
Expr cos(Expr a);
Expr exp(Expr a);
Expr pow(Expr base, int exponent);

/// Total structural order; negative / zero / positive like strcmp.
int compare(const Expr& a, const Expr& b);

struct ExprLess {
    bool operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }
};

/// Parses the infix grammar documented in the README:
///   sums and differences, products and quotients, unary minus, integer
///   powers `x^3` / `x^(-1)`, calls sin/cos/exp, abstract functions `F()`,
///   and derivative operators `D[p,q](expr)`.
/// Identifiers p, q, P, pK, qK, PK name phase variables; anything else is a
/// parameter. Throws ParseError with the offending position.
Expr parse(std::string_view source);

/// Exact partial derivative, simplified.
Expr diff(const Expr& e, PhaseVar v);
/// Same, with the variable given by name ("p", "P", "q2", ...). Throws
/// DomainError for names that are not phase variables.
Expr diff(const Expr& e, std::string_view variable);

/// Canonical form: constants folded, sums and products flattened and fully
/// expanded, like terms and powers collected, operands sorted. Two
/// expressions that are equal as polynomials in their atoms (parameters,
/// variables, function calls, abstract functions) simplify to structurally
/// equal trees.
Expr simplify(const Expr& e);

/// Replaces parameters by expressions (typically constants).
Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements);

double eval(const Expr& e, const Binding& binding);

enum class ZeroMethod { Symbolic, Probabilistic };

struct ZeroTest {
    bool zero = false;
    ZeroMethod method = ZeroMethod::Symbolic;
    explicit operator bool() const noexcept { return zero; }
};

inline constexpr double kZeroTestThreshold = 1e-12;
inline constexpr int kZeroTestSamples = 32;

/// Zero if simplify gives the constant 0, or if |value| < 1e-12 at 32 random
/// bindings drawn from [-2,2] (fixed seed). The second route can report a
/// false zero for functions that vanish on all sampled points.
ZeroTest zero_test(const Expr& e);
bool is_zero(const Expr& e);

struct RenderOptions {
    char momentum_symbol = 'p';
};

std::string to_string(const Expr& e, const RenderOptions& options = {});

struct FreeSymbols {
    std::set<std::string> parameters;
    std::set<PhaseVar> variables;
    std::set<std::string> abstracts; // rendered keys, derivatives included
};

FreeSymbols free_symbols(const Expr& e);

/// True when the simplified expression mentions a variable of that family.
bool depends_on(const Expr& e, PhaseVar::Kind kind);
bool depends_on(const Expr& e, PhaseVar v);

/// Only constants, parameters, variables, +, -, *, nonnegative integer powers.
bool is_polynomial(const Expr& e);

/// Flat register program evaluating several expressions at once with shared
/// subexpressions. Inputs are the phase coordinates ordered p1..pd, q1..qd;
/// parameters are folded in at compile time.
class Program {
public:
    Program() = default;

    /// Throws NumericError for unbound parameters or abstract functions, and
    /// DomainError for variables with index > d.
    static Program compile(std::span<const Expr> outputs, int d, const Binding& parameters);

    std::size_t outputs() const noexcept { return output_regs_.size(); }
    int dimension() const noexcept { return d_; }
    std::size_t registers() const noexcept { return register_count_; }

    /// `workspace` must have at least registers() entries.
    void run(std::span<const double> state, std::span<double> out, std::span<double> workspace) const;
    void run(std::span<const double> state, std::span<double> out) const;

    enum class Op : std::uint8_t { Const, Add, Sub, Mul, Div, Neg, PowInt, Sin, Cos, Exp };
    struct Instr {
        Op op;
        int a = 0;
        int b = 0;
        int n = 0;
        double c = 0.0;
        int out = 0;
    };

private:
    int d_ = 0;
    std::size_t register_count_ = 0;
    std::vector<Instr> code_;
    std::vector<int> output_regs_;
};

} // namespace stochsym
