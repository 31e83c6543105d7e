#include "stochsym/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "stochsym/errors.hpp"

namespace stochsym {

struct Expr::Node {
    NodeKind kind = NodeKind::Const;
    double value = 0.0;
    int exponent = 0;
    std::string name;
    PhaseVar var{};
    std::vector<std::pair<PhaseVar, int>> derivs;
    std::vector<Expr> args;
};

std::string phase_var_name(PhaseVar v, char momentum_symbol)
{
    std::string out(1, v.kind == PhaseVar::Kind::P ? momentum_symbol : 'q');
    if (v.index != 1)
        out += std::to_string(v.index);
    return out;
}

Expr::Expr() : Expr(0.0) {}

Expr::Expr(double value)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Const;
    n->value = value;
    node_ = std::move(n);
}

Expr Expr::constant(double value) { return Expr(value); }

Expr Expr::param(std::string name)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Param;
    n->name = std::move(name);
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::var(PhaseVar v)
{
    if (v.index < 1)
        throw DomainError("phase variable index must be >= 1");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Var;
    n->var = v;
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::abstract(std::string name, std::vector<std::pair<PhaseVar, int>> derivatives)
{
    std::map<PhaseVar, int> merged;
    for (const auto& [v, order] : derivatives) {
        if (order < 0)
            throw DomainError("negative derivative order");
        merged[v] += order;
    }
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Abstract;
    n->name = std::move(name);
    for (const auto& [v, order] : merged)
        if (order > 0)
            n->derivs.emplace_back(v, order);
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::unary(NodeKind kind, Expr arg)
{
    if (kind != NodeKind::Neg && kind != NodeKind::Sin && kind != NodeKind::Cos && kind != NodeKind::Exp)
        throw DomainError("not a unary node kind");
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->args.push_back(std::move(arg));
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::binary(NodeKind kind, Expr lhs, Expr rhs)
{
    if (kind != NodeKind::Add && kind != NodeKind::Sub && kind != NodeKind::Mul && kind != NodeKind::Div)
        throw DomainError("not a binary node kind");
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->args.push_back(std::move(lhs));
    n->args.push_back(std::move(rhs));
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::nary(NodeKind kind, std::vector<Expr> args)
{
    if (kind != NodeKind::Add && kind != NodeKind::Mul)
        throw DomainError("only Add and Mul are n-ary");
    if (args.empty())
        return Expr(kind == NodeKind::Add ? 0.0 : 1.0);
    if (args.size() == 1)
        return args.front();
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->args = std::move(args);
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::power(Expr base, int exponent)
{
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Pow;
    n->exponent = exponent;
    n->args.push_back(std::move(base));
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

NodeKind Expr::kind() const noexcept { return node_->kind; }

double Expr::value() const
{
    if (node_->kind != NodeKind::Const)
        throw DomainError("value() on a non-constant expression");
    return node_->value;
}

const std::string& Expr::name() const
{
    if (node_->kind != NodeKind::Param && node_->kind != NodeKind::Abstract)
        throw DomainError("name() on an expression without a name");
    return node_->name;
}

PhaseVar Expr::variable() const
{
    if (node_->kind != NodeKind::Var)
        throw DomainError("variable() on a non-variable expression");
    return node_->var;
}

int Expr::exponent() const
{
    if (node_->kind != NodeKind::Pow)
        throw DomainError("exponent() on a non-power expression");
    return node_->exponent;
}

std::span<const Expr> Expr::args() const { return node_->args; }

std::span<const std::pair<PhaseVar, int>> Expr::derivatives() const { return node_->derivs; }

bool Expr::is_constant(double v) const noexcept { return node_->kind == NodeKind::Const && node_->value == v; }

Expr operator-(Expr a) { return Expr::unary(NodeKind::Neg, std::move(a)); }
Expr operator+(Expr a, Expr b) { return Expr::binary(NodeKind::Add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return Expr::binary(NodeKind::Sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return Expr::binary(NodeKind::Mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return Expr::binary(NodeKind::Div, std::move(a), std::move(b)); }

Expr sin(Expr a) { return Expr::unary(NodeKind::Sin, std::move(a)); }
Expr cos(Expr a) { return Expr::unary(NodeKind::Cos, std::move(a)); }
Expr exp(Expr a) { return Expr::unary(NodeKind::Exp, std::move(a)); }
Expr pow(Expr base, int exponent) { return Expr::power(std::move(base), exponent); }

bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }

namespace {

template <class T>
int three_way(const T& a, const T& b)
{
    if (a < b)
        return -1;
    if (b < a)
        return 1;
    return 0;
}

} // namespace

int compare(const Expr& a, const Expr& b)
{
    const Expr::Node& x = *a.node_;
    const Expr::Node& y = *b.node_;
    if (&x == &y)
        return 0;
    if (x.kind != y.kind)
        return three_way(x.kind, y.kind);
    switch (x.kind) {
    case NodeKind::Const:
        return three_way(x.value, y.value);
    case NodeKind::Param:
        return x.name.compare(y.name) < 0 ? -1 : (x.name == y.name ? 0 : 1);
    case NodeKind::Var:
        return three_way(x.var, y.var);
    case NodeKind::Abstract:
        if (int c = x.name.compare(y.name); c != 0)
            return c < 0 ? -1 : 1;
        return three_way(x.derivs, y.derivs);
    case NodeKind::Pow:
        if (x.exponent != y.exponent)
            return three_way(x.exponent, y.exponent);
        break;
    default:
        break;
    }
    if (x.args.size() != y.args.size())
        return three_way(x.args.size(), y.args.size());
    for (std::size_t i = 0; i < x.args.size(); ++i)
        if (int c = compare(x.args[i], y.args[i]); c != 0)
            return c;
    return 0;
}

// ---------------------------------------------------------------------------
// Canonical polynomial form used by simplify.

namespace {

using Monomial = std::vector<std::pair<Expr, int>>; // sorted atoms, nonzero exponents

struct MonoLess {
    bool operator()(const Monomial& a, const Monomial& b) const
    {
        // Lower total degree first so constants lead and sums read naturally.
        int da = 0;
        int db = 0;
        for (const auto& [atom, e] : a)
            da += e;
        for (const auto& [atom, e] : b)
            db += e;
        if (da != db)
            return da < db;
        const std::size_t n = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (int c = compare(a[i].first, b[i].first); c != 0)
                return c < 0;
            if (a[i].second != b[i].second)
                return a[i].second > b[i].second;
        }
        return a.size() < b.size();
    }
};

using Poly = std::map<Monomial, double, MonoLess>;

constexpr double kCancelTolerance = 8 * std::numeric_limits<double>::epsilon();

void add_term(Poly& acc, const Monomial& m, double c)
{
    if (c == 0.0)
        return;
    auto [it, inserted] = acc.try_emplace(m, c);
    if (inserted)
        return;
    const double old = it->second;
    const double sum = old + c;
    if (sum == 0.0 || std::abs(sum) <= kCancelTolerance * std::max(std::abs(old), std::abs(c)))
        acc.erase(it);
    else
        it->second = sum;
}

Poly constant_poly(double c)
{
    Poly p;
    if (c != 0.0)
        p.emplace(Monomial{}, c);
    return p;
}

Poly atom_poly(const Expr& atom, int e = 1)
{
    Poly p;
    if (e == 0)
        p.emplace(Monomial{}, 1.0);
    else
        p.emplace(Monomial{{atom, e}}, 1.0);
    return p;
}

Monomial mul_mono(const Monomial& a, const Monomial& b)
{
    Monomial out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() || j < b.size()) {
        int c = 0;
        if (i == a.size())
            c = 1;
        else if (j == b.size())
            c = -1;
        else
            c = compare(a[i].first, b[j].first);
        if (c < 0) {
            out.push_back(a[i++]);
        } else if (c > 0) {
            out.push_back(b[j++]);
        } else {
            const int e = a[i].second + b[j].second;
            if (e != 0)
                out.emplace_back(a[i].first, e);
            ++i;
            ++j;
        }
    }
    return out;
}

Poly mul_poly(const Poly& a, const Poly& b)
{
    Poly out;
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b)
            add_term(out, mul_mono(ma, mb), ca * cb);
    return out;
}

void add_into(Poly& acc, const Poly& x, double scale)
{
    for (const auto& [m, c] : x)
        add_term(acc, m, c * scale);
}

Expr poly_to_expr(const Poly& p);

constexpr int kMaxExpandedPower = 8;

Poly pow_poly(const Poly& p, int n)
{
    if (n == 0)
        return constant_poly(1.0);
    if (p.empty()) {
        if (n < 0)
            throw DomainError("division by zero in expression");
        return {};
    }
    if (p.size() == 1) {
        const auto& [m, c] = *p.begin();
        Monomial out;
        for (const auto& [atom, e] : m)
            out.emplace_back(atom, e * n);
        Poly r;
        r.emplace(std::move(out), std::pow(c, n));
        return r;
    }
    if (n > 0 && n <= kMaxExpandedPower) {
        Poly acc = p;
        for (int i = 1; i < n; ++i)
            acc = mul_poly(acc, p);
        return acc;
    }
    return atom_poly(poly_to_expr(p), n);
}

Poly to_poly(const Expr& e);

Poly function_poly(NodeKind kind, const Expr& arg)
{
    Poly inner = to_poly(arg);
    const bool constant = inner.empty() || (inner.size() == 1 && inner.begin()->first.empty());
    if (constant) {
        const double v = inner.empty() ? 0.0 : inner.begin()->second;
        switch (kind) {
        case NodeKind::Sin:
            return constant_poly(std::sin(v));
        case NodeKind::Cos:
            return constant_poly(std::cos(v));
        default:
            return constant_poly(std::exp(v));
        }
    }
    // Odd/even symmetry keeps sin(-x) and -sin(x) identical.
    double sign = 1.0;
    if (kind != NodeKind::Exp && inner.begin()->second < 0) {
        Poly neg;
        add_into(neg, inner, -1.0);
        inner = std::move(neg);
        if (kind == NodeKind::Sin)
            sign = -1.0;
    }
    Poly out = atom_poly(Expr::unary(kind, poly_to_expr(inner)));
    if (sign < 0) {
        Poly neg;
        add_into(neg, out, -1.0);
        return neg;
    }
    return out;
}

Poly to_poly(const Expr& e)
{
    switch (e.kind()) {
    case NodeKind::Const:
        return constant_poly(e.value());
    case NodeKind::Param:
    case NodeKind::Var:
    case NodeKind::Abstract:
        return atom_poly(e);
    case NodeKind::Neg: {
        Poly out;
        add_into(out, to_poly(e.args()[0]), -1.0);
        return out;
    }
    case NodeKind::Add: {
        Poly out;
        for (const auto& a : e.args())
            add_into(out, to_poly(a), 1.0);
        return out;
    }
    case NodeKind::Sub: {
        Poly out = to_poly(e.args()[0]);
        add_into(out, to_poly(e.args()[1]), -1.0);
        return out;
    }
    case NodeKind::Mul: {
        Poly out = constant_poly(1.0);
        for (const auto& a : e.args()) {
            out = mul_poly(out, to_poly(a));
            if (out.empty())
                break;
        }
        return out;
    }
    case NodeKind::Div:
        return mul_poly(to_poly(e.args()[0]), pow_poly(to_poly(e.args()[1]), -1));
    case NodeKind::Pow:
        return pow_poly(to_poly(e.args()[0]), e.exponent());
    case NodeKind::Sin:
    case NodeKind::Cos:
    case NodeKind::Exp:
        return function_poly(e.kind(), e.args()[0]);
    }
    return {};
}

Expr monomial_to_expr(const Monomial& m, double c)
{
    std::vector<Expr> factors;
    if (c != 1.0 || m.empty())
        factors.emplace_back(c);
    for (const auto& [atom, e] : m)
        factors.push_back(e == 1 ? atom : Expr::power(atom, e));
    return Expr::nary(NodeKind::Mul, std::move(factors));
}

Expr poly_to_expr(const Poly& p)
{
    std::vector<Expr> terms;
    terms.reserve(p.size());
    for (const auto& [m, c] : p)
        terms.push_back(monomial_to_expr(m, c));
    return Expr::nary(NodeKind::Add, std::move(terms));
}

} // namespace

Expr simplify(const Expr& e) { return poly_to_expr(to_poly(e)); }

// ---------------------------------------------------------------------------

namespace {

Expr diff_raw(const Expr& e, PhaseVar v)
{
    switch (e.kind()) {
    case NodeKind::Const:
    case NodeKind::Param:
        return Expr(0.0);
    case NodeKind::Var:
        return Expr(e.variable() == v ? 1.0 : 0.0);
    case NodeKind::Abstract: {
        std::vector<std::pair<PhaseVar, int>> d(e.derivatives().begin(), e.derivatives().end());
        d.emplace_back(v, 1);
        return Expr::abstract(e.name(), std::move(d));
    }
    case NodeKind::Neg:
        return -diff_raw(e.args()[0], v);
    case NodeKind::Add: {
        std::vector<Expr> terms;
        for (const auto& a : e.args()) {
            Expr da = diff_raw(a, v);
            if (!da.is_constant(0.0))
                terms.push_back(std::move(da));
        }
        return Expr::nary(NodeKind::Add, std::move(terms));
    }
    case NodeKind::Sub:
        return diff_raw(e.args()[0], v) - diff_raw(e.args()[1], v);
    case NodeKind::Mul: {
        std::vector<Expr> terms;
        const auto args = e.args();
        for (std::size_t i = 0; i < args.size(); ++i) {
            Expr di = diff_raw(args[i], v);
            if (di.is_constant(0.0))
                continue;
            std::vector<Expr> factors(args.begin(), args.end());
            factors[i] = std::move(di);
            terms.push_back(Expr::nary(NodeKind::Mul, std::move(factors)));
        }
        return Expr::nary(NodeKind::Add, std::move(terms));
    }
    case NodeKind::Div: {
        const Expr& a = e.args()[0];
        const Expr& b = e.args()[1];
        return (diff_raw(a, v) * b - a * diff_raw(b, v)) / Expr::power(b, 2);
    }
    case NodeKind::Pow: {
        const Expr& b = e.args()[0];
        const int n = e.exponent();
        return Expr::nary(NodeKind::Mul, {Expr(static_cast<double>(n)), Expr::power(b, n - 1), diff_raw(b, v)});
    }
    case NodeKind::Sin:
        return cos(e.args()[0]) * diff_raw(e.args()[0], v);
    case NodeKind::Cos:
        return -(sin(e.args()[0]) * diff_raw(e.args()[0], v));
    case NodeKind::Exp:
        return e * diff_raw(e.args()[0], v);
    }
    return Expr(0.0);
}

std::optional<PhaseVar> parse_phase_name(std::string_view name)
{
    if (name.empty())
        return std::nullopt;
    PhaseVar v;
    if (name[0] == 'p' || name[0] == 'P')
        v.kind = PhaseVar::Kind::P;
    else if (name[0] == 'q')
        v.kind = PhaseVar::Kind::Q;
    else
        return std::nullopt;
    if (name.size() == 1)
        return v;
    int index = 0;
    auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
    if (ec != std::errc{} || ptr != name.data() + name.size() || index < 1 || name[1] == '0')
        return std::nullopt;
    v.index = index;
    return v;
}

} // namespace

Expr diff(const Expr& e, PhaseVar v) { return simplify(diff_raw(e, v)); }

Expr diff(const Expr& e, std::string_view variable)
{
    auto v = parse_phase_name(variable);
    if (!v)
        throw DomainError("cannot differentiate with respect to '" + std::string(variable) +
                          "': not a phase variable");
    return diff(e, *v);
}

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& replacements)
{
    switch (e.kind()) {
    case NodeKind::Const:
    case NodeKind::Var:
    case NodeKind::Abstract:
        return e;
    case NodeKind::Param: {
        auto it = replacements.find(e.name());
        return it == replacements.end() ? e : it->second;
    }
    case NodeKind::Pow:
        return Expr::power(substitute(e.args()[0], replacements), e.exponent());
    case NodeKind::Neg:
    case NodeKind::Sin:
    case NodeKind::Cos:
    case NodeKind::Exp:
        return Expr::unary(e.kind(), substitute(e.args()[0], replacements));
    case NodeKind::Sub:
    case NodeKind::Div:
        return Expr::binary(e.kind(), substitute(e.args()[0], replacements), substitute(e.args()[1], replacements));
    case NodeKind::Add:
    case NodeKind::Mul: {
        std::vector<Expr> args;
        for (const auto& a : e.args())
            args.push_back(substitute(a, replacements));
        return Expr::nary(e.kind(), std::move(args));
    }
    }
    return e;
}

// ---------------------------------------------------------------------------
// Rendering.

namespace {

std::string format_number(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

enum Prec { kSum = 1, kProduct = 2, kUnary = 3, kPower = 4, kAtom = 5 };

int precedence(const Expr& e)
{
    switch (e.kind()) {
    case NodeKind::Const:
        return e.value() < 0 ? kUnary : kAtom;
    case NodeKind::Add:
    case NodeKind::Sub:
        return kSum;
    case NodeKind::Mul:
    case NodeKind::Div:
        return kProduct;
    case NodeKind::Neg:
        return kUnary;
    case NodeKind::Pow:
        return kPower;
    default:
        return kAtom;
    }
}

bool negative_lead(const Expr& e)
{
    if (e.kind() == NodeKind::Neg)
        return true;
    if (e.kind() == NodeKind::Const)
        return e.value() < 0 || std::signbit(e.value());
    if (e.kind() == NodeKind::Mul)
        return e.args()[0].kind() == NodeKind::Const && e.args()[0].value() < 0;
    return false;
}

// The expression with its leading minus removed; only valid if negative_lead.
Expr strip_negative(const Expr& e)
{
    if (e.kind() == NodeKind::Neg)
        return e.args()[0];
    if (e.kind() == NodeKind::Const)
        return Expr(-e.value());
    std::vector<Expr> factors(e.args().begin(), e.args().end());
    const double c = -factors[0].value();
    if (c == 1.0)
        factors.erase(factors.begin());
    else
        factors[0] = Expr(c);
    return Expr::nary(NodeKind::Mul, std::move(factors));
}

void render(const Expr& e, const RenderOptions& o, std::string& out);

void render_wrapped(const Expr& e, const RenderOptions& o, std::string& out, bool wrap)
{
    if (wrap)
        out += '(';
    render(e, o, out);
    if (wrap)
        out += ')';
}

void render_abstract(const Expr& e, const RenderOptions& o, std::string& out)
{
    if (e.derivatives().empty()) {
        out += e.name();
        out += "()";
        return;
    }
    out += "D[";
    bool first = true;
    for (const auto& [v, order] : e.derivatives()) {
        for (int i = 0; i < order; ++i) {
            if (!first)
                out += ',';
            first = false;
            out += phase_var_name(v, o.momentum_symbol);
        }
    }
    out += "](";
    out += e.name();
    out += "())";
}

void render(const Expr& e, const RenderOptions& o, std::string& out)
{
    switch (e.kind()) {
    case NodeKind::Const:
        out += format_number(e.value());
        return;
    case NodeKind::Param:
        out += e.name();
        return;
    case NodeKind::Var:
        out += phase_var_name(e.variable(), o.momentum_symbol);
        return;
    case NodeKind::Abstract:
        render_abstract(e, o, out);
        return;
    case NodeKind::Neg: {
        out += '-';
        const Expr& a = e.args()[0];
        render_wrapped(a, o, out, precedence(a) < kPower || negative_lead(a));
        return;
    }
    case NodeKind::Add: {
        bool first = true;
        for (const auto& a : e.args()) {
            if (first) {
                render_wrapped(a, o, out, precedence(a) < kSum);
            } else if (negative_lead(a)) {
                out += " - ";
                Expr s = strip_negative(a);
                render_wrapped(s, o, out, precedence(s) <= kSum || negative_lead(s));
            } else {
                out += " + ";
                render_wrapped(a, o, out, precedence(a) < kSum);
            }
            first = false;
        }
        return;
    }
    case NodeKind::Sub: {
        render(e.args()[0], o, out);
        out += " - ";
        const Expr& b = e.args()[1];
        render_wrapped(b, o, out, precedence(b) <= kSum || negative_lead(b));
        return;
    }
    case NodeKind::Mul: {
        bool first = true;
        for (const auto& a : e.args()) {
            if (first) {
                if (a.is_constant(-1.0) && e.args().size() > 1) {
                    out += '-';
                    first = false;
                    continue;
                }
                render_wrapped(a, o, out, precedence(a) < kProduct);
            } else {
                if (out.empty() || out.back() != '-')
                    out += '*';
                render_wrapped(a, o, out, precedence(a) <= kProduct || negative_lead(a));
            }
            first = false;
        }
        return;
    }
    case NodeKind::Div: {
        const Expr& a = e.args()[0];
        const Expr& b = e.args()[1];
        render_wrapped(a, o, out, precedence(a) < kProduct);
        out += '/';
        render_wrapped(b, o, out, precedence(b) <= kProduct || negative_lead(b));
        return;
    }
    case NodeKind::Pow: {
        const Expr& b = e.args()[0];
        render_wrapped(b, o, out, precedence(b) < kAtom || negative_lead(b));
        if (e.exponent() < 0)
            out += "^(" + std::to_string(e.exponent()) + ")";
        else
            out += "^" + std::to_string(e.exponent());
        return;
    }
    case NodeKind::Sin:
    case NodeKind::Cos:
    case NodeKind::Exp:
        out += e.kind() == NodeKind::Sin ? "sin(" : e.kind() == NodeKind::Cos ? "cos(" : "exp(";
        render(e.args()[0], o, out);
        out += ')';
        return;
    }
}

} // namespace

std::string to_string(const Expr& e, const RenderOptions& options)
{
    std::string out;
    render(e, options, out);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double checked(double v, const char* what)
{
    if (!std::isfinite(v))
        throw NumericError(std::string("non-finite result in ") + what);
    return v;
}

double eval_rec(const Expr& e, const Binding& b)
{
    switch (e.kind()) {
    case NodeKind::Const:
        return e.value();
    case NodeKind::Param: {
        auto it = b.find(e.name());
        if (it == b.end())
            throw NumericError("unbound symbol '" + e.name() + "'");
        return it->second;
    }
    case NodeKind::Var: {
        const PhaseVar v = e.variable();
        const std::string key = phase_var_name(v);
        if (auto it = b.find(key); it != b.end())
            return it->second;
        if (v.index == 1) {
            if (auto it = b.find(std::string(1, key[0]) + "1"); it != b.end())
                return it->second;
        }
        if (v.kind == PhaseVar::Kind::P) {
            if (auto it = b.find(phase_var_name(v, 'P')); it != b.end())
                return it->second;
        }
        throw NumericError("unbound symbol '" + key + "'");
    }
    case NodeKind::Abstract: {
        const std::string key = to_string(e);
        auto it = b.find(key);
        if (it == b.end())
            throw NumericError("unbound abstract function '" + key + "'");
        return it->second;
    }
    case NodeKind::Neg:
        return -eval_rec(e.args()[0], b);
    case NodeKind::Add: {
        double s = 0.0;
        for (const auto& a : e.args())
            s += eval_rec(a, b);
        return checked(s, "sum");
    }
    case NodeKind::Sub:
        return checked(eval_rec(e.args()[0], b) - eval_rec(e.args()[1], b), "difference");
    case NodeKind::Mul: {
        double s = 1.0;
        for (const auto& a : e.args())
            s *= eval_rec(a, b);
        return checked(s, "product");
    }
    case NodeKind::Div: {
        const double den = eval_rec(e.args()[1], b);
        if (den == 0.0)
            throw NumericError("division by zero");
        return checked(eval_rec(e.args()[0], b) / den, "quotient");
    }
    case NodeKind::Pow: {
        const double base = eval_rec(e.args()[0], b);
        if (base == 0.0 && e.exponent() < 0)
            throw NumericError("division by zero in negative power");
        return checked(std::pow(base, e.exponent()), "power");
    }
    case NodeKind::Sin:
        return std::sin(eval_rec(e.args()[0], b));
    case NodeKind::Cos:
        return std::cos(eval_rec(e.args()[0], b));
    case NodeKind::Exp:
        return checked(std::exp(eval_rec(e.args()[0], b)), "exp");
    }
    return 0.0;
}

void collect(const Expr& e, FreeSymbols& out)
{
    switch (e.kind()) {
    case NodeKind::Const:
        return;
    case NodeKind::Param:
        out.parameters.insert(e.name());
        return;
    case NodeKind::Var:
        out.variables.insert(e.variable());
        return;
    case NodeKind::Abstract:
        out.abstracts.insert(to_string(e));
        return;
    default:
        for (const auto& a : e.args())
            collect(a, out);
    }
}

} // namespace

double eval(const Expr& e, const Binding& binding) { return eval_rec(e, binding); }

FreeSymbols free_symbols(const Expr& e)
{
    FreeSymbols out;
    collect(e, out);
    return out;
}

ZeroTest zero_test(const Expr& e)
{
    const Expr s = simplify(e);
    if (s.is_constant())
        return {s.value() == 0.0, ZeroMethod::Symbolic};
    const FreeSymbols fs = free_symbols(s);
    std::mt19937_64 rng(0x5eedf00dULL);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    int accepted = 0;
    for (int attempt = 0; attempt < 8 * kZeroTestSamples && accepted < kZeroTestSamples; ++attempt) {
        Binding b;
        for (const auto& name : fs.parameters)
            b[name] = uni(rng);
        for (const auto& v : fs.variables)
            b[phase_var_name(v)] = uni(rng);
        for (const auto& key : fs.abstracts)
            b[key] = uni(rng);
        double value = 0.0;
        try {
            value = eval(s, b);
        } catch (const NumericError&) {
            continue;
        }
        if (std::abs(value) >= kZeroTestThreshold)
            return {false, ZeroMethod::Probabilistic};
        ++accepted;
    }
    return {accepted > 0, ZeroMethod::Probabilistic};
}

bool is_zero(const Expr& e) { return zero_test(e).zero; }

namespace {

bool mentions(const Expr& e, const auto& pred)
{
    if (e.kind() == NodeKind::Var)
        return pred(e.variable());
    if (e.kind() == NodeKind::Abstract)
        return true; // abstract functions depend on every phase variable
    for (const auto& a : e.args())
        if (mentions(a, pred))
            return true;
    return false;
}

} // namespace

bool depends_on(const Expr& e, PhaseVar::Kind kind)
{
    return mentions(simplify(e), [kind](PhaseVar v) { return v.kind == kind; });
}

bool depends_on(const Expr& e, PhaseVar v)
{
    return mentions(simplify(e), [v](PhaseVar w) { return w == v; });
}

bool is_polynomial(const Expr& e)
{
    switch (e.kind()) {
    case NodeKind::Const:
    case NodeKind::Param:
    case NodeKind::Var:
        return true;
    case NodeKind::Neg:
    case NodeKind::Add:
    case NodeKind::Sub:
    case NodeKind::Mul:
        for (const auto& a : e.args())
            if (!is_polynomial(a))
                return false;
        return true;
    case NodeKind::Pow:
        return e.exponent() >= 0 && is_polynomial(e.args()[0]);
    default:
        return false;
    }
}

} // namespace stochsym
