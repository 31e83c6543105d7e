#include <cmath>

#include "stochsym/errors.hpp"
#include "stochsym/expr.hpp"

namespace stochsym {

namespace {

class Compiler {
public:
    Compiler(int d, const Binding& params, std::vector<Program::Instr>& code, int& next)
        : d_(d), params_(params), code_(code), next_(next)
    {
    }

    int reg(const Expr& e)
    {
        if (auto it = memo_.find(e); it != memo_.end())
            return it->second;
        const int r = build(e);
        memo_.emplace(e, r);
        return r;
    }

private:
    int d_;
    const Binding& params_;
    std::vector<Program::Instr>& code_;
    int& next_;
    std::map<Expr, int, ExprLess> memo_;
    std::map<double, int> constants_;

    int emit(Program::Op op, int a = 0, int b = 0, int n = 0, double c = 0.0)
    {
        code_.push_back({op, a, b, n, c, next_});
        return next_++;
    }

    int constant(double v)
    {
        if (auto it = constants_.find(v); it != constants_.end())
            return it->second;
        const int r = emit(Program::Op::Const, 0, 0, 0, v);
        constants_.emplace(v, r);
        return r;
    }

    int fold(Program::Op op, std::span<const Expr> args)
    {
        int acc = reg(args[0]);
        for (std::size_t i = 1; i < args.size(); ++i)
            acc = emit(op, acc, reg(args[i]));
        return acc;
    }

    int build(const Expr& e)
    {
        using Op = Program::Op;
        switch (e.kind()) {
        case NodeKind::Const:
            return constant(e.value());
        case NodeKind::Param: {
            auto it = params_.find(e.name());
            if (it == params_.end())
                throw NumericError("unbound parameter '" + e.name() + "'");
            return constant(it->second);
        }
        case NodeKind::Var: {
            const PhaseVar v = e.variable();
            if (v.index > d_)
                throw DomainError("variable " + phase_var_name(v) + " exceeds dimension " + std::to_string(d_));
            return (v.kind == PhaseVar::Kind::P ? 0 : d_) + v.index - 1;
        }
        case NodeKind::Abstract:
            throw NumericError("cannot compile abstract function '" + to_string(e) + "'");
        case NodeKind::Neg:
            return emit(Op::Neg, reg(e.args()[0]));
        case NodeKind::Add:
            return fold(Op::Add, e.args());
        case NodeKind::Sub:
            return emit(Op::Sub, reg(e.args()[0]), reg(e.args()[1]));
        case NodeKind::Mul:
            return fold(Op::Mul, e.args());
        case NodeKind::Div:
            return emit(Op::Div, reg(e.args()[0]), reg(e.args()[1]));
        case NodeKind::Pow:
            return emit(Op::PowInt, reg(e.args()[0]), 0, e.exponent());
        case NodeKind::Sin:
            return emit(Op::Sin, reg(e.args()[0]));
        case NodeKind::Cos:
            return emit(Op::Cos, reg(e.args()[0]));
        case NodeKind::Exp:
            return emit(Op::Exp, reg(e.args()[0]));
        }
        throw DomainError("unknown node kind");
    }
};

double int_pow(double x, int n)
{
    if (n < 0)
        return 1.0 / int_pow(x, -n);
    double result = 1.0;
    while (n) {
        if (n & 1)
            result *= x;
        x *= x;
        n >>= 1;
    }
    return result;
}

} // namespace

Program Program::compile(std::span<const Expr> outputs, int d, const Binding& parameters)
{
    if (d < 1)
        throw DomainError("program dimension must be >= 1");
    Program prog;
    prog.d_ = d;
    int next = 2 * d;
    Compiler compiler(d, parameters, prog.code_, next);
    for (const auto& e : outputs)
        prog.output_regs_.push_back(compiler.reg(e));
    prog.register_count_ = static_cast<std::size_t>(next);
    return prog;
}

void Program::run(std::span<const double> state, std::span<double> out, std::span<double> ws) const
{
    const std::size_t n_in = 2 * static_cast<std::size_t>(d_);
    for (std::size_t i = 0; i < n_in; ++i)
        ws[i] = state[i];
    double* r = ws.data();
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::Const:
            r[in.out] = in.c;
            break;
        case Op::Add:
            r[in.out] = r[in.a] + r[in.b];
            break;
        case Op::Sub:
            r[in.out] = r[in.a] - r[in.b];
            break;
        case Op::Mul:
            r[in.out] = r[in.a] * r[in.b];
            break;
        case Op::Div:
            r[in.out] = r[in.a] / r[in.b];
            break;
        case Op::Neg:
            r[in.out] = -r[in.a];
            break;
        case Op::PowInt:
            r[in.out] = int_pow(r[in.a], in.n);
            break;
        case Op::Sin:
            r[in.out] = std::sin(r[in.a]);
            break;
        case Op::Cos:
            r[in.out] = std::cos(r[in.a]);
            break;
        case Op::Exp:
            r[in.out] = std::exp(r[in.a]);
            break;
        }
    }
    for (std::size_t i = 0; i < output_regs_.size(); ++i)
        out[i] = r[output_regs_[i]];
}

void Program::run(std::span<const double> state, std::span<double> out) const
{
    std::vector<double> ws(register_count_);
    run(state, out, ws);
}

} // namespace stochsym
