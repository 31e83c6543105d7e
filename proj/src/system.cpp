#include "stochsym/system.hpp"

#include "stochsym/errors.hpp"

namespace stochsym {

void HamiltonianSystem::validate() const
{
    if (d < 1)
        throw DomainError("dimension d must be >= 1");
    if (m < 0)
        throw DomainError("noise count m must be >= 0");
    if (hamiltonians.size() != static_cast<std::size_t>(m) + 1)
        throw DomainError("expected " + std::to_string(m + 1) + " Hamiltonians H0..H" + std::to_string(m) + ", got " +
                          std::to_string(hamiltonians.size()));
    for (std::size_t j = 0; j < hamiltonians.size(); ++j) {
        const FreeSymbols fs = free_symbols(hamiltonians[j]);
        for (const auto& v : fs.variables)
            if (v.index > d)
                throw DomainError("H" + std::to_string(j) + " uses " + phase_var_name(v) + " but d = " +
                                  std::to_string(d));
        if (!fs.abstracts.empty())
            throw DomainError("H" + std::to_string(j) + " uses abstract function " + *fs.abstracts.begin());
        for (const auto& name : fs.parameters)
            if (!parameters.contains(name))
                throw NumericError("parameter '" + name + "' in H" + std::to_string(j) + " has no value");
    }
}

HamiltonianSystem make_system(std::string name, int d, std::vector<Expr> hamiltonians, Binding parameters)
{
    HamiltonianSystem sys;
    sys.name = std::move(name);
    sys.d = d;
    sys.m = static_cast<int>(hamiltonians.size()) - 1;
    for (auto& h : hamiltonians)
        h = simplify(h);
    sys.hamiltonians = std::move(hamiltonians);
    sys.parameters = std::move(parameters);
    sys.validate();
    return sys;
}

namespace examples {

HamiltonianSystem oscillator(double sigma)
{
    return make_system("oscillator", 1, {parse("(p^2+q^2)/2"), parse("-sigma*q")}, {{"sigma", sigma}});
}

HamiltonianSystem synchrotron(double omega, double sigma1, double sigma2)
{
    return make_system("synchrotron", 1,
                       {parse("-omega^2*cos(q) + p^2/2"), parse("sigma1*sin(q)"), parse("-sigma2*cos(q)")},
                       {{"omega", omega}, {"sigma1", sigma1}, {"sigma2", sigma2}});
}

HamiltonianSystem kubo(double sigma)
{
    return make_system("kubo", 1, {parse("(p^2+q^2)/2"), parse("sigma*(p^2+q^2)/2")}, {{"sigma", sigma}});
}

} // namespace examples

} // namespace stochsym
