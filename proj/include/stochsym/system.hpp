#pragma once

#include <string>
#include <vector>

#include "stochsym/expr.hpp"

namespace stochsym {

/// dp = -dH_0/dq dt - sum_r dH_r/dq o dW_r,  dq = dH_0/dp dt + sum_r dH_r/dp o dW_r
/// (Stratonovich), with p, q in R^d and m Wiener processes.
struct HamiltonianSystem {
    std::string name;
    int d = 1;
    int m = 0;
    std::vector<Expr> hamiltonians; // H_0 ... H_m
    Binding parameters;             // numeric values for the named parameters

    const Expr& H(int j) const { return hamiltonians.at(static_cast<std::size_t>(j)); }

    /// Throws DomainError when the shape is inconsistent or an expression
    /// mentions a variable beyond dimension d or an abstract function, and
    /// NumericError when a parameter has no value.
    void validate() const;
};

HamiltonianSystem make_system(std::string name, int d, std::vector<Expr> hamiltonians, Binding parameters);

/// Bundled examples with symbolic parameters.
namespace examples {

/// H_0 = (p^2+q^2)/2, H_1 = -sigma*q.
HamiltonianSystem oscillator(double sigma);
/// H_0 = -omega^2 cos q + p^2/2, H_1 = sigma1 sin q, H_2 = -sigma2 cos q.
HamiltonianSystem synchrotron(double omega, double sigma1, double sigma2);
/// H_0 = (p^2+q^2)/2, H_1 = sigma (p^2+q^2)/2.
HamiltonianSystem kubo(double sigma);

} // namespace examples

} // namespace stochsym
