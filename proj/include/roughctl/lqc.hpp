#pragma once

#include <cstddef>
#include <vector>

#include "roughctl/linalg.hpp"
#include "roughctl/rde.hpp"
#include "roughctl/rough_path.hpp"

namespace roughctl {

/// dX = (MX + N nu) dt + d eta, gain 1/2(<Qx,x> + <R nu,nu>) and 1/2<Gx,x>.
struct AdditiveLqcSpec {
    Mat M, N, Q, R, G;
    double T = 1.0;

    std::size_t state_dim() const { return static_cast<std::size_t>(M.rows()); }
    std::size_t control_dim() const { return static_cast<std::size_t>(N.cols()); }
    void validate() const;
};

/// dX = (MX + N nu) dt + C X d eta, scalar.
struct MultiplicativeLqcSpec {
    double M = 0.0, N = 0.0, C = 0.0, Q = 0.0, R = 1.0, G = 0.0;
    double T = 1.0;

    void validate() const;
};

struct RiccatiSolution {
    TimeGrid grid;
    std::vector<Mat> P;
    std::vector<double> trace_integral;  ///< int_{t_k}^T Tr P(s) ds (zero in the multiplicative case)

    /// Piecewise-linear interpolation; throws outside [t_0, T].
    Mat at(double t) const;
    double trace_integral_at(double t) const;
    double scalar_at(double t) const { return at(t)(0, 0); }
};

/// Classical RK4 backward from P(T) = G, symmetrized every step. Throws
/// FiniteEscape once the Frobenius norm exceeds `cap`.
RiccatiSolution riccati_solve_additive(const AdditiveLqcSpec& spec, std::size_t n_steps, double cap = 1e12);
RiccatiSolution riccati_solve_multiplicative(const MultiplicativeLqcSpec& spec, std::size_t n_steps, double cap = 1e12);

double lqc_additive_value(const RiccatiSolution& sol, double t, const Vec& x);
Vec lqc_additive_feedback(const AdditiveLqcSpec& spec, const RiccatiSolution& sol, double t, const Vec& x);
double lqc_multiplicative_value(const RiccatiSolution& sol, double t, double x);
double lqc_multiplicative_feedback(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, double t, double x);

/// P evaluated at the grid times of `grid`.
std::vector<Mat> riccati_on_grid(const RiccatiSolution& sol, const TimeGrid& grid);

/// lambda1(t_k) = -N^T sum_{j >= k} exp(M^T (t_j - t_k)) P(t_j) delta_j, k = 0..n-1.
std::vector<Vec> lambda1_additive(const AdditiveLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta);

/// int <P X^0, d eta> - 1/2 int Tr P over [t_start, T], X^0 solving dX = MX dt + d eta
/// from x. The stochastic integral carries its level-2 correction sum P_ij A^ji.
double gammaR_additive(const AdditiveLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                       std::size_t start, const Vec& x);

/// Gamma_{t_start, t_k} for k = start..n by the Davie step of the linear equation.
std::vector<double> gamma_propagator(const MultiplicativeLqcSpec& spec, const GridRoughPath& eta, std::size_t start);

/// Theta_k = sum_{j >= k} P_j Gamma_{k,j}^2 (delta_j + 2 C A_j - C dt_j), k = start..n.
std::vector<double> theta(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                          std::size_t start);

/// 2 C N sum_k X_k Theta_k mu_k dt_k along the state from (t_start, x).
double z1_multiplicative(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                         std::size_t start, double x, const ControlPath& mu);

/// C Theta x^2 + C N x sum Gbar Theta mu dt + C N^2 sum_{a,b} Gamma Theta mu mu dt dt, Gbar = 2 Gamma.
double z2_multiplicative(const MultiplicativeLqcSpec& spec, const RiccatiSolution& sol, const GridRoughPath& eta,
                         std::size_t start, double x, const ControlPath& mu);

}  // namespace roughctl
