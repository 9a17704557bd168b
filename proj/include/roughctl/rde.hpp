#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "roughctl/linalg.hpp"
#include "roughctl/rough_path.hpp"

namespace roughctl {

/// Controlled drift b(x, u), diffusion columns sigma_i(x) and their derivatives.
/// Optional derivatives fall back to central finite differences with step
/// eps^(1/3) * (|x| + 1).
struct VectorFieldSet {
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    std::size_t control_dim = 1;

    std::function<Vec(const Vec& x, const Vec& u)> drift;
    std::function<Mat(const Vec& x)> diffusion;  ///< state_dim x noise_dim

    std::function<std::vector<Mat>(const Vec& x)> diffusion_jacobian;          ///< D sigma_i, one per column
    std::function<std::vector<Mat>(const Vec& x, const Vec& v)> diffusion_curvature;  ///< D(D sigma_i)(x)[v]
    std::function<Mat(const Vec& x, const Vec& u)> drift_jacobian;           ///< d_x b
    std::function<Mat(const Vec& x, const Vec& u)> drift_control_jacobian;   ///< d_u b

    std::vector<Mat> dsigma(const Vec& x) const;
    std::vector<Mat> d2sigma(const Vec& x, const Vec& direction) const;
    Mat db_dx(const Vec& x, const Vec& u) const;
    Mat db_du(const Vec& x, const Vec& u) const;

    /// sum_{i,j} (D sigma_j sigma_i)(x) A^{ij}
    Vec second_order_noise(const Vec& x, const Mat& sigma, const Eigen::Ref<const RowMajorMat>& area) const;

    void validate() const;
};

double fd_step(double x);

/// Piecewise-constant control, one value per elementary interval of `grid`.
struct ControlPath {
    TimeGrid grid;
    std::vector<Vec> values;

    static ControlPath constant(const TimeGrid& grid, const Vec& u);
};

struct SchemeInfo {
    std::string step = "davie-2";
    std::size_t refinement = 1;
    std::string note = "drift-noise cross terms of order dt*delta omitted";
};

/// States on grid times t_start .. t_n.
struct RdeSolution {
    TimeGrid grid;
    std::size_t start = 0;
    std::vector<Vec> states;
    SchemeInfo scheme;

    const Vec& at(std::size_t k) const { return states.at(k - start); }
    const Vec& terminal() const { return states.back(); }
};

/// y + b(y,u) dt + sum_i sigma_i(y) delta^i + sum_{i,j} (D sigma_j sigma_i)(y) A^{ij}.
/// Throws NumericalOverflow carrying `step_index` on a non-finite result.
Vec davie_step(const Vec& y, const VectorFieldSet& vf, const Vec& u, const Eigen::Ref<const Vec>& delta,
               const Eigen::Ref<const RowMajorMat>& area, double dt, std::size_t step_index = 0);

/// Iterates davie_step from grid index `start` to the horizon.
RdeSolution solve_controlled_rde(const Vec& x0, std::size_t start, const VectorFieldSet& vf, const ControlPath& mu,
                                 const GridRoughPath& eta);

/// Closed-loop variant: u_k = policy(t_k, X_k), using only information up to t_k.
RdeSolution solve_closed_loop(const Vec& x0, std::size_t start, const VectorFieldSet& vf,
                              const std::function<Vec(double, const Vec&)>& policy, const GridRoughPath& eta,
                              ControlPath* realized = nullptr);

/// Backward adjoint of the linearization around `traj`:
///   -dp = Db^T p dt + D sigma^T p d eta + Df dt,  p(T) = pT,
/// stepped with coefficients frozen at the left endpoint of each interval. The
/// step is the exact transpose of the forward linearized step, so pairing with
/// `solve_linearized` is conserved up to the forcing terms.
/// `df(k, x, u)` returns d_x f at (t_k, x, u); pass {} for zero.
std::vector<Vec> solve_adjoint_backward(const Vec& pT, const RdeSolution& traj, const ControlPath& mu,
                                        const VectorFieldSet& vf,
                                        const std::function<Vec(std::size_t, const Vec&, const Vec&)>& df,
                                        const GridRoughPath& eta);

/// Forward linearized RDE around `traj`:
///   dY = Db Y dt + D sigma Y d eta + forcing(k) dt,  Y(t_start) = y0.
std::vector<Vec> solve_linearized(const Vec& y0, const RdeSolution& traj, const ControlPath& mu,
                                  const VectorFieldSet& vf, const std::function<Vec(std::size_t)>& forcing,
                                  const GridRoughPath& eta);

/// Linear map Y_k -> Y_{k+1} of the linearized step at interval k (without forcing).
Mat linearized_step_matrix(const Vec& x, const Vec& u, const VectorFieldSet& vf, const Eigen::Ref<const Vec>& delta,
                           const Eigen::Ref<const RowMajorMat>& area, double dt);

/// Solution of the driftless flow and its spatial derivative on a 1-d mesh.
struct FlowDecomposition {
    RdeSolution solution;
    std::vector<double> transformed;  ///< tilde Y_k
};

/// Y_t = phi(t, tilde Y_t) with phi the driftless flow from t_start and
/// d tilde Y = tilde b(t, tilde Y, mu) dt. Scalar state only; throws
/// OutOfDomain when tilde Y leaves `state_mesh`.
FlowDecomposition flow_decomposition_solve(const Vec& x0, std::size_t start, const VectorFieldSet& vf,
                                           const ControlPath& mu, const GridRoughPath& eta,
                                           const std::vector<double>& state_mesh);

}  // namespace roughctl
