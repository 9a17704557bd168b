#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roughctl/linalg.hpp"
#include "roughctl/rde.hpp"
#include "roughctl/rough_path.hpp"

namespace roughctl {

/// Box U = [lower, upper] and its finite discretization U_h.
struct ControlSet {
    Vec lower;
    Vec upper;
    std::vector<Vec> points;

    std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
    bool contains(const Vec& u, double tol = 1e-12) const;

    /// Tensor grid with `per_dim` equispaced points per dimension (one point
    /// at the midpoint when per_dim == 1).
    static ControlSet box(const Vec& lower, const Vec& upper, std::size_t per_dim = 21);
    static ControlSet single(const Vec& u);
};

/// sigma = Id, b = b(s, u), f = f(s, u).
struct AdditiveForm {
    std::function<Vec(double s, const Vec& u)> drift;
    std::function<double(double s, const Vec& u)> running;  ///< empty means 0
};

struct ControlProblem {
    VectorFieldSet vf;
    std::function<double(double t, const Vec& x, const Vec& u)> f;  ///< running gain; empty means 0
    std::function<double(const Vec& x)> g;
    std::function<Vec(const Vec& x)> dg;                             ///< optional
    std::function<Vec(double t, const Vec& x, const Vec& u)> df;    ///< optional d_x f
    ControlSet controls;
    std::optional<AdditiveForm> additive;

    double running(double t, const Vec& x, const Vec& u) const { return f ? f(t, x, u) : 0.0; }
    Vec grad_g(const Vec& x) const;
    Vec grad_f(double t, const Vec& x, const Vec& u) const;

    void validate() const;
};

/// Sum_k f(t_k, X_k, mu_k) dt_k + g(X_T) along the Davie solution from (t_start, x0).
double payoff(const ControlProblem& problem, const ControlPath& mu, const GridRoughPath& eta, std::size_t start,
              const Vec& x0);

/// Same quadrature along a precomputed trajectory.
double payoff_along(const ControlProblem& problem, const ControlPath& mu, const RdeSolution& traj);

/// Tensor mesh with uniform axes, one or two state dimensions.
struct StateMesh {
    Vec lower;
    Vec upper;
    std::vector<std::size_t> counts;

    std::size_t dim() const { return counts.size(); }
    std::size_t size() const;
    double step(std::size_t axis) const;
    double coordinate(std::size_t axis, std::size_t i) const;
    Vec node(std::size_t flat) const;
    std::vector<double> axis(std::size_t a) const;

    static StateMesh uniform(double lower, double upper, std::size_t count);
    static StateMesh box(const Vec& lower, const Vec& upper, std::size_t count_per_dim);
};

/// Values v(t_k, x_j) for k = start..n; slices are flattened mesh arrays with
/// the first axis varying fastest.
struct ValueGrid {
    TimeGrid grid;
    std::size_t start = 0;
    StateMesh mesh;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<int>> argmax;  ///< optional, control index per node and interval

    const std::vector<double>& slice(std::size_t k) const { return values.at(k - start); }
};

/// Multilinear interpolation of a mesh array, clamped to the box. Sets *clamped
/// when the point lies outside.
double interpolate(const StateMesh& mesh, const std::vector<double>& slice, const Vec& x, bool* clamped = nullptr);

/// Extra path-dependent term ADDED inside the pathwise supremum:
///   sum_k [ running(k, X_k, u_k) + <linear(k, X_k), u_k> dt_k ] + constant.
struct PathPenalty {
    std::function<double(std::size_t k, const Vec& x, const Vec& u)> running;
    std::function<Vec(std::size_t k, const Vec& x)> linear;
    double constant = 0.0;

    bool empty() const { return !running && !linear && constant == 0.0; }
    double evaluate(const ControlPath& mu, const RdeSolution& traj) const;
};

struct PathwiseResult {
    double value = 0.0;
    ControlPath control;
    RdeSolution trajectory;
    std::size_t boundary_hits = 0;   ///< forward-pass steps that left the mesh
    std::size_t backward_clamps = 0; ///< clamped interpolations in the backward sweep
    bool out_of_domain = false;
};

struct DpOptions {
    std::size_t boundary_hit_threshold = 0;
    ValueGrid* values_out = nullptr;  ///< slices exclude the penalty constant
};

/// Driver-independent tables for repeated inner maximization on one grid.
class DpSolver {
public:
    DpSolver(ControlProblem problem, StateMesh mesh, TimeGrid grid);
    ~DpSolver();
    DpSolver(DpSolver&&) noexcept;

    PathwiseResult solve(const GridRoughPath& eta, std::size_t start, const Vec& x0,
                         const PathPenalty* penalty = nullptr, const DpOptions& options = {}) const;

    const ControlProblem& problem() const;
    const StateMesh& mesh() const;

private:
    struct Tables;
    std::unique_ptr<Tables> tables_;
};

/// sup over piecewise-constant U_h-valued controls by backward dynamic programming.
PathwiseResult inner_sup_dp(const ControlProblem& problem, const GridRoughPath& eta, const StateMesh& mesh,
                            std::size_t start, const Vec& x0, const PathPenalty* penalty = nullptr,
                            const DpOptions& options = {});

/// v^0(t, x + eta_T - eta_t) for problems with an AdditiveForm. v^0 is taken
/// over constant controls (U_h, refined by golden section for scalar U), which
/// is exact when b is affine and f concave in u.
double additive_closed_form_value(const ControlProblem& problem, const GridRoughPath& eta, std::size_t start,
                                  const Vec& x0);

struct HjbLevel {
    std::size_t steps = 0;        ///< intervals of the piecewise-linear approximation
    std::size_t substeps = 0;     ///< total explicit time steps used
    double sup_diff = 0.0;        ///< vs the previous level over interior nodes (0 for the first)
    double driver_distance = 0.0; ///< Hoelder distance to the previous approximation (0 for the first)
};

struct HjbReport {
    std::vector<HjbLevel> levels;
    double interior_lower = 0.0;
    double interior_upper = 0.0;
    bool decreasing = false;
};

struct HjbOptions {
    double cfl = 0.9;
    std::size_t max_substeps = 2000000;
    double interior_lower = -1e300;  ///< nodes in [interior_lower, interior_upper] enter the report
    double interior_upper = 1e300;
    double hoelder_alpha = 0.4;
};

/// Classical HJB along each piecewise-linear approximation by an explicit
/// monotone upwind scheme (scalar state). All value grids are returned on the
/// grid of the finest approximation, so the grids must be nested.
std::vector<ValueGrid> rough_hjb_solve(const ControlProblem& problem, const std::vector<GridRoughPath>& approximations,
                                       const StateMesh& mesh, HjbReport* report = nullptr,
                                       const HjbOptions& options = {});

/// r(t_k) = sup_{U_h and mu_k} [<b(X_k,u),p_k> + f] - [<b(X_k,mu_k),p_k> + f(mu_k)].
std::vector<double> pmp_hamiltonian_residual(const ControlProblem& problem, const PathwiseResult& candidate,
                                             const GridRoughPath& eta);

struct SpikeRow {
    double eps = 0.0;
    double state_diff = 0.0;     ///< sup |X^eps - X|
    double remainder = 0.0;      ///< sup |X^eps - X - Y^eps|
    double payoff_error = 0.0;   ///< |J(mu^eps) - J(mu) - first-order expansion|
};

/// Spike of `alt_u` on [t_spike, t_spike + eps), eps rounded to whole intervals.
std::vector<SpikeRow> spike_variation_check(const ControlProblem& problem, const PathwiseResult& candidate,
                                            const Vec& alt_u, double t_spike, const std::vector<double>& eps_list,
                                            const GridRoughPath& eta);

}  // namespace roughctl
