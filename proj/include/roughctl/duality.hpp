#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "roughctl/control.hpp"
#include "roughctl/linalg.hpp"
#include "roughctl/parallel.hpp"
#include "roughctl/rde.hpp"
#include "roughctl/rough_path.hpp"

namespace roughctl {

/// Test function h(t, x) with optional derivatives (central differences otherwise).
struct RogersPenalty {
    std::function<double(double t, const Vec& x)> h;
    std::function<double(double t, const Vec& x)> h_t;
    std::function<Vec(double t, const Vec& x)> grad;
    std::function<Mat(double t, const Vec& x)> hess;

    double value(double t, const Vec& x) const { return h(t, x); }
    double time_derivative(double t, const Vec& x) const;
    Vec gradient(double t, const Vec& x) const;
    Mat hessian(double t, const Vec& x) const;
};

struct DavisBursteinPenalty {
    std::function<Vec(double t, const Vec& x)> feedback;  ///< u*(t, x), interior-valued
    bool running_cost = true;     ///< augment Z with the running gain
    std::size_t lambda_nodes = 17;  ///< state nodes per axis on which lambda* is tabulated per path
};

/// Path term z(eta, mu) built per driver; ADDED inside the supremum.
struct CustomPenalty {
    std::string name = "custom";
    std::function<PathPenalty(const GridRoughPath& eta, std::size_t start, const Vec& x0)> build;
};

struct ZeroPenalty {};

using Penalty = std::variant<ZeroPenalty, RogersPenalty, DavisBursteinPenalty, CustomPenalty>;

std::string describe(const Penalty& penalty);

/// f~ = f + (d_t + L^u) h, g~ = g - h(T, .) + h(t0, x0), with
/// L^u h = <b~, Dh> + 1/2 Tr[sigma sigma^T D^2 h] and b~ = b + 1/2 sum_i D sigma_i sigma_i.
ControlProblem rogers_transform(const RogersPenalty& h, const ControlProblem& problem, double t0, const Vec& x0,
                                double horizon);

struct RogersValue {
    double increment = 0.0;  ///< h(T, X_T) - h(t, x) - sum (d_s + L^mu) h dt
    double integral = 0.0;   ///< level-2 compensated rough-integral form
    double difference = 0.0;
};

RogersValue rogers_penalty_value(const RogersPenalty& h, const RdeSolution& traj, const ControlPath& mu,
                                 const GridRoughPath& eta, const ControlProblem& problem);

/// dZ = [b(Z, u*) - b_u(Z, u*) u*] dt + sigma(Z) d eta from (t_start, x). With
/// `running_cost` an extra last component accumulates (f - f_u u*) dt.
RdeSolution db_solve_Z(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& feedback,
                       const GridRoughPath& eta, std::size_t start, const Vec& x, bool running_cost = false);

enum class GradientMode { Variational, FiniteDifference };

/// DW(t, x; eta) for W = g(Z_T) (+ accumulated running component).
Vec db_value_gradient(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& feedback,
                      const GridRoughPath& eta, std::size_t start, const Vec& x, bool running_cost = false,
                      GradientMode mode = GradientMode::Variational);

/// lambda* = b_u(x, u*)^T DW (+ f_u(t, x, u*) with running cost).
Vec db_lambda_star(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& feedback,
                   const GridRoughPath& eta, std::size_t start, const Vec& x, bool running_cost = false,
                   GradientMode mode = GradientMode::Variational);

/// sum_k <lambda(k, X_k), mu_k> dt_k.
double db_penalty_value(const std::function<Vec(std::size_t k, const Vec& x)>& lambda, const RdeSolution& traj,
                        const ControlPath& mu);

struct ConcavityReport {
    std::size_t probes = 0;
    std::size_t affine = 0;       ///< second differences vanish
    std::size_t violations = 0;   ///< some midpoint inequality fails
    double violation_fraction = 0.0;
};

struct ProbePoint {
    std::size_t k = 0;
    Vec x;
};

/// Midpoint concavity of u -> <b(x, u), DW(t_k, x; eta)> on the sorted scalar U_h.
ConcavityReport concavity_check(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& feedback,
                                const std::vector<GridRoughPath>& drivers, const std::vector<ProbePoint>& probes,
                                bool running_cost = false);

struct SamplerSettings {
    std::uint64_t master_seed = 1;
    double horizon = 1.0;
    std::size_t steps = 256;
    std::size_t substeps = 1;
    std::size_t dim = 1;
    std::size_t workers = 1;

    GridRoughPath sample(std::size_t index) const;
};

struct BoundEstimate {
    SampleStats stats;
    std::size_t failures = 0;
    std::size_t boundary_paths = 0;  ///< paths whose argmax trajectory left the mesh
    std::vector<double> values;      ///< per-path values in index order (failures omitted)
};

struct DualityReport {
    std::string fixture;
    std::string penalty;
    BoundEstimate lower;
    BoundEstimate upper;
    double gap = 0.0;
    std::uint64_t master_seed = 0;
    std::size_t grid_steps = 0;
    std::size_t substeps = 0;
    std::size_t mesh_size = 0;
    std::size_t control_points = 0;
    std::size_t n_paths = 0;
    double oracle = 0.0;  ///< closed-form value when the fixture has one
    bool has_oracle = false;
    double runtime_seconds = 0.0;

    /// Columns: fixture, n_paths, grid_n, mesh_size, lower_mean, lower_se,
    /// upper_mean, upper_se, gap, runtime_seconds, master_seed, oracle.

    static std::string csv_header();
    std::string csv_row() const;
};

/// Raised when too many paths fail.
class AbortedRun : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

BoundEstimate mc_upper_bound(const ControlProblem& problem, const Penalty& penalty, const SamplerSettings& sampler,
                             std::size_t n_paths, const StateMesh& mesh, const Vec& x0,
                             double max_failure_fraction = 0.01);

BoundEstimate mc_lower_bound(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& policy,
                             const SamplerSettings& sampler, std::size_t n_paths, const Vec& x0,
                             double max_failure_fraction = 0.01);

struct ZeroMeanReport {
    std::vector<SampleStats> components;
    double max_ratio = 0.0;  ///< max |mean| / SE (0 when every SE and mean vanish)
};

/// Rogers penalty (increment form) along closed-loop trajectories of the adapted `policy`.
ZeroMeanReport rogers_zero_mean_check(const RogersPenalty& h, const ControlProblem& problem,
                                      const std::function<Vec(double, const Vec&)>& policy,
                                      const SamplerSettings& sampler, std::size_t n_paths, const Vec& x0);

/// Components of lambda*(t_k, x; B) over sampled drivers at a fixed probe.
ZeroMeanReport db_zero_mean_check(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& feedback,
                                  const SamplerSettings& sampler, std::size_t n_paths, const ProbePoint& probe,
                                  bool running_cost = false);

}  // namespace roughctl
