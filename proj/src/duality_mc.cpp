#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "roughctl/columnar_io.hpp"
#include "roughctl/duality.hpp"
#include "roughctl/errors.hpp"

namespace roughctl {

GridRoughPath SamplerSettings::sample(std::size_t index) const {
    return sample_brownian_lift(derive_seed(master_seed, index), make_uniform_grid(horizon, steps), substeps, dim);
}

std::string DualityReport::csv_header() {
    return "fixture,n_paths,grid_n,mesh_size,lower_mean,lower_se,upper_mean,upper_se,gap,runtime_seconds,master_seed,oracle";
}

std::string DualityReport::csv_row() const {
    std::ostringstream out;
    out << fixture << ',' << n_paths << ',' << grid_steps << ',' << mesh_size << ',' << format_double(lower.stats.mean)
        << ',' << format_double(lower.stats.std_error) << ',' << format_double(upper.stats.mean) << ','
        << format_double(upper.stats.std_error) << ',' << format_double(gap) << ',' << format_double(runtime_seconds)
        << ',' << master_seed << ',' << (has_oracle ? format_double(oracle) : std::string());
    return out.str();
}

namespace {

BoundEstimate collect(std::vector<double>& values, std::vector<char>& failed, std::vector<char>& boundary,
                      double max_failure_fraction) {
    BoundEstimate est;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (failed[i]) {
            ++est.failures;
            continue;
        }
        if (boundary[i]) ++est.boundary_paths;
        est.values.push_back(values[i]);
    }
    const double frac = values.empty() ? 0.0 : static_cast<double>(est.failures) / static_cast<double>(values.size());
    if (frac > max_failure_fraction || est.values.empty()) {
        throw AbortedRun("path failure fraction " + format_double(frac) + " exceeds the threshold");
    }
    est.stats = sample_stats(est.values);
    return est;
}

bool is_numerical(const std::exception& e) {
    return dynamic_cast<const NumericalOverflow*>(&e) || dynamic_cast<const OutOfDomain*>(&e) ||
           dynamic_cast<const FiniteEscape*>(&e) || dynamic_cast<const ResolutionError*>(&e);
}

// lambda* tabulated on a coarse mesh per time index, interpolated linearly.
PathPenalty db_path_penalty(const ControlProblem& problem, const DavisBursteinPenalty& db, const GridRoughPath& eta,
                            const StateMesh& mesh) {
    require(db.lambda_nodes >= 2, "Davis-Burstein penalty needs at least two lambda nodes");
    StateMesh coarse{mesh.lower, mesh.upper, std::vector<std::size_t>(mesh.dim(), db.lambda_nodes)};
    const std::size_t n = eta.steps();
    const std::size_t m = problem.vf.control_dim;
    auto table = std::make_shared<std::vector<std::vector<std::vector<double>>>>(
        n, std::vector<std::vector<double>>(m, std::vector<double>(coarse.size())));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < coarse.size(); ++j) {
            const Vec lam = db_lambda_star(problem, db.feedback, eta, k, coarse.node(j), db.running_cost);
            for (std::size_t c = 0; c < m; ++c) (*table)[k][c][j] = lam(static_cast<Eigen::Index>(c));
        }
    }
    PathPenalty pen;
    // z = + int <lambda, mu> with lambda = -lambda*
    pen.linear = [table, coarse, m](std::size_t k, const Vec& x) {
        Vec out(static_cast<Eigen::Index>(m));
        for (std::size_t c = 0; c < m; ++c) out(static_cast<Eigen::Index>(c)) = -interpolate(coarse, (*table)[k][c], x);
        return out;
    };
    return pen;
}

}  // namespace

BoundEstimate mc_upper_bound(const ControlProblem& problem, const Penalty& penalty, const SamplerSettings& sampler,
                             std::size_t n_paths, const StateMesh& mesh, const Vec& x0, double max_failure_fraction) {
    require(n_paths >= 1, "at least one path is required");
    require(sampler.dim == problem.vf.noise_dim, "sampler dimension does not match the diffusion");
    const TimeGrid grid = make_uniform_grid(sampler.horizon, sampler.steps);

    ControlProblem inner = problem;
    if (const auto* rogers = std::get_if<RogersPenalty>(&penalty)) {
        inner = rogers_transform(*rogers, problem, grid.start(), x0, grid.horizon());
    }
    const DpSolver solver(inner, mesh, grid);

    std::vector<double> values(n_paths, 0.0);
    std::vector<char> failed(n_paths, 0), boundary(n_paths, 0);
    parallel_for(n_paths, sampler.workers, [&](std::size_t i) {
        try {
            const GridRoughPath eta = sampler.sample(i);
            PathPenalty extra;
            if (const auto* db = std::get_if<DavisBursteinPenalty>(&penalty)) {
                extra = db_path_penalty(problem, *db, eta, mesh);
            } else if (const auto* custom = std::get_if<CustomPenalty>(&penalty)) {
                require(static_cast<bool>(custom->build), "custom penalty needs a builder");
                extra = custom->build(eta, 0, x0);
            }
            const PathwiseResult res = solver.solve(eta, 0, x0, &extra);
            values[i] = res.value;
            boundary[i] = res.out_of_domain ? 1 : 0;
        } catch (const std::exception& e) {
            if (!is_numerical(e)) throw;
            failed[i] = 1;
        }
    });
    return collect(values, failed, boundary, max_failure_fraction);
}

BoundEstimate mc_lower_bound(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& policy,
                             const SamplerSettings& sampler, std::size_t n_paths, const Vec& x0,
                             double max_failure_fraction) {
    require(n_paths >= 1, "at least one path is required");
    require(static_cast<bool>(policy), "lower bound needs a policy");
    require(sampler.dim == problem.vf.noise_dim, "sampler dimension does not match the diffusion");
    std::vector<double> values(n_paths, 0.0);
    std::vector<char> failed(n_paths, 0), boundary(n_paths, 0);
    parallel_for(n_paths, sampler.workers, [&](std::size_t i) {
        try {
            const GridRoughPath eta = sampler.sample(i);
            ControlPath realized{eta.grid(), {}};
            const RdeSolution traj = solve_closed_loop(x0, 0, problem.vf, policy, eta, &realized);
            values[i] = payoff_along(problem, realized, traj);
        } catch (const std::exception& e) {
            if (!is_numerical(e)) throw;
            failed[i] = 1;
        }
    });
    return collect(values, failed, boundary, max_failure_fraction);
}

namespace {

ZeroMeanReport summarize(const std::vector<std::vector<double>>& columns) {
    ZeroMeanReport rep;
    for (const auto& col : columns) {
        const SampleStats s = sample_stats(col);
        rep.components.push_back(s);
        const double ratio = s.std_error > 0.0 ? std::abs(s.mean) / s.std_error : (s.mean == 0.0 ? 0.0 : INFINITY);
        rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
    return rep;
}

}  // namespace

ZeroMeanReport rogers_zero_mean_check(const RogersPenalty& h, const ControlProblem& problem,
                                      const std::function<Vec(double, const Vec&)>& policy,
                                      const SamplerSettings& sampler, std::size_t n_paths, const Vec& x0) {
    require(n_paths >= 2, "zero-mean check needs at least two paths");
    std::vector<double> values(n_paths);
    parallel_for(n_paths, sampler.workers, [&](std::size_t i) {
        const GridRoughPath eta = sampler.sample(i);
        ControlPath realized{eta.grid(), {}};
        const RdeSolution traj = solve_closed_loop(x0, 0, problem.vf, policy, eta, &realized);
        values[i] = rogers_penalty_value(h, traj, realized, eta, problem).increment;
    });
    return summarize({values});
}

ZeroMeanReport db_zero_mean_check(const ControlProblem& problem, const std::function<Vec(double, const Vec&)>& feedback,
                                  const SamplerSettings& sampler, std::size_t n_paths, const ProbePoint& probe,
                                  bool running_cost) {
    require(n_paths >= 2, "zero-mean check needs at least two paths");
    const std::size_t m = problem.vf.control_dim;
    std::vector<std::vector<double>> cols(m, std::vector<double>(n_paths));
    parallel_for(n_paths, sampler.workers, [&](std::size_t i) {
        const GridRoughPath eta = sampler.sample(i);
        const Vec lam = db_lambda_star(problem, feedback, eta, probe.k, probe.x, running_cost);
        for (std::size_t c = 0; c < m; ++c) cols[c][i] = lam(static_cast<Eigen::Index>(c));
    });
    return summarize(cols);
}

}  // namespace roughctl
