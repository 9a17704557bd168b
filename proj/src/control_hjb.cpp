#include <algorithm>
#include <cmath>
#include <limits>

#include "roughctl/control.hpp"
#include "roughctl/errors.hpp"

namespace roughctl {

namespace {

// Index of the coarse interval containing each fine interval; throws unless nested.
std::vector<std::size_t> nesting(const TimeGrid& coarse, const TimeGrid& fine) {
    require(std::abs(coarse.start() - fine.start()) <= 1e-12 * std::max(1.0, std::abs(fine.horizon())) &&
                std::abs(coarse.horizon() - fine.horizon()) <= 1e-12 * std::max(1.0, std::abs(fine.horizon())),
            "approximations must span the same interval");
    for (std::size_t c = 0; c <= coarse.steps(); ++c) fine.index_of(coarse[c]);
    std::vector<std::size_t> owner(fine.steps());
    std::size_t c = 0;
    for (std::size_t q = 0; q < fine.steps(); ++q) {
        const double mid = 0.5 * (fine[q] + fine[q + 1]);
        while (c + 1 < coarse.steps() && mid > coarse[c + 1]) ++c;
        owner[q] = c;
    }
    return owner;
}

}  // namespace

std::vector<ValueGrid> rough_hjb_solve(const ControlProblem& problem, const std::vector<GridRoughPath>& approximations,
                                       const StateMesh& mesh, HjbReport* report, const HjbOptions& options) {
    problem.validate();
    require(problem.vf.state_dim == 1 && mesh.dim() == 1, "rough HJB solver handles a scalar state");
    require(!approximations.empty(), "at least one driver approximation is required");
    require(options.cfl > 0.0 && options.cfl <= 1.0, "CFL number must lie in (0, 1]");

    std::size_t finest = 0;
    for (std::size_t i = 0; i < approximations.size(); ++i) {
        require(approximations[i].dim() == problem.vf.noise_dim, "driver dimension does not match the diffusion");
        if (approximations[i].steps() > approximations[finest].steps()) finest = i;
    }
    const TimeGrid fine = approximations[finest].grid();
    const std::size_t nf = fine.steps();
    const std::size_t N = mesh.size();
    const std::size_t L = problem.controls.points.size();
    const std::size_t d = problem.vf.noise_dim;
    const double h = mesh.step(0);
    const auto& U = problem.controls.points;

    std::vector<double> drift(N * L), sigma(N * d), run(N * L, 0.0), terminal(N);
    for (std::size_t j = 0; j < N; ++j) {
        const Vec x = mesh.node(j);
        for (std::size_t l = 0; l < L; ++l) drift[j * L + l] = problem.vf.drift(x, U[l])(0);
        const Mat s = problem.vf.diffusion(x);
        for (std::size_t i = 0; i < d; ++i) sigma[j * d + i] = s(0, static_cast<Eigen::Index>(i));
        terminal[j] = problem.g(x);
    }

    std::vector<ValueGrid> grids;
    grids.reserve(approximations.size());
    HjbReport rep;
    rep.interior_lower = options.interior_lower;
    rep.interior_upper = options.interior_upper;

    std::vector<double> v(N), next(N), adv(N * L);
    for (std::size_t level = 0; level < approximations.size(); ++level) {
        const GridRoughPath& approx = approximations[level];
        const std::vector<std::size_t> owner = nesting(approx.grid(), fine);
        ValueGrid vg{fine, 0, mesh, std::vector<std::vector<double>>(nf + 1), {}};
        vg.values[nf] = terminal;
        v = terminal;
        std::size_t total = 0;
        for (std::size_t q = nf; q-- > 0;) {
            const std::size_t c = owner[q];
            const Vec slope = approx.delta(c) / approx.grid().dt(c);
            double amax = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                double noise = 0.0;
                for (std::size_t i = 0; i < d; ++i) noise += sigma[j * d + i] * slope(static_cast<Eigen::Index>(i));
                for (std::size_t l = 0; l < L; ++l) {
                    adv[j * L + l] = drift[j * L + l] + noise;
                    amax = std::max(amax, std::abs(adv[j * L + l]));
                }
            }
            if (problem.f) {
                for (std::size_t j = 0; j < N; ++j) {
                    const Vec x = mesh.node(j);
                    for (std::size_t l = 0; l < L; ++l) run[j * L + l] = problem.f(fine[q], x, U[l]);
                }
            }
            const double dt = fine.dt(q);
            const double ratio = dt * amax / (options.cfl * h);
            if (!(ratio < static_cast<double>(options.max_substeps))) {
                throw ResolutionError("HJB time step needs more than the allowed sub-steps");
            }
            const auto sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio)));
            total += sub;
            if (total > options.max_substeps) throw ResolutionError("HJB sub-step budget exhausted");
            const double tau = dt / static_cast<double>(sub);
            for (std::size_t s = 0; s < sub; ++s) {
                for (std::size_t j = 0; j < N; ++j) {
                    const double dplus = j + 1 < N ? (v[j + 1] - v[j]) / h : (v[j] - v[j - 1]) / h;
                    const double dminus = j > 0 ? (v[j] - v[j - 1]) / h : dplus;
                    double best = -std::numeric_limits<double>::infinity();
                    for (std::size_t l = 0; l < L; ++l) {
                        const double a = adv[j * L + l];
                        const double ham = (a > 0.0 ? a * dplus : a * dminus) + run[j * L + l];
                        best = std::max(best, ham);
                    }
                    next[j] = v[j] + tau * best;
                }
                std::swap(v, next);
            }
            for (double x : v) {
                if (!std::isfinite(x)) throw NumericalOverflow("non-finite HJB value", q);
            }
            vg.values[q] = v;
        }

        HjbLevel info;
        info.steps = approx.steps();
        info.substeps = total;
        if (level > 0) {
            const ValueGrid& prev = grids.back();
            double diff = 0.0;
            for (std::size_t q = 0; q <= nf; ++q) {
                for (std::size_t j = 0; j < N; ++j) {
                    const double x = mesh.coordinate(0, j);
                    if (x < options.interior_lower || x > options.interior_upper) continue;
                    diff = std::max(diff, std::abs(vg.values[q][j] - prev.values[q][j]));
                }
            }
            info.sup_diff = diff;
            info.driver_distance = hoelder_distance(refine_piecewise_linear(approx, fine), refine_piecewise_linear(approximations[level - 1], fine),
                                                    options.hoelder_alpha)
                                       .distance;
        }
        rep.levels.push_back(info);
        grids.push_back(std::move(vg));
    }
    rep.decreasing = rep.levels.size() >= 3;
    for (std::size_t i = 2; i < rep.levels.size(); ++i) {
        if (!(rep.levels[i].sup_diff < rep.levels[i - 1].sup_diff)) rep.decreasing = false;
    }
    if (report) *report = std::move(rep);
    return grids;
}

}  // namespace roughctl
