#include <algorithm>
#include <cmath>
#include <limits>

#include "roughctl/control.hpp"
#include "roughctl/errors.hpp"

namespace roughctl {

namespace {

constexpr std::size_t kMaxRunningTable = std::size_t{1} << 24;

}  // namespace

struct DpSolver::Tables {
    ControlProblem problem;
    StateMesh mesh;
    TimeGrid grid;
    std::size_t nodes = 0, controls = 0, e = 0, d = 0;
    std::vector<Vec> node;
    std::vector<double> drift;    // (j * L + l) * e + c
    std::vector<double> sigma;    // (j * e + c) * d + i
    std::vector<double> second;   // ((j * e + c) * d + i) * d + jj : (D sigma_jj sigma_i)(x_j)_c
    std::vector<double> running;  // (k * N + j) * L + l, times dt_k; empty when f is absent or too large
    std::vector<double> terminal;

    Tables(ControlProblem p, StateMesh m, TimeGrid g) : problem(std::move(p)), mesh(std::move(m)), grid(std::move(g)) {}

    void running_row(std::size_t k, std::vector<double>& row) const {
        row.assign(nodes * controls, 0.0);
        if (!problem.f) return;
        if (!running.empty()) {
            std::copy_n(running.begin() + static_cast<std::ptrdiff_t>(k * nodes * controls), nodes * controls, row.begin());
            return;
        }
        const double t = grid[k], dt = grid.dt(k);
        for (std::size_t j = 0; j < nodes; ++j)
            for (std::size_t l = 0; l < controls; ++l)
                row[j * controls + l] = problem.f(t, node[j], problem.controls.points[l]) * dt;
    }
};

DpSolver::DpSolver(ControlProblem problem, StateMesh mesh, TimeGrid grid)
    : tables_(std::make_unique<Tables>(std::move(problem), std::move(mesh), std::move(grid))) {
    Tables& t = *tables_;
    t.problem.validate();
    require(t.mesh.dim() == t.problem.vf.state_dim, "mesh dimension must equal the state dimension");
    require(t.mesh.dim() <= 2, "dynamic programming supports one or two state dimensions");
    t.nodes = t.mesh.size();
    t.controls = t.problem.controls.points.size();
    t.e = t.problem.vf.state_dim;
    t.d = t.problem.vf.noise_dim;
    const std::size_t N = t.nodes, L = t.controls, e = t.e, d = t.d;
    t.node.reserve(N);
    for (std::size_t j = 0; j < N; ++j) t.node.push_back(t.mesh.node(j));
    t.drift.resize(N * L * e);
    t.sigma.resize(N * e * d);
    t.second.resize(N * e * d * d);
    t.terminal.resize(N);
    for (std::size_t j = 0; j < N; ++j) {
        const Vec& x = t.node[j];
        for (std::size_t l = 0; l < L; ++l) {
            const Vec b = t.problem.vf.drift(x, t.problem.controls.points[l]);
            for (std::size_t c = 0; c < e; ++c) t.drift[(j * L + l) * e + c] = b(static_cast<Eigen::Index>(c));
        }
        const Mat sig = t.problem.vf.diffusion(x);
        const std::vector<Mat> jac = t.problem.vf.dsigma(x);
        for (std::size_t c = 0; c < e; ++c) {
            for (std::size_t i = 0; i < d; ++i) {
                const auto ci = static_cast<Eigen::Index>(c), ii = static_cast<Eigen::Index>(i);
                t.sigma[(j * e + c) * d + i] = sig(ci, ii);
                for (std::size_t jj = 0; jj < d; ++jj) {
                    t.second[((j * e + c) * d + i) * d + jj] = (jac[jj] * sig.col(ii))(ci);
                }
            }
        }
        t.terminal[j] = t.problem.g(x);
    }
    const std::size_t n = t.grid.steps();
    if (t.problem.f && n * N * L <= kMaxRunningTable) {
        t.running.resize(n * N * L);
        for (std::size_t k = 0; k < n; ++k) {
            const double tk = t.grid[k], dt = t.grid.dt(k);
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t l = 0; l < L; ++l)
                    t.running[(k * N + j) * L + l] = t.problem.f(tk, t.node[j], t.problem.controls.points[l]) * dt;
        }
    }
}

DpSolver::~DpSolver() = default;
DpSolver::DpSolver(DpSolver&&) noexcept = default;

const ControlProblem& DpSolver::problem() const { return tables_->problem; }
const StateMesh& DpSolver::mesh() const { return tables_->mesh; }

PathwiseResult DpSolver::solve(const GridRoughPath& eta, std::size_t start, const Vec& x0, const PathPenalty* penalty,
                               const DpOptions& options) const {
    const Tables& t = *tables_;
    require(eta.grid() == t.grid, "driver grid differs from the solver grid");
    require(eta.dim() == t.d, "driver dimension does not match the diffusion");
    require(start < eta.steps(), "start index must precede the horizon");
    require(static_cast<std::size_t>(x0.size()) == t.e, "initial state has wrong dimension");
    if (penalty && penalty->empty()) penalty = nullptr;

    const std::size_t n = eta.steps(), N = t.nodes, L = t.controls, e = t.e, d = t.d;
    const auto& U = t.problem.controls.points;
    const bool keep_argmax = options.values_out != nullptr;

    std::vector<std::vector<double>> slices(n - start + 1);
    std::vector<std::vector<int>> argmax;
    if (keep_argmax) argmax.resize(n - start);
    slices.back() = t.terminal;

    std::vector<double> base(N * e), row, lam;
    std::size_t clamps = 0;
    const double lo = t.mesh.lower(0);
    const double inv_h = 1.0 / t.mesh.step(0);
    const double last = static_cast<double>(t.mesh.counts[0] - 1);

    for (std::size_t k = n; k-- > start;) {
        const double dt = t.grid.dt(k);
        const auto delta = eta.delta(k);
        const auto area = eta.area(k);
        for (std::size_t j = 0; j < N; ++j) {
            for (std::size_t c = 0; c < e; ++c) {
                double y = t.node[j](static_cast<Eigen::Index>(c));
                const double* sg = &t.sigma[(j * e + c) * d];
                const double* so = &t.second[(j * e + c) * d * d];
                for (std::size_t i = 0; i < d; ++i) {
                    y += sg[i] * delta(static_cast<Eigen::Index>(i));
                    for (std::size_t jj = 0; jj < d; ++jj) y += so[i * d + jj] * area(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj));
                }
                base[j * e + c] = y;
            }
        }
        t.running_row(k, row);
        if (penalty && penalty->linear) {
            lam.assign(N * L, 0.0);
            for (std::size_t j = 0; j < N; ++j) {
                const Vec lj = penalty->linear(k, t.node[j]);
                for (std::size_t l = 0; l < L; ++l) lam[j * L + l] = lj.dot(U[l]) * dt;
            }
        }
        if (penalty && penalty->running) {
            if (lam.empty()) lam.assign(N * L, 0.0);
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t l = 0; l < L; ++l) lam[j * L + l] += penalty->running(k, t.node[j], U[l]);
        }
        const std::vector<double>& next = slices[k + 1 - start];
        std::vector<double>& cur = slices[k - start];
        cur.resize(N);
        if (keep_argmax) argmax[k - start].resize(N);
        const bool has_extra = !lam.empty();

        if (e == 1) {
            const double* drift = t.drift.data();
            const double* run = row.data();
            const double* extra = has_extra ? lam.data() : nullptr;
            const double* v = next.data();
            for (std::size_t j = 0; j < N; ++j) {
                const double b0 = base[j];
                double best = -std::numeric_limits<double>::infinity();
                int best_l = 0;
                for (std::size_t l = 0; l < L; ++l) {
                    const std::size_t jl = j * L + l;
                    double pos = (b0 + drift[jl] * dt - lo) * inv_h;
                    if (!(pos >= 0.0 && pos <= last)) {
                        ++clamps;
                        pos = std::isnan(pos) ? 0.0 : std::clamp(pos, 0.0, last);
                    }
                    std::size_t i = static_cast<std::size_t>(pos);
                    if (static_cast<double>(i) >= last) i = static_cast<std::size_t>(last) - 1;
                    const double w = pos - static_cast<double>(i);
                    double val = run[jl] + (1.0 - w) * v[i] + w * v[i + 1];
                    if (extra) val += extra[jl];
                    if (val > best) {
                        best = val;
                        best_l = static_cast<int>(l);
                    }
                }
                cur[j] = best;
                if (keep_argmax) argmax[k - start][j] = best_l;
            }
        } else {
            Vec y(static_cast<Eigen::Index>(e));
            for (std::size_t j = 0; j < N; ++j) {
                double best = -std::numeric_limits<double>::infinity();
                int best_l = 0;
                for (std::size_t l = 0; l < L; ++l) {
                    const std::size_t jl = j * L + l;
                    for (std::size_t c = 0; c < e; ++c) y(static_cast<Eigen::Index>(c)) = base[j * e + c] + t.drift[jl * e + c] * dt;
                    bool clamped = false;
                    double val = row[jl] + interpolate(t.mesh, next, y, &clamped);
                    if (clamped) ++clamps;
                    if (has_extra) val += lam[jl];
                    if (val > best) {
                        best = val;
                        best_l = static_cast<int>(l);
                    }
                }
                cur[j] = best;
                if (keep_argmax) argmax[k - start][j] = best_l;
            }
        }
        for (double vj : cur) {
            if (!std::isfinite(vj)) throw NumericalOverflow("non-finite value in dynamic programming", k);
        }
    }

    // Forward pass from the exact initial state.
    PathwiseResult result{0.0, ControlPath{t.grid, std::vector<Vec>(n, U[0])}, RdeSolution{t.grid, start, {}, {}}};
    result.backward_clamps = clamps;
    result.trajectory.states.reserve(n - start + 1);
    result.trajectory.states.push_back(x0);
    double value = 0.0;
    Vec x = x0;
    for (std::size_t k = start; k < n; ++k) {
        const double dt = t.grid.dt(k), tk = t.grid[k];
        const Mat sig = t.problem.vf.diffusion(x);
        const Vec noise = x + sig * eta.delta(k) + t.problem.vf.second_order_noise(x, sig, eta.area(k));
        Vec lk;
        if (penalty && penalty->linear) lk = penalty->linear(k, x);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_l = 0;
        Vec best_y;
        bool best_clamped = false;
        for (std::size_t l = 0; l < L; ++l) {
            Vec y = noise + t.problem.vf.drift(x, U[l]) * dt;
            bool clamped = false;
            double val = t.problem.running(tk, x, U[l]) * dt + interpolate(t.mesh, slices[k + 1 - start], y, &clamped);
            if (penalty && penalty->linear) val += lk.dot(U[l]) * dt;
            if (penalty && penalty->running) val += penalty->running(k, x, U[l]);
            if (val > best) {
                best = val;
                best_l = l;
                best_y = std::move(y);
                best_clamped = clamped;
            }
        }
        if (!best_y.allFinite()) throw NumericalOverflow("non-finite state in forward pass", k);
        if (best_clamped) ++result.boundary_hits;
        if (k == start) value = best;
        result.control.values[k] = U[best_l];
        x = best_y;
        result.trajectory.states.push_back(x);
    }
    result.value = value + (penalty ? penalty->constant : 0.0);
    result.out_of_domain = result.boundary_hits > options.boundary_hit_threshold;

    if (options.values_out) {
        *options.values_out = ValueGrid{t.grid, start, t.mesh, std::move(slices), std::move(argmax)};
    }
    return result;
}

PathwiseResult inner_sup_dp(const ControlProblem& problem, const GridRoughPath& eta, const StateMesh& mesh,
                            std::size_t start, const Vec& x0, const PathPenalty* penalty, const DpOptions& options) {
    return DpSolver(problem, mesh, eta.grid()).solve(eta, start, x0, penalty, options);
}

}  // namespace roughctl
