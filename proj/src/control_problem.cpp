#include <algorithm>
#include <cmath>

#include "roughctl/control.hpp"
#include "roughctl/errors.hpp"

namespace roughctl {

bool ControlSet::contains(const Vec& u, double tol) const {
    if (u.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u(i) < lower(i) - tol || u(i) > upper(i) + tol) return false;
    }
    return true;
}

ControlSet ControlSet::box(const Vec& lower, const Vec& upper, std::size_t per_dim) {
    require(lower.size() >= 1 && lower.size() == upper.size(), "control box bounds must conform");
    require((lower.array() <= upper.array()).all(), "control box lower bound exceeds upper bound");
    require(per_dim >= 1, "control grid needs at least one point per dimension");
    const auto m = static_cast<std::size_t>(lower.size());
    std::size_t total = 1;
    for (std::size_t i = 0; i < m; ++i) total *= per_dim;
    ControlSet set{lower, upper, {}};
    set.points.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Vec u(lower.size());
        std::size_t rest = flat;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t idx = rest % per_dim;
            rest /= per_dim;
            const auto ii = static_cast<Eigen::Index>(i);
            u(ii) = per_dim == 1 ? 0.5 * (lower(ii) + upper(ii))
                                 : lower(ii) + (upper(ii) - lower(ii)) * static_cast<double>(idx) / static_cast<double>(per_dim - 1);
        }
        set.points.push_back(u);
    }
    return set;
}

ControlSet ControlSet::single(const Vec& u) { return ControlSet{u, u, {u}}; }

Vec ControlProblem::grad_g(const Vec& x) const {
    if (dg) return dg(x);
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step(x(i));
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        out(i) = (g(xp) - g(xm)) / (2.0 * h);
    }
    return out;
}

Vec ControlProblem::grad_f(double t, const Vec& x, const Vec& u) const {
    if (!f) return Vec::Zero(x.size());
    if (df) return df(t, x, u);
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step(x(i));
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        out(i) = (f(t, xp, u) - f(t, xm, u)) / (2.0 * h);
    }
    return out;
}

void ControlProblem::validate() const {
    vf.validate();
    require(static_cast<bool>(g), "control problem needs a terminal gain");
    require(!controls.points.empty(), "control set U_h is empty");
    require(controls.dim() == vf.control_dim, "control set dimension does not match the vector fields");
    for (const Vec& u : controls.points) require(controls.contains(u), "U_h point outside the control box");
}

double payoff_along(const ControlProblem& problem, const ControlPath& mu, const RdeSolution& traj) {
    double total = 0.0;
    if (problem.f) {
        for (std::size_t k = traj.start; k < traj.grid.steps(); ++k) {
            total += problem.f(traj.grid[k], traj.at(k), mu.values[k]) * traj.grid.dt(k);
        }
    }
    return total + problem.g(traj.terminal());
}

double payoff(const ControlProblem& problem, const ControlPath& mu, const GridRoughPath& eta, std::size_t start,
              const Vec& x0) {
    const RdeSolution traj = solve_controlled_rde(x0, start, problem.vf, mu, eta);
    return payoff_along(problem, mu, traj);
}

std::size_t StateMesh::size() const {
    std::size_t total = 1;
    for (std::size_t c : counts) total *= c;
    return total;
}

double StateMesh::step(std::size_t a) const {
    const auto ai = static_cast<Eigen::Index>(a);
    return (upper(ai) - lower(ai)) / static_cast<double>(counts[a] - 1);
}

double StateMesh::coordinate(std::size_t a, std::size_t i) const {
    const auto ai = static_cast<Eigen::Index>(a);
    if (i + 1 == counts[a]) return upper(ai);
    return lower(ai) + step(a) * static_cast<double>(i);
}

Vec StateMesh::node(std::size_t flat) const {
    Vec x(static_cast<Eigen::Index>(dim()));
    for (std::size_t a = 0; a < dim(); ++a) {
        x(static_cast<Eigen::Index>(a)) = coordinate(a, flat % counts[a]);
        flat /= counts[a];
    }
    return x;
}

std::vector<double> StateMesh::axis(std::size_t a) const {
    std::vector<double> out(counts[a]);
    for (std::size_t i = 0; i < counts[a]; ++i) out[i] = coordinate(a, i);
    return out;
}

StateMesh StateMesh::uniform(double lower, double upper, std::size_t count) {
    Vec lo(1), hi(1);
    lo(0) = lower;
    hi(0) = upper;
    return box(lo, hi, count);
}

StateMesh StateMesh::box(const Vec& lower, const Vec& upper, std::size_t count_per_dim) {
    require(lower.size() >= 1 && lower.size() <= 2, "state mesh supports one or two dimensions");
    require(lower.size() == upper.size(), "mesh bounds must conform");
    require((lower.array() < upper.array()).all(), "mesh lower bound must be below upper bound");
    require(count_per_dim >= 2, "mesh needs at least two nodes per axis");
    return StateMesh{lower, upper, std::vector<std::size_t>(static_cast<std::size_t>(lower.size()), count_per_dim)};
}

double interpolate(const StateMesh& mesh, const std::vector<double>& slice, const Vec& x, bool* clamped) {
    const std::size_t e = mesh.dim();
    std::size_t base = 0, stride = 1;
    std::size_t idx[2] = {0, 0};
    double w[2] = {0.0, 0.0};
    std::size_t strides[2] = {1, 1};
    for (std::size_t a = 0; a < e; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        double pos = (x(ai) - mesh.lower(ai)) / mesh.step(a);
        const double last = static_cast<double>(mesh.counts[a] - 1);
        if (!(pos >= 0.0 && pos <= last)) {
            if (clamped) *clamped = true;
            pos = std::isnan(pos) ? 0.0 : std::clamp(pos, 0.0, last);
        }
        std::size_t i = static_cast<std::size_t>(pos);
        if (i + 1 >= mesh.counts[a]) i = mesh.counts[a] - 2;
        idx[a] = i;
        w[a] = pos - static_cast<double>(i);
        strides[a] = stride;
        base += i * stride;
        stride *= mesh.counts[a];
    }
    if (e == 1) return (1.0 - w[0]) * slice[base] + w[0] * slice[base + 1];
    const double v00 = slice[base], v10 = slice[base + strides[0]];
    const double v01 = slice[base + strides[1]], v11 = slice[base + strides[0] + strides[1]];
    (void)idx;
    return (1.0 - w[1]) * ((1.0 - w[0]) * v00 + w[0] * v10) + w[1] * ((1.0 - w[0]) * v01 + w[0] * v11);
}

double PathPenalty::evaluate(const ControlPath& mu, const RdeSolution& traj) const {
    double total = constant;
    for (std::size_t k = traj.start; k < traj.grid.steps(); ++k) {
        const Vec& x = traj.at(k);
        if (running) total += running(k, x, mu.values[k]);
        if (linear) total += linear(k, x).dot(mu.values[k]) * traj.grid.dt(k);
    }
    return total;
}

namespace {

double golden_max(const std::function<double(double)>& fn, double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = fn(c), fd = fn(d);
    for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = fn(d);
        }
    }
    return std::max(fc, fd);
}

}  // namespace

double additive_closed_form_value(const ControlProblem& problem, const GridRoughPath& eta, std::size_t start,
                                  const Vec& x0) {
    if (!problem.additive || !problem.additive->drift) {
        throw std::invalid_argument("problem has no additive form");
    }
    require(start <= eta.steps(), "start index beyond horizon");
    require(static_cast<std::size_t>(x0.size()) == eta.dim(), "additive form needs state and driver of equal dimension");
    const AdditiveForm& form = *problem.additive;
    const double t = eta.grid()[start];
    const double tau = eta.grid().horizon() - t;
    const Vec shifted = x0 + eta.increment(start, eta.steps()).delta;
    auto objective = [&](const Vec& u) {
        const double run = form.running ? form.running(t, u) : 0.0;
        return tau * run + problem.g(shifted + tau * form.drift(t, u));
    };
    const auto& pts = problem.controls.points;
    std::size_t best = 0;
    double best_val = objective(pts[0]);
    for (std::size_t l = 1; l < pts.size(); ++l) {
        const double v = objective(pts[l]);
        if (v > best_val) {
            best_val = v;
            best = l;
        }
    }
    if (problem.controls.dim() != 1 || pts.size() < 2 || tau == 0.0) return best_val;
    // Bracket the best grid point by its neighbours in sorted order.
    std::vector<double> sorted;
    sorted.reserve(pts.size());
    for (const Vec& u : pts) sorted.push_back(u(0));
    std::sort(sorted.begin(), sorted.end());
    const auto pos = std::lower_bound(sorted.begin(), sorted.end(), pts[best](0)) - sorted.begin();
    const double lo = sorted[static_cast<std::size_t>(std::max<std::ptrdiff_t>(pos - 1, 0))];
    const double hi = sorted[static_cast<std::size_t>(std::min<std::ptrdiff_t>(pos + 1, static_cast<std::ptrdiff_t>(sorted.size()) - 1))];
    Vec u(1);
    const double refined = golden_max([&](double s) { u(0) = s; return objective(u); }, lo, hi);
    return std::max(best_val, refined);
}

}  // namespace roughctl
