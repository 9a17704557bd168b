#include "roughctl/rough_path.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "roughctl/errors.hpp"

namespace roughctl {

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    require(times_.size() >= 2, "time grid needs at least one step");
    for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
        require(std::isfinite(times_[k]) && times_[k] < times_[k + 1], "time grid must be strictly increasing");
    }
}

std::size_t TimeGrid::index_of(double t) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(horizon()));
    auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
    if (it == times_.end() || std::abs(*it - t) > tol) throw std::invalid_argument("time is not a grid time");
    return static_cast<std::size_t>(it - times_.begin());
}

TimeGrid make_uniform_grid(double horizon, std::size_t steps) {
    require(horizon > 0.0 && std::isfinite(horizon), "horizon must be positive");
    require(steps >= 1, "grid needs at least one step");
    std::vector<double> times(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        times[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    }
    times.back() = horizon;
    return TimeGrid(std::move(times));
}

Increment Increment::zero(std::size_t dim) {
    return {Vec::Zero(static_cast<Eigen::Index>(dim)), Mat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
}

Increment chen_combine(const Increment& left, const Increment& right) {
    require(left.delta.size() == right.delta.size(), "increment dimensions differ");
    Increment out;
    out.delta = left.delta + right.delta;
    out.area = left.area + right.area + left.delta * right.delta.transpose();
    return out;
}

GridRoughPath::GridRoughPath(TimeGrid grid, std::size_t dim, Mat increments, std::vector<double> areas)
    : grid_(std::move(grid)), dim_(dim), increments_(std::move(increments)), areas_(std::move(areas)) {
    require(dim_ >= 1, "path dimension must be positive");
    require(static_cast<std::size_t>(increments_.rows()) == dim_ &&
                static_cast<std::size_t>(increments_.cols()) == grid_.steps(),
            "increment matrix shape does not match grid");
    require(areas_.size() == grid_.steps() * dim_ * dim_, "area storage does not match grid");
}

Eigen::Map<const Vec> GridRoughPath::delta(std::size_t k) const {
    return Eigen::Map<const Vec>(increments_.col(static_cast<Eigen::Index>(k)).data(), static_cast<Eigen::Index>(dim_));
}

Eigen::Map<const RowMajorMat> GridRoughPath::area(std::size_t k) const {
    return Eigen::Map<const RowMajorMat>(areas_.data() + k * dim_ * dim_, static_cast<Eigen::Index>(dim_),
                                         static_cast<Eigen::Index>(dim_));
}

Increment GridRoughPath::increment(std::size_t from, std::size_t to) const {
    require(from <= to && to <= steps(), "increment bounds out of range");
    Increment acc = Increment::zero(dim_);
    for (std::size_t k = from; k < to; ++k) {
        acc.area += area(k) + acc.delta * delta(k).transpose();
        acc.delta += delta(k);
    }
    return acc;
}

Mat GridRoughPath::values() const {
    Mat out = Mat::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(steps() + 1));
    for (std::size_t k = 0; k < steps(); ++k) {
        out.col(static_cast<Eigen::Index>(k + 1)) = out.col(static_cast<Eigen::Index>(k)) + delta(k);
    }
    return out;
}

GridRoughPath GridRoughPath::coarsen(std::size_t factor) const {
    require(factor >= 1 && steps() % factor == 0, "coarsening factor must divide the step count");
    const std::size_t n = steps() / factor;
    std::vector<double> times(n + 1);
    Mat inc(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(n));
    std::vector<double> areas(n * dim_ * dim_);
    for (std::size_t k = 0; k < n; ++k) {
        times[k] = grid_[k * factor];
        const Increment piece = increment(k * factor, (k + 1) * factor);
        inc.col(static_cast<Eigen::Index>(k)) = piece.delta;
        Eigen::Map<RowMajorMat>(areas.data() + k * dim_ * dim_, static_cast<Eigen::Index>(dim_),
                                static_cast<Eigen::Index>(dim_)) = piece.area;
    }
    times[n] = grid_.horizon();
    return GridRoughPath(TimeGrid(std::move(times)), dim_, std::move(inc), std::move(areas));
}

GridRoughPath GridRoughPath::scaled(double c) const {
    std::vector<double> areas = areas_;
    for (double& a : areas) a *= c * c;
    return GridRoughPath(grid_, dim_, increments_ * c, std::move(areas));
}

GridRoughPath refine_piecewise_linear(const GridRoughPath& approx, const TimeGrid& fine) {
    const Mat coarse = approx.values();
    const auto d = static_cast<Eigen::Index>(approx.dim());
    Mat values(d, static_cast<Eigen::Index>(fine.steps() + 1));
    std::size_t c = 0;
    const TimeGrid& g = approx.grid();
    for (std::size_t q = 0; q <= fine.steps(); ++q) {
        const double t = fine[q];
        while (c + 1 < g.steps() && t >= g[c + 1]) ++c;
        const double w = std::clamp((t - g[c]) / g.dt(c), 0.0, 1.0);
        values.col(static_cast<Eigen::Index>(q)) =
            (1.0 - w) * coarse.col(static_cast<Eigen::Index>(c)) + w * coarse.col(static_cast<Eigen::Index>(c + 1));
    }
    return lift_piecewise_linear(fine, values);
}

GridRoughPath lift_piecewise_linear(const TimeGrid& grid, const Mat& values) {
    require(values.rows() >= 1, "values need at least one component");
    require(static_cast<std::size_t>(values.cols()) == grid.steps() + 1, "one value per grid time required");
    const auto dim = static_cast<std::size_t>(values.rows());
    const std::size_t n = grid.steps();
    Mat inc(values.rows(), static_cast<Eigen::Index>(n));
    std::vector<double> areas(n * dim * dim);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec d = values.col(static_cast<Eigen::Index>(k + 1)) - values.col(static_cast<Eigen::Index>(k));
        inc.col(static_cast<Eigen::Index>(k)) = d;
        Eigen::Map<RowMajorMat>(areas.data() + k * dim * dim, values.rows(), values.rows()) = 0.5 * d * d.transpose();
    }
    return GridRoughPath(grid, dim, std::move(inc), std::move(areas));
}

GridRoughPath sample_brownian_lift(std::uint64_t seed, const TimeGrid& grid, std::size_t substeps, std::size_t dim) {
    require(substeps >= 1, "substeps must be at least 1");
    require(dim >= 1, "dimension must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = grid.steps();
    const auto d = static_cast<Eigen::Index>(dim);
    Mat inc(d, static_cast<Eigen::Index>(n));
    std::vector<double> areas(n * dim * dim);
    Vec fine(d);
    for (std::size_t k = 0; k < n; ++k) {
        const double scale = std::sqrt(grid.dt(k) / static_cast<double>(substeps));
        Vec delta = Vec::Zero(d);
        Mat area = Mat::Zero(d, d);
        for (std::size_t s = 0; s < substeps; ++s) {
            for (Eigen::Index i = 0; i < d; ++i) fine(i) = scale * normal(rng);
            area += 0.5 * fine * fine.transpose() + delta * fine.transpose();
            delta += fine;
        }
        inc.col(static_cast<Eigen::Index>(k)) = delta;
        Eigen::Map<RowMajorMat>(areas.data() + k * dim * dim, d, d) = area;
    }
    return GridRoughPath(grid, dim, std::move(inc), std::move(areas));
}

GridRoughPath zero_path(const TimeGrid& grid, std::size_t dim) {
    return GridRoughPath(grid, dim, Mat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(grid.steps())),
                         std::vector<double>(grid.steps() * dim * dim, 0.0));
}

HoelderReport hoelder_distance(const GridRoughPath& p, const GridRoughPath& q, double alpha, HoelderPairs pairs) {
    require(p.grid() == q.grid() && p.dim() == q.dim(), "paths must share grid and dimension");
    require(alpha > 1.0 / 3.0 && alpha <= 0.5, "alpha must lie in (1/3, 1/2]");
    HoelderReport report;
    report.alpha = alpha;
    const std::size_t n = p.steps();
    const TimeGrid& grid = p.grid();
    auto visit = [&](std::size_t s, const Increment& ip, const Increment& iq, std::size_t t) {
        const double span = std::pow(grid[t] - grid[s], alpha);
        report.level1_norm = std::max(report.level1_norm, ip.delta.norm() / span);
        report.level2_norm = std::max(report.level2_norm, ip.area.norm() / (span * span));
        const double d1 = (ip.delta - iq.delta).norm() / span;
        const double d2 = std::sqrt((ip.area - iq.area).norm()) / span;
        report.distance = std::max({report.distance, d1, d2});
    };
    if (pairs == HoelderPairs::All) {
        for (std::size_t s = 0; s < n; ++s) {
            Increment ip = Increment::zero(p.dim());
            Increment iq = Increment::zero(p.dim());
            for (std::size_t t = s + 1; t <= n; ++t) {
                ip.area += p.area(t - 1) + ip.delta * p.delta(t - 1).transpose();
                ip.delta += p.delta(t - 1);
                iq.area += q.area(t - 1) + iq.delta * q.delta(t - 1).transpose();
                iq.delta += q.delta(t - 1);
                visit(s, ip, iq, t);
            }
        }
    } else {
        for (std::size_t width = 1; width <= n; width *= 2) {
            for (std::size_t s = 0; s + width <= n; s += width) {
                visit(s, p.increment(s, s + width), q.increment(s, s + width), s + width);
            }
        }
    }
    return report;
}

}  // namespace roughctl
