#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "roughctl/linalg.hpp"

namespace roughctl {

/// Strictly increasing instants t_0 < ... < t_n with n >= 1.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times);

    std::size_t steps() const noexcept { return times_.size() - 1; }
    double operator[](std::size_t k) const { return times_[k]; }
    double start() const noexcept { return times_.front(); }
    double horizon() const noexcept { return times_.back(); }
    double dt(std::size_t k) const { return times_[k + 1] - times_[k]; }
    std::span<const double> times() const noexcept { return times_; }

    /// Index k with t_k == t (to a relative 1e-12); throws if t is not a grid time.
    std::size_t index_of(double t) const;

    bool operator==(const TimeGrid&) const = default;

private:
    std::vector<double> times_;
};

TimeGrid make_uniform_grid(double horizon, std::size_t steps);

/// Level-1 and level-2 increment over some interval [s, t].
/// area(i, j) is the iterated integral of d eta^i then d eta^j over s < r1 < r2 < t.
struct Increment {
    Vec delta;
    Mat area;

    static Increment zero(std::size_t dim);
};

/// Chen composition of increments over [s, t] and [t, u].
Increment chen_combine(const Increment& left, const Increment& right);

/// Level-2 geometric rough path on a time grid, stored per elementary interval.
/// Immutable after construction.
class GridRoughPath {
public:
    /// `increments` is dim x n; `areas` holds n row-major dim x dim blocks.
    GridRoughPath(TimeGrid grid, std::size_t dim, Mat increments, std::vector<double> areas);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t steps() const noexcept { return grid_.steps(); }

    Eigen::Map<const Vec> delta(std::size_t k) const;
    Eigen::Map<const RowMajorMat> area(std::size_t k) const;
    const Mat& increments() const noexcept { return increments_; }
    std::span<const double> raw_areas() const noexcept { return areas_; }

    /// Increment over [t_from, t_to] derived with Chen's relation.
    Increment increment(std::size_t from, std::size_t to) const;

    /// Path values eta_{t_k} - eta_{t_0}, dim x (n+1).
    Mat values() const;

    /// Keeps every `factor`-th grid time; areas combined via Chen.
    GridRoughPath coarsen(std::size_t factor) const;

    /// Same path, level-1 scaled by c (areas by c^2).
    GridRoughPath scaled(double c) const;

private:
    TimeGrid grid_;
    std::size_t dim_;
    Mat increments_;
    std::vector<double> areas_;
};

/// Piecewise-linear (chord) lift of `values` (dim x (n+1)) sampled on `grid`.
GridRoughPath lift_piecewise_linear(const TimeGrid& grid, const Mat& values);

/// The piecewise-linear path through the values of `path` at its grid times,
/// lifted on `fine`, a grid spanning the same interval.
GridRoughPath refine_piecewise_linear(const GridRoughPath& path, const TimeGrid& fine);

/// Brownian motion simulated on the `substeps`-fold refined grid, lifted
/// piecewise-linearly there and coarsened to `grid` via Chen.
GridRoughPath sample_brownian_lift(std::uint64_t seed, const TimeGrid& grid, std::size_t substeps,
                                   std::size_t dim);

/// The zero path of dimension `dim` on `grid`.
GridRoughPath zero_path(const TimeGrid& grid, std::size_t dim);

struct HoelderReport {
    double alpha = 0.4;
    double level1_norm = 0.0;  ///< sup |delta_p| / (t-s)^alpha
    double level2_norm = 0.0;  ///< sup |A_p| / (t-s)^(2 alpha)
    double distance = 0.0;     ///< inhomogeneous alpha-Hoelder distance to q
};

enum class HoelderPairs { All, Dyadic };

/// Grid-restricted inhomogeneous Hoelder distance: max over grid pairs s < t of
/// |delta_p - delta_q| / (t-s)^alpha and |A_p - A_q|^(1/2) / (t-s)^alpha.
HoelderReport hoelder_distance(const GridRoughPath& p, const GridRoughPath& q, double alpha = 0.4,
                               HoelderPairs pairs = HoelderPairs::All);

}  // namespace roughctl
