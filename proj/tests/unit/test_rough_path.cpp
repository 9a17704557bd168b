#include <gtest/gtest.h>

#include <random>

#include "roughctl/columnar_io.hpp"
#include "roughctl/parallel.hpp"
#include "roughctl/rough_path.hpp"

using namespace roughctl;

namespace {

Mat random_values(std::size_t dim, std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Mat v(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n + 1));
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
        for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, k) = nd(rng);
    }
    return v;
}

// Iterated integral of a polygon between vertices a and b, summed segment by segment.
Mat polygon_area(const Mat& v, std::size_t a, std::size_t b) {
    const Eigen::Index d = v.rows();
    Mat area = Mat::Zero(d, d);
    for (std::size_t k = a; k < b; ++k) {
        const Vec before = v.col(static_cast<Eigen::Index>(k)) - v.col(static_cast<Eigen::Index>(a));
        const Vec step = v.col(static_cast<Eigen::Index>(k + 1)) - v.col(static_cast<Eigen::Index>(k));
        area += before * step.transpose() + 0.5 * step * step.transpose();
    }
    return area;
}

}  // namespace

TEST(TimeGrid, RejectsNonIncreasingTimes) {
    EXPECT_THROW(TimeGrid({0.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(TimeGrid({0.0}), std::invalid_argument);
    EXPECT_THROW(make_uniform_grid(1.0, 0), std::invalid_argument);
}

TEST(TimeGrid, IndexOfFindsGridTimes) {
    const TimeGrid g = make_uniform_grid(1.0, 8);
    EXPECT_EQ(g.index_of(0.375), 3u);
    EXPECT_THROW(g.index_of(0.3), std::invalid_argument);
}

TEST(PiecewiseLinear, AreasMatchSegmentwiseIntegral) {
    const Mat v = random_values(3, 40, 1);
    const GridRoughPath p = lift_piecewise_linear(make_uniform_grid(2.0, 40), v);
    for (auto [a, b] : {std::pair<std::size_t, std::size_t>{0, 40}, {5, 17}, {12, 13}}) {
        const Increment inc = p.increment(a, b);
        EXPECT_LT((inc.delta - (v.col(static_cast<Eigen::Index>(b)) - v.col(static_cast<Eigen::Index>(a)))).norm(), 1e-12);
        EXPECT_LT((inc.area - polygon_area(v, a, b)).norm(), 1e-12);
    }
}

TEST(PiecewiseLinear, ScalarAreaIsHalfSquare) {
    const Mat v = random_values(1, 16, 2);
    const GridRoughPath p = lift_piecewise_linear(make_uniform_grid(1.0, 16), v);
    const Increment inc = p.increment(3, 11);
    EXPECT_NEAR(inc.area(0, 0), 0.5 * inc.delta(0) * inc.delta(0), 1e-13);
}

TEST(Chen, CombineIsAssociativeAndMatchesDirect) {
    const GridRoughPath p = sample_brownian_lift(7, make_uniform_grid(1.0, 64), 4, 3);
    const Increment whole = p.increment(0, 64);
    const Increment split = chen_combine(chen_combine(p.increment(0, 10), p.increment(10, 33)), p.increment(33, 64));
    EXPECT_LT((whole.delta - split.delta).norm(), 1e-12);
    EXPECT_LT((whole.area - split.area).norm(), 1e-12);
    const Increment right = chen_combine(p.increment(0, 10), chen_combine(p.increment(10, 33), p.increment(33, 64)));
    EXPECT_LT((right.area - split.area).norm(), 1e-12);
}

TEST(Chen, BrownianLiftIsGeometric) {
    const GridRoughPath p = sample_brownian_lift(11, make_uniform_grid(1.0, 32), 8, 2);
    for (std::size_t k = 0; k < p.steps(); ++k) {
        const Vec d = p.delta(k);
        const Mat a = p.area(k);
        EXPECT_LT((0.5 * (a + a.transpose()) - 0.5 * d * d.transpose()).norm(), 1e-14);
    }
    // Substeps make the areas non-trivial.
    const Mat a = p.area(3);
    EXPECT_GT(std::abs(a(0, 1) - a(1, 0)), 0.0);
}

TEST(Coarsen, KeepsIncrementsOverCoarseIntervals) {
    const GridRoughPath p = sample_brownian_lift(3, make_uniform_grid(1.0, 48), 1, 2);
    const GridRoughPath c = p.coarsen(6);
    ASSERT_EQ(c.steps(), 8u);
    for (std::size_t k = 0; k < 8; ++k) {
        const Increment inc = p.increment(6 * k, 6 * k + 6);
        EXPECT_LT((Mat(c.area(k)) - inc.area).norm(), 1e-13);
        EXPECT_LT((Vec(c.delta(k)) - inc.delta).norm(), 1e-13);
    }
    EXPECT_THROW(p.coarsen(5), std::invalid_argument);
}

TEST(Brownian, SeedDeterminesPath) {
    const TimeGrid g = make_uniform_grid(1.0, 32);
    const GridRoughPath a = sample_brownian_lift(5, g, 2, 2), b = sample_brownian_lift(5, g, 2, 2);
    EXPECT_EQ(a.increments(), b.increments());
    EXPECT_NE(a.increments(), sample_brownian_lift(6, g, 2, 2).increments());
}

TEST(Brownian, IncrementVarianceMatchesTime) {
    // Sum of squared increments over many paths estimates T.
    const TimeGrid g = make_uniform_grid(2.0, 16);
    double qv = 0.0;
    const int paths = 400;
    for (int i = 0; i < paths; ++i) {
        const GridRoughPath p = sample_brownian_lift(derive_seed(9, i), g, 1, 1);
        qv += p.increments().squaredNorm();
    }
    EXPECT_NEAR(qv / paths, 2.0, 0.1);
}

TEST(Refine, PreservesValuesAtCoarseTimes) {
    const Mat v = random_values(2, 8, 4);
    const GridRoughPath coarse = lift_piecewise_linear(make_uniform_grid(1.0, 8), v);
    const GridRoughPath fine = refine_piecewise_linear(coarse, make_uniform_grid(1.0, 64));
    const Mat fv = fine.values();
    for (Eigen::Index k = 0; k <= 8; ++k) {
        EXPECT_LT((fv.col(8 * k) - (v.col(k) - v.col(0))).norm(), 1e-13);
    }
    // Straight segments carry no area.
    EXPECT_LT((fine.increment(0, 8).area - coarse.increment(0, 1).area).norm(), 1e-13);
}

TEST(Hoelder, DistanceVanishesOnlyForEqualPaths) {
    const TimeGrid g = make_uniform_grid(1.0, 32);
    const GridRoughPath p = sample_brownian_lift(1, g, 1, 1);
    EXPECT_EQ(hoelder_distance(p, p).distance, 0.0);
    const GridRoughPath q = p.scaled(1.01);
    EXPECT_GT(hoelder_distance(p, q).distance, 0.0);
    // For a single straight segment the level-1 norm is |delta| / T^alpha.
    Mat v(1, 2);
    v << 0.0, 2.0;
    const GridRoughPath line = lift_piecewise_linear(make_uniform_grid(4.0, 1), v);
    EXPECT_NEAR(hoelder_distance(line, zero_path(line.grid(), 1), 0.5).level1_norm, 1.0, 1e-14);
    EXPECT_THROW(hoelder_distance(p, p, 0.7), std::invalid_argument);
}

TEST(ColumnarIo, PathRoundTripsExactly) {
    const GridRoughPath p = sample_brownian_lift(21, make_uniform_grid(1.5, 20), 3, 2);
    std::stringstream s;
    write_path(s, p);
    const GridRoughPath q = read_path(s);
    EXPECT_TRUE(q.grid() == p.grid());
    EXPECT_EQ(q.increments(), p.increments());
    EXPECT_TRUE(std::equal(q.raw_areas().begin(), q.raw_areas().end(), p.raw_areas().begin()));
}

TEST(Parallel, ReductionIndependentOfWorkers) {
    std::vector<double> a(1000), b(1000);
    auto body = [](std::vector<double>& out) {
        return [&out](std::size_t i) { out[i] = std::sin(static_cast<double>(derive_seed(3, i) % 1000)); };
    };
    parallel_for(a.size(), 1, body(a));
    parallel_for(b.size(), 4, body(b));
    EXPECT_EQ(sample_stats(a).mean, sample_stats(b).mean);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                 std::runtime_error);
}
