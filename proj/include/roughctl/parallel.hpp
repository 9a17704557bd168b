#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace roughctl {

/// Seed of the independent stream for path `index` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Runs body(i) for i in [0, count) on up to `workers` threads. Each index is
/// visited exactly once; the first exception thrown by any body is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

/// Neumaier summation; adding in a fixed order gives worker-independent sums.
class CompensatedSum {
public:
    void add(double value) noexcept;
    double value() const noexcept { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

/// Mean and standard error of the mean, reduced in index order.
SampleStats sample_stats(std::span<const double> values);

}  // namespace roughctl
