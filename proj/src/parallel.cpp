#include "roughctl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace roughctl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void CompensatedSum::add(double value) noexcept {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
        compensation_ += (sum_ - t) + value;
    } else {
        compensation_ += (value - t) + sum_;
    }
    sum_ = t;
}

SampleStats sample_stats(std::span<const double> values) {
    SampleStats stats;
    stats.count = values.size();
    if (values.empty()) return stats;
    CompensatedSum sum;
    for (double v : values) sum.add(v);
    stats.mean = sum.value() / static_cast<double>(values.size());
    if (values.size() < 2) return stats;
    CompensatedSum squares;
    for (double v : values) squares.add((v - stats.mean) * (v - stats.mean));
    const double variance = squares.value() / static_cast<double>(values.size() - 1);
    stats.std_error = std::sqrt(variance / static_cast<double>(values.size()));
    return stats;
}

}  // namespace roughctl
