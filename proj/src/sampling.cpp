#include "dsmedian/sampling.hpp"

#include "dsmedian/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace dsmedian {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(SeedSpec seed)
    : key_(mix64(mix64(seed.master_seed ^ 0x6a09e667f3bcc909ULL) + mix64(seed.stream_id + kGoldenGamma))) {}

std::uint64_t CounterRng::next() {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
}

std::uint64_t CounterRng::bounded(std::uint64_t range) {
    // Reject the low (2^64 mod range) values so the remainder is uniform.
    const std::uint64_t threshold = (0 - range) % range;
    while (true) {
        const std::uint64_t r = next();
        if (r >= threshold) return r % range;
    }
}

double CounterRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double CounterRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::vector<std::size_t> srswor(std::size_t N, std::size_t k, CounterRng& rng) {
    if (k < 1 || k > N) throw InvalidInput("srswor requires 1 <= k <= N");
    std::vector<std::size_t> pool(N);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // partial Fisher-Yates: positions [0, k) end up a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.bounded(N - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<std::size_t> srswor(std::size_t N, std::size_t k, SeedSpec seed) {
    CounterRng rng(seed);
    return srswor(N, k, rng);
}

TwoPhaseSample draw_two_phase(std::size_t N, std::size_t n, std::size_t m, SeedSpec seed) {
    if (!(m >= 1 && m < n && n <= N)) throw InvalidInput("require m < n <= N");
    CounterRng rng(seed);
    TwoPhaseSample s;
    s.first_phase = srswor(N, n, rng);
    const auto positions = srswor(n, m, rng);
    s.second_phase.reserve(m);
    for (auto pos : positions) s.second_phase.push_back(s.first_phase[pos]);
    return s;
}

}  // namespace dsmedian
