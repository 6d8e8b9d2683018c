// Copyright 2026 The protovote Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace protovote {

/// Counter-based generator.
///
/// Output i of a stream with key K is splitmix64_finalize(K + (i + 1) * 0x9E3779B97F4A7C15),
/// i.e. SplitMix64 with the state written as an explicit (key, counter) pair. Every
/// distribution below is implemented here rather than through <random> so that a
/// given (seed, stream) reproduces the same draws on every platform and standard
/// library. Child streams are derived by hashing (key, stream id), which lets
/// parallel trials and folds draw from independent streams whose contents do not
/// depend on scheduling.
class Rng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit Rng(std::uint64_t seed) noexcept : key_(mix(seed ^ 0x6A09E667F3BCC909ULL)) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Independent child stream. Does not advance this generator.
    Rng split(std::uint64_t stream) const noexcept {
        Rng child(0);
        child.key_ = mix(key_ ^ mix(stream + kGamma));
        return child;
    }

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix(key_ + counter_ * kGamma);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Lemire's multiply-shift with rejection; n > 0.
    std::uint64_t below(std::uint64_t n) noexcept {
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (one draw per call; the partner is discarded).
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Fisher-Yates, back to front.
    template <typename T>
    void shuffle(std::span<T> values) noexcept {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace protovote
