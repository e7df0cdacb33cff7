#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace icee {

// Counter-based generator: the k-th draw is a pure function of (key, k).
// Sub-streams are keyed by a label so that adding draws in one pipeline
// stage never shifts the sequence seen by another.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) noexcept;

    RngStream substream(std::string_view label) const noexcept;
    RngStream substream(std::string_view label, std::uint64_t index) const noexcept;

    std::uint64_t next_u64() noexcept;
    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    // Unbiased integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;
    double normal() noexcept;

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    RngStream(std::uint64_t key, std::uint64_t counter) noexcept : key_(key), counter_(counter) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace icee
