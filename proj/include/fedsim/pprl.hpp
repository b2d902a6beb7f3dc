#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim::pprl {

/// Fixed-width bit vector used as a privacy-preserving identifier.
class BloomFilter {
public:
    BloomFilter() = default;
    explicit BloomFilter(std::size_t width);
    /// Parses a string of '0'/'1' characters, most significant bit first in
    /// reading order (character i is bit i).
    static BloomFilter from_bits(std::string_view bits);
    static BloomFilter from_word(std::uint64_t word, std::size_t width);

    std::size_t width() const noexcept { return width_; }
    void set(std::size_t bit);
    bool test(std::size_t bit) const;
    std::size_t popcount() const noexcept;
    std::string to_string() const;
    std::span<const std::uint64_t> words() const noexcept { return words_; }

    /// Appends `other`'s bits after this filter's bits.
    void append(const BloomFilter& other);

    friend bool operator==(const BloomFilter&, const BloomFilter&) = default;

private:
    std::size_t width_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Interval-membership encoding of a number: bit i is set iff |x - r_i| <= t.
struct FederalNumericParams {
    std::vector<double> anchors;
    double threshold = 1.0;
    std::uint64_t seed = 0;

    std::size_t width() const noexcept { return anchors.size(); }
    void validate() const;

    /// `width` anchors drawn uniformly from [lo, hi] with the given seed.
    static FederalNumericParams random(std::size_t width, double lo, double hi, double threshold, std::uint64_t seed);
};

struct StringEncoderParams {
    std::size_t q = 2;
    std::size_t width = 64;
    std::size_t num_hashes = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

BloomFilter encode_numeric(double x, const FederalNumericParams& params);
/// One FEDERAL block per coordinate, concatenated in coordinate order.
BloomFilter encode_numeric_vector(std::span<const double> x, std::span<const FederalNumericParams> per_dim);

/// q-grams of `s` after padding with q-1 leading '#' and trailing '$'.
std::vector<std::string> qgrams(std::string_view s, std::size_t q);
/// Bit positions set by one gram: double hashing over a seeded 64-bit hash.
std::vector<std::size_t> gram_positions(std::string_view gram, const StringEncoderParams& params);
BloomFilter encode_string(std::string_view s, const StringEncoderParams& params);

std::size_t hamming_distance(const BloomFilter& a, const BloomFilter& b);

/// Fraction of filters whose ones count is at most (1 - epsilon) times the
/// mean ones count: an empirical estimate of delta in
/// Pr[w <= (1 - eps) E[w]] < delta.
double ones_concentration(std::span<const BloomFilter> filters, double epsilon);

/// Keyed 64-bit mix used for gram hashing (not cryptographic).
std::uint64_t keyed_hash(std::string_view data, std::uint64_t key) noexcept;

}  // namespace fedsim::pprl
