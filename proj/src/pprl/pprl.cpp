#include "fedsim/pprl.hpp"

#include <bit>
#include <cmath>
#include <random>

#include "fedsim/error.hpp"

namespace fedsim::pprl {

BloomFilter::BloomFilter(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {
    if (width == 0) throw InputError("bloom filter width must be positive");
}

BloomFilter BloomFilter::from_bits(std::string_view bits) {
    BloomFilter f(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') {
            f.set(i);
        } else if (bits[i] != '0') {
            throw InputError("bloom filter literal may only contain '0' and '1'");
        }
    }
    return f;
}

BloomFilter BloomFilter::from_word(std::uint64_t word, std::size_t width) {
    if (width > 64) throw InputError("from_word supports widths up to 64");
    BloomFilter f(width);
    f.words_[0] = width == 64 ? word : (word & ((std::uint64_t{1} << width) - 1));
    return f;
}

void BloomFilter::set(std::size_t bit) {
    if (bit >= width_) throw InputError("bit index out of range");
    words_[bit / 64] |= std::uint64_t{1} << (bit % 64);
}

bool BloomFilter::test(std::size_t bit) const {
    if (bit >= width_) throw InputError("bit index out of range");
    return (words_[bit / 64] >> (bit % 64)) & 1U;
}

std::size_t BloomFilter::popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::string BloomFilter::to_string() const {
    std::string s(width_, '0');
    for (std::size_t i = 0; i < width_; ++i)
        if (test(i)) s[i] = '1';
    return s;
}

void BloomFilter::append(const BloomFilter& other) {
    const std::size_t offset = width_;
    width_ += other.width_;
    words_.resize((width_ + 63) / 64, 0);
    for (std::size_t i = 0; i < other.width_; ++i)
        if (other.test(i)) set(offset + i);
}

void FederalNumericParams::validate() const {
    if (anchors.empty()) throw InputError("FEDERAL encoding needs at least one anchor");
    if (!(threshold > 0.0)) throw InputError("FEDERAL threshold must be positive");
}

FederalNumericParams FederalNumericParams::random(std::size_t width, double lo, double hi, double threshold,
                                                  std::uint64_t seed) {
    if (!(hi > lo)) throw InputError("anchor range must be non-empty");
    FederalNumericParams p;
    p.threshold = threshold;
    p.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    p.anchors.resize(width);
    for (double& a : p.anchors) a = dist(rng);
    p.validate();
    return p;
}

void StringEncoderParams::validate() const {
    if (q < 1) throw InputError("q-gram length must be at least 1");
    if (num_hashes < 1) throw InputError("need at least one hash per gram");
    if (width < 1) throw InputError("bloom filter width must be positive");
}

BloomFilter encode_numeric(double x, const FederalNumericParams& params) {
    params.validate();
    if (!std::isfinite(x)) throw InputError("cannot encode a non-finite number");
    BloomFilter f(params.width());
    for (std::size_t i = 0; i < params.anchors.size(); ++i)
        if (std::abs(x - params.anchors[i]) <= params.threshold) f.set(i);
    return f;
}

BloomFilter encode_numeric_vector(std::span<const double> x, std::span<const FederalNumericParams> per_dim) {
    if (x.size() != per_dim.size() || x.empty()) {
        throw InputError("vector encoding needs one parameter block per coordinate");
    }
    BloomFilter out = encode_numeric(x[0], per_dim[0]);
    for (std::size_t d = 1; d < x.size(); ++d) out.append(encode_numeric(x[d], per_dim[d]));
    return out;
}

std::vector<std::string> qgrams(std::string_view s, std::size_t q) {
    if (q < 1) throw InputError("q-gram length must be at least 1");
    if (s.empty()) throw InputError("cannot encode an empty string");
    std::string padded(q - 1, '#');
    padded += s;
    padded.append(q - 1, '$');
    std::vector<std::string> grams;
    for (std::size_t i = 0; i + q <= padded.size(); ++i) grams.emplace_back(padded.substr(i, q));
    return grams;
}

std::uint64_t keyed_hash(std::string_view data, std::uint64_t key) noexcept {
    // FNV-1a over the bytes, keyed through the offset basis, then a
    // splitmix64 finalizer to spread low-entropy inputs.
    std::uint64_t h = 0xcbf29ce484222325ULL ^ key;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

std::vector<std::size_t> gram_positions(std::string_view gram, const StringEncoderParams& params) {
    params.validate();
    const std::uint64_t h1 = keyed_hash(gram, params.seed);
    const std::uint64_t h2 = keyed_hash(gram, params.seed ^ 0x5bd1e9955bd1e995ULL) | 1U;
    std::vector<std::size_t> pos(params.num_hashes);
    for (std::size_t k = 0; k < params.num_hashes; ++k) {
        pos[k] = static_cast<std::size_t>((h1 + k * h2) % params.width);
    }
    return pos;
}

BloomFilter encode_string(std::string_view s, const StringEncoderParams& params) {
    params.validate();
    BloomFilter f(params.width);
    for (const auto& g : qgrams(s, params.q))
        for (std::size_t p : gram_positions(g, params)) f.set(p);
    return f;
}

std::size_t hamming_distance(const BloomFilter& a, const BloomFilter& b) {
    if (a.width() != b.width()) {
        throw InputError("hamming distance between widths " + std::to_string(a.width()) + " and " +
                         std::to_string(b.width()));
    }
    std::size_t d = 0;
    auto wa = a.words();
    auto wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    return d;
}

double ones_concentration(std::span<const BloomFilter> filters, double epsilon) {
    if (filters.empty()) throw InputError("ones_concentration needs at least one filter");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputError("epsilon must lie in (0, 1)");
    double mean = 0.0;
    for (const auto& f : filters) mean += static_cast<double>(f.popcount());
    mean /= static_cast<double>(filters.size());
    const double cutoff = (1.0 - epsilon) * mean;
    std::size_t below = 0;
    for (const auto& f : filters)
        if (static_cast<double>(f.popcount()) <= cutoff) ++below;
    return static_cast<double>(below) / static_cast<double>(filters.size());
}

}  // namespace fedsim::pprl
