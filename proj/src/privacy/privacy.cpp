#include "fedsim/privacy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim::privacy {

namespace {

constexpr double kTwoSqrtTwo = 2.8284271247461903;

}  // namespace

double erf(double x) { return std::erf(x); }

double tau_from_sigma(double sigma, double sigma0) {
    if (!(sigma > 0.0) || !(sigma0 > 0.0)) throw InputError("tau_from_sigma needs sigma > 0 and sigma0 > 0");
    return erf(std::sqrt(sigma * sigma + 1.0) / (kTwoSqrtTwo * sigma * sigma0));
}

double tau_floor(double sigma0) {
    if (!(sigma0 > 0.0)) throw InputError("sigma0 must be positive");
    return erf(1.0 / (kTwoSqrtTwo * sigma0));
}

double sigma_from_tau(double tau, double sigma0) {
    const double floor = tau_floor(sigma0);
    if (!(tau > floor && tau < 1.0)) {
        throw InfeasibleBudgetError("tau = " + std::to_string(tau) + " is outside the feasible window (" +
                                    std::to_string(floor) + ", 1) for sigma0 = " + std::to_string(sigma0));
    }
    double lo = 1e-3, hi = 1.0;
    while (tau_from_sigma(lo, sigma0) <= tau) {
        lo *= 0.5;
        if (lo < 1e-300) throw InfeasibleBudgetError("tau too close to 1 to resolve a noise scale");
    }
    while (tau_from_sigma(hi, sigma0) >= tau) {
        hi *= 2.0;
        if (hi > 1e300) throw InfeasibleBudgetError("tau too close to the sigma -> infinity floor");
    }
    // tau_from_sigma is strictly decreasing in sigma; bisect in log space.
    for (int it = 0; it < 2000; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double t = tau_from_sigma(mid, sigma0);
        if (t > tau) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi / lo - 1.0 < 1e-15) break;
    }
    const double a = tau_from_sigma(lo, sigma0) - tau;
    const double b = tau - tau_from_sigma(hi, sigma0);
    return a < b ? lo : hi;
}

PrivacyBudget PrivacyBudget::from_sigma(double sigma, double sigma0) {
    return {tau_from_sigma(sigma, sigma0), sigma, sigma0};
}

PrivacyBudget PrivacyBudget::from_tau(double tau, double sigma0) { return {tau, sigma_from_tau(tau, sigma0), sigma0}; }

double map_estimate(double s, double sigma) {
    if (!(sigma >= 0.0)) throw InputError("sigma must be non-negative");
    return s / (sigma * sigma + 1.0);
}

void AttackInstance::validate() const {
    if (known_filters.empty()) throw InputError("attack needs at least one known filter");
    if (known_filters.size() != similarities.size()) throw InputError("one similarity per known filter is required");
    if (width == 0) throw InputError("filter width must be positive");
    for (const auto& f : known_filters)
        if (f.width() != width) throw InputError("known filters must share the attack width");
    if (!(sigma0 > 0.0)) throw InputError("sigma0 must be positive");
    if (width > kMaxEnumerationWidth && !candidates) {
        throw CapacityError("cannot enumerate 2^" + std::to_string(width) +
                            " filters; supply a candidate sample for widths above " +
                            std::to_string(kMaxEnumerationWidth));
    }
    if (candidates) {
        for (const auto& c : *candidates)
            if (c.width() != width) throw InputError("candidate filters must share the attack width");
    }
}

std::vector<std::size_t> predicted_distances(const AttackInstance& instance) {
    std::vector<std::size_t> out;
    out.reserve(instance.similarities.size());
    const double n = static_cast<double>(instance.width);
    for (double s : instance.similarities) {
        const double rho_hat = map_estimate(s, instance.sigma);
        // Distance form of the scaled-back estimate; the negative-distance form
        // sigma0 * rho_hat + mu0 is the same quantity with the sign flipped.
        const double u_hat = -instance.sigma0 * rho_hat - instance.mu0;
        const double r = std::clamp(std::nearbyint(u_hat), 0.0, n);
        out.push_back(static_cast<std::size_t>(r));
    }
    return out;
}

namespace {

std::uint64_t low_word(const pprl::BloomFilter& f) { return f.words()[0]; }

bool consistent(const pprl::BloomFilter& cand, const AttackInstance& inst, const std::vector<std::size_t>& dist) {
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (pprl::hamming_distance(cand, inst.known_filters[i]) != dist[i]) return false;
    return true;
}

pprl::BloomFilter uniform_filter(std::size_t width, std::mt19937_64& rng) {
    pprl::BloomFilter f(width);
    std::bernoulli_distribution bit(0.5);
    for (std::size_t i = 0; i < width; ++i)
        if (bit(rng)) f.set(i);
    return f;
}

}  // namespace

std::vector<pprl::BloomFilter> consistent_candidates(const AttackInstance& instance) {
    instance.validate();
    const auto dist = predicted_distances(instance);
    std::vector<pprl::BloomFilter> out;
    if (instance.candidates) {
        for (const auto& c : *instance.candidates)
            if (consistent(c, instance, dist)) out.push_back(c);
        return out;
    }
    std::vector<std::uint64_t> known;
    for (const auto& f : instance.known_filters) known.push_back(low_word(f));
    const std::uint64_t space = std::uint64_t{1} << instance.width;
    for (std::uint64_t w = 0; w < space; ++w) {
        bool ok = true;
        for (std::size_t i = 0; i < known.size() && ok; ++i)
            ok = static_cast<std::size_t>(std::popcount(w ^ known[i])) == dist[i];
        if (ok) out.push_back(pprl::BloomFilter::from_word(w, instance.width));
    }
    return out;
}

pprl::BloomFilter greedy_attack(const AttackInstance& instance, std::mt19937_64& rng) {
    auto cands = consistent_candidates(instance);
    if (cands.empty()) return uniform_filter(instance.width, rng);
    std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
    return cands[pick(rng)];
}

double SuccessEstimate::standard_error(double p, std::size_t trials) {
    if (trials == 0) throw InputError("standard error of zero trials");
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

SuccessEstimate wilson(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) throw InputError("need at least one trial");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {successes, trials, p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::string_view to_string(DistanceGenerator g) {
    return g == DistanceGenerator::uniform_filters ? "uniform_filters" : "declared_scale";
}

double AttackAuditConfig::mu0() const { return -static_cast<double>(width) / 2.0; }

double AttackAuditConfig::sigma0() const {
    if (generator == DistanceGenerator::declared_scale) {
        if (!(declared_sigma0 > 0.0)) throw ConfigError("declared_scale generator needs declared_sigma0 > 0");
        return declared_sigma0;
    }
    return std::sqrt(static_cast<double>(width)) / 2.0;
}

AttackAuditResult empirical_attack_success(const AttackAuditConfig& config) {
    if (config.trials == 0) throw ConfigError("attack audit needs at least one trial");
    if (config.known == 0) throw ConfigError("attack audit needs |S| >= 1");
    if (config.width == 0 || config.width > kMaxEnumerationWidth) {
        throw CapacityError("attack audit enumerates the filter space; width must lie in [1, " +
                            std::to_string(kMaxEnumerationWidth) + "]");
    }
    if (!(config.sigma > 0.0)) throw ConfigError("attack audit needs sigma > 0");
    const double mu0 = config.mu0();
    const double sigma0 = config.sigma0();

    std::size_t recovered = 0, distances_ok = 0;
    for (std::size_t t = 0; t < config.trials; ++t) {
        std::mt19937_64 rng(config.seed + t);
        std::normal_distribution<double> noise(0.0, config.sigma);
        const pprl::BloomFilter target = uniform_filter(config.width, rng);
        AttackInstance inst;
        inst.mu0 = mu0;
        inst.sigma0 = sigma0;
        inst.sigma = config.sigma;
        inst.width = config.width;
        std::vector<std::size_t> truth;
        for (std::size_t i = 0; i < config.known; ++i) {
            pprl::BloomFilter ka = uniform_filter(config.width, rng);
            const double d = static_cast<double>(pprl::hamming_distance(ka, target));
            const double rho = (-d - mu0) / sigma0;
            inst.similarities.push_back(rho + noise(rng));
            inst.known_filters.push_back(std::move(ka));
            truth.push_back(static_cast<std::size_t>(d));
        }
        if (predicted_distances(inst) == truth) ++distances_ok;
        if (greedy_attack(inst, rng) == target) ++recovered;
    }
    AttackAuditResult r;
    r.filter_recovered = wilson(recovered, config.trials, kZ99);
    r.all_distances_correct = wilson(distances_ok, config.trials, kZ99);
    r.tau = tau_from_sigma(config.sigma, sigma0);
    r.mu0 = mu0;
    r.sigma0 = sigma0;
    return r;
}

SuccessEstimate per_pair_distance_success(std::size_t trials, double sigma, double sigma0, std::uint64_t seed) {
    if (trials == 0) throw ConfigError("need at least one trial");
    if (!(sigma > 0.0) || !(sigma0 > 0.0)) throw InputError("sigma and sigma0 must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> prior(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, sigma);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const double rho = prior(rng);
        const double s = rho + noise(rng);
        const double predicted = sigma0 * map_estimate(s, sigma);
        const double actual = sigma0 * rho;
        // mu0 cancels in the difference.
        if (std::abs(predicted - actual) <= 0.5) ++hits;
    }
    return wilson(hits, trials, kZ99);
}

double expected_disclosures(double tau, std::size_t n_records) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InputError("tau must lie in [0, 1]");
    return tau * static_cast<double>(n_records);
}

}  // namespace fedsim::privacy
