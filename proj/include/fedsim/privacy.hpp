#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "fedsim/pprl.hpp"

namespace fedsim::privacy {

double erf(double x);

/// tau = erf(sqrt(sigma^2 + 1) / (2 sqrt(2) sigma sigma0)): bound on the
/// probability that a greedy MAP attacker recovers a party-B bloom filter.
double tau_from_sigma(double sigma, double sigma0);

/// Infimum of tau over sigma for a fixed sigma0 (the sigma -> infinity limit).
double tau_floor(double sigma0);

/// Inverts tau_from_sigma by bisection. Feasible window: tau_floor(sigma0) < tau < 1.
double sigma_from_tau(double tau, double sigma0);

struct PrivacyBudget {
    double tau = 0.0;
    double sigma = 0.0;
    double sigma0 = 0.0;

    static PrivacyBudget from_sigma(double sigma, double sigma0);
    static PrivacyBudget from_tau(double tau, double sigma0);
};

/// MAP estimate of the raw similarity under a N(0, 1) prior and N(rho, sigma^2)
/// observation noise. The posterior is N(s / (sigma^2 + 1), sigma^2 / (sigma^2 + 1)).
double map_estimate(double s, double sigma);

/// Everything the attacker (party A) is assumed to know about one party-B
/// filter: its own filters k^A_i, the perturbed similarities s_ij, and the
/// coordinator's scaling parameters.
struct AttackInstance {
    std::vector<pprl::BloomFilter> known_filters;
    std::vector<double> similarities;
    double mu0 = 0.0;
    double sigma0 = 1.0;
    double sigma = 0.0;
    std::size_t width = 0;
    // Required when width > kMaxEnumerationWidth.
    std::optional<std::vector<pprl::BloomFilter>> candidates;

    void validate() const;
};

inline constexpr std::size_t kMaxEnumerationWidth = 20;

/// Step 2 of the attack: u_hat = -sigma0 * rho_hat - mu0, rounded to the
/// nearest integer and clamped to [0, width].
std::vector<std::size_t> predicted_distances(const AttackInstance& instance);

/// All filters consistent with every predicted distance.
std::vector<pprl::BloomFilter> consistent_candidates(const AttackInstance& instance);

/// Uniform pick among the consistent candidates; uniform over the full
/// filter space when none is consistent.
pprl::BloomFilter greedy_attack(const AttackInstance& instance, std::mt19937_64& rng);

struct SuccessEstimate {
    std::size_t successes = 0;
    std::size_t trials = 0;
    double rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;

    /// Binomial standard error evaluated at probability p.
    static double standard_error(double p, std::size_t trials);
};

/// Wilson score interval for `successes` out of `trials` at normal quantile z.
SuccessEstimate wilson(std::size_t successes, std::size_t trials, double z);

inline constexpr double kZ99 = 2.5758293035489004;
inline constexpr double kZ95 = 1.959963984540054;

/// How the simulated population of filters and distances is produced.
///
/// uniform_filters: target and known filters are uniform over {0,1}^N, so the
///   Hamming distances are Binomial(N, 1/2); mu0 = -N/2 and sigma0 = sqrt(N)/2,
///   which standardizes rho exactly as the coordinator would.
/// declared_scale: same filters, but the coordinator normalizes with the
///   supplied sigma0 (mu0 = -N/2). Used when a budget is only feasible for a
///   scale larger than the population spread.
enum class DistanceGenerator { uniform_filters, declared_scale };

std::string_view to_string(DistanceGenerator g);

struct AttackAuditConfig {
    std::size_t trials = 10000;
    std::size_t width = 12;
    std::size_t known = 1;
    double sigma = 1.0;
    DistanceGenerator generator = DistanceGenerator::uniform_filters;
    double declared_sigma0 = 0.0;
    std::uint64_t seed = 0;

    double mu0() const;
    double sigma0() const;
};

struct AttackAuditResult {
    SuccessEstimate filter_recovered;
    // Trials where every predicted distance was exactly right.
    SuccessEstimate all_distances_correct;
    double tau = 0.0;
    double mu0 = 0.0;
    double sigma0 = 0.0;
};

/// Monte-Carlo success rate of greedy_attack. Trial t uses seed + t.
AttackAuditResult empirical_attack_success(const AttackAuditConfig& config);

/// Per-pair check of the erf factor: rho ~ N(0, 1), s = rho + N(0, sigma^2);
/// success when the MAP-predicted distance lies within 1/2 of the true
/// distance sigma0 * rho + mu0.
SuccessEstimate per_pair_distance_success(std::size_t trials, double sigma, double sigma0, std::uint64_t seed);

/// Upper bound on disclosed filters among n records: tau * n.
double expected_disclosures(double tau, std::size_t n_records);

}  // namespace fedsim::privacy
