#include <doctest.h>

#include <cmath>
#include <random>

#include "fedsim/error.hpp"
#include "fedsim/pprl.hpp"
#include "fedsim/privacy.hpp"

using namespace fedsim;
using namespace fedsim::privacy;
using fedsim::pprl::BloomFilter;

namespace {

// Maclaurin series summed until the terms stop contributing.
double series_erf(double x) {
    double term = x, sum = x;
    for (int n = 1; n < 200; ++n) {
        term *= -x * x / n;
        const double add = term / (2 * n + 1);
        sum += add;
        if (std::abs(add) < 1e-18) break;
    }
    return 2.0 / std::sqrt(M_PI) * sum;
}

}  // namespace

TEST_CASE("erf") {
    CHECK(privacy::erf(0.0) == 0.0);
    CHECK(series_erf(1.0) == doctest::Approx(0.8427007929).epsilon(1e-9));
    CHECK(std::abs(privacy::erf(1.0) - 0.8427007929) < 1e-9);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng);
        CHECK(privacy::erf(-x) == -privacy::erf(x));
        CHECK(std::abs(privacy::erf(x) - series_erf(x)) < 1e-12);
        CHECK(std::abs(privacy::erf(x)) < 1.0);
    }
}

TEST_CASE("tau_from_sigma") {
    const double tau = tau_from_sigma(0.4, 21178.86);
    CHECK(std::abs(tau - 5.1e-5) / 5.1e-5 < 0.02);
    CHECK(tau_from_sigma(1.0, 1.0) == doctest::Approx(series_erf(0.5)).epsilon(1e-12));
    CHECK(tau_floor(1.0) == doctest::Approx(series_erf(1.0 / (2.0 * std::sqrt(2.0)))).epsilon(1e-12));
    CHECK(tau_from_sigma(1e8, 1.0) == doctest::Approx(tau_floor(1.0)).epsilon(1e-9));
    CHECK_THROWS_AS(tau_from_sigma(0.0, 1.0), InputError);
    CHECK_THROWS_AS(tau_from_sigma(1.0, -1.0), InputError);

    // strictly decreasing in sigma and in sigma0 over log grids
    for (double s0 : {0.5, 2.0, 10.0, 100.0}) {
        double prev = 2.0;
        for (double e = -2.0; e <= 2.0; e += 0.25) {
            const double t = tau_from_sigma(std::pow(10.0, e), s0);
            if (prev < 1.0) CHECK(t < prev);
            prev = t;
        }
    }
    for (double s : {0.1, 0.4, 1.0, 5.0}) {
        double prev = 2.0;
        for (double e = -1.0; e <= 3.0; e += 0.25) {
            const double t = tau_from_sigma(s, std::pow(10.0, e));
            if (prev < 1.0) CHECK(t < prev);
            prev = t;
        }
    }
}

TEST_CASE("sigma_from_tau") {
    CHECK(sigma_from_tau(tau_from_sigma(0.4, 21178.86), 21178.86) == doctest::Approx(0.4).epsilon(1e-6));
    CHECK_THROWS_AS(sigma_from_tau(1.0, 1.0), InfeasibleBudgetError);
    CHECK_THROWS_AS(sigma_from_tau(tau_floor(1.0) * 0.99, 1.0), InfeasibleBudgetError);
    for (double s0 : {1.0, 3.0, 50.0})
        for (double s : {0.3, 1.0, 4.0}) {
            const double t = tau_from_sigma(s, s0);
            const double back = sigma_from_tau(t, s0);
            CHECK(std::abs(tau_from_sigma(back, s0) - t) < 1e-10);
            CHECK(back == doctest::Approx(s).epsilon(1e-6));
        }
    const auto b = PrivacyBudget::from_tau(0.3, 2.0);
    CHECK(std::abs(b.tau - tau_from_sigma(b.sigma, b.sigma0)) < 1e-10);
}

TEST_CASE("map estimate") {
    CHECK(map_estimate(0.0, 0.7) == 0.0);
    CHECK(map_estimate(1.3, 0.0) == 1.3);
    CHECK(map_estimate(1.16, 0.4) == doctest::Approx(1.0));
}

TEST_CASE("greedy attack: noiseless exact distances and singleton constraint set") {
    std::mt19937_64 rng(3);
    const std::size_t n = 4;
    const double mu0 = -2.0, sigma0 = 1.0;
    for (int trial = 0; trial < 50; ++trial) {
        BloomFilter known = BloomFilter::from_word(rng() & 0xF, n), target = BloomFilter::from_word(rng() & 0xF, n);
        const double u = static_cast<double>(pprl::hamming_distance(known, target));
        AttackInstance inst;
        inst.known_filters = {known};
        inst.similarities = {(-u - mu0) / sigma0};
        inst.mu0 = mu0;
        inst.sigma0 = sigma0;
        inst.sigma = 0.0;
        inst.width = n;
        CHECK(predicted_distances(inst)[0] == static_cast<std::size_t>(u));
        for (const auto& c : consistent_candidates(inst)) CHECK(pprl::hamming_distance(c, known) == u);
    }

    // Distance 0 to a known filter pins the target.
    BloomFilter truth = BloomFilter::from_bits("1011");
    AttackInstance inst;
    inst.known_filters = {truth};
    inst.similarities = {2.0};
    inst.mu0 = -2.0;
    inst.sigma0 = 1.0;
    inst.width = 4;
    CHECK(consistent_candidates(inst).size() == 1);
    for (int t = 0; t < 20; ++t) CHECK(greedy_attack(inst, rng) == truth);

    inst.width = 32;
    inst.known_filters = {BloomFilter(32)};
    CHECK_THROWS_AS(greedy_attack(inst, rng), CapacityError);
}

TEST_CASE("empirical attack success") {
    AttackAuditConfig c;
    c.trials = 0;
    CHECK_THROWS_AS(empirical_attack_success(c), ConfigError);

    // Huge noise: the attacker is no better than guessing in a 2^N space.
    c.trials = 4000;
    c.width = 6;
    c.known = 1;
    c.sigma = 1e6;
    c.seed = 5;
    const auto r = empirical_attack_success(c);
    CHECK(r.filter_recovered.ci_low <= 1.0 / 64.0 + 0.01);

    // Bound holds on a small instance with a declared scale.
    c.width = 12;
    c.known = 3;
    c.generator = DistanceGenerator::declared_scale;
    c.declared_sigma0 = 10.0;
    c.sigma = sigma_from_tau(0.05, 10.0);
    c.trials = 2000;
    const auto b = empirical_attack_success(c);
    CHECK(b.filter_recovered.rate <= 0.05 + 3.0 * SuccessEstimate::standard_error(0.05, c.trials));
}

TEST_CASE("per-pair distance success matches the erf factor") {
    const std::size_t trials = 20000;
    for (double s0 : {2.0, 10.0}) {
        const double sigma = 0.4;
        const auto est = per_pair_distance_success(trials, sigma, s0, 11);
        const double tau = tau_from_sigma(sigma, s0);
        const double half = kZ99 * SuccessEstimate::standard_error(tau, trials);
        CHECK(std::abs(est.rate - tau) <= half);
    }
    CHECK_THROWS_AS(per_pair_distance_success(0, 0.4, 2.0, 1), ConfigError);
}

TEST_CASE("wilson interval and disclosures") {
    const auto w = wilson(50, 100, kZ95);
    CHECK(w.rate == 0.5);
    CHECK(w.ci_low < 0.5);
    CHECK(w.ci_high > 0.5);
    CHECK(w.ci_high - 0.5 == doctest::Approx(0.5 - w.ci_low));
    CHECK_THROWS_AS(wilson(0, 0, kZ95), InputError);

    CHECK(expected_disclosures(5.1e-5, 19479) == doctest::Approx(0.993).epsilon(0.01));
    CHECK(expected_disclosures(tau_from_sigma(0.4, 21178.86), 19479) == doctest::Approx(0.988).epsilon(0.01));
    CHECK(expected_disclosures(0.3, 0) == 0.0);
    CHECK(expected_disclosures(0.5, 10) == 5.0);
}
