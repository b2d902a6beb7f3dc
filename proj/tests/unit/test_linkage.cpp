#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "fedsim/error.hpp"
#include "fedsim/linkage.hpp"

using namespace fedsim;
using namespace fedsim::linkage;
using fedsim::nn::Tensor;

namespace {

Tensor random_points(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t({n, d});
    for (double& v : t.data()) v = u(rng);
    return t;
}

std::size_t dp_levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1, dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return dp[a.size()][b.size()];
}

NeighborTable table_from_distances(std::vector<double> d) {
    NeighborTable t;
    t.a_rows = d.size();
    t.b_rows = d.size();
    t.k = 1;
    t.neighbors.resize(d.size());
    std::iota(t.neighbors.begin(), t.neighbors.end(), 0);
    t.distances = std::move(d);
    return t;
}

}  // namespace

TEST_CASE("distances") {
    const double a[] = {0, 0}, b[] = {3, 4};
    CHECK(euclidean_distance(a, b) == 5.0);
    CHECK(levenshtein_distance("kitten", "sitting") == 3);
    CHECK(levenshtein_distance("kitten", "kitten") == 0);
    std::mt19937_64 rng(2);
    const std::string alphabet = "abcd";
    for (int t = 0; t < 100; ++t) {
        std::string x, y;
        for (std::size_t i = rng() % 9; i > 0; --i) x += alphabet[rng() % 4];
        for (std::size_t i = rng() % 9; i > 0; --i) y += alphabet[rng() % 4];
        CHECK(levenshtein_distance(x, y) == dp_levenshtein(x, y));
    }
    auto nums = IdentifierColumn::numeric(Tensor::matrix(1, 2, {0, 0}));
    auto strs = IdentifierColumn::strings({"x"});
    CHECK_THROWS_AS(distance(Metric::euclidean, nums, 0, strs, 0), InputError);
    CHECK_THROWS_AS(parse_metric("cosine"), ConfigError);
}

TEST_CASE("top_k_neighbors: self match, full B, brute-force oracle") {
    std::mt19937_64 rng(4);
    Tensor b = random_points(8, 3, rng);
    Tensor a({3, 3});
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) a(r, c) = b(r + 2, c);
    auto ca = IdentifierColumn::numeric(a), cb = IdentifierColumn::numeric(b);
    auto t = top_k_neighbors(ca, cb, Metric::euclidean, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(t.distance(i, 0) == 0.0);
        CHECK(t.neighbor(i, 0) == i + 2);
    }
    auto full = top_k_neighbors(ca, cb, Metric::euclidean, 8);
    for (std::size_t i = 0; i < 3; ++i) {
        std::set<std::size_t> all(full.neighbors.begin() + i * 8, full.neighbors.begin() + (i + 1) * 8);
        CHECK(all.size() == 8);
    }
    CHECK_THROWS_AS(top_k_neighbors(ca, cb, Metric::euclidean, 9), ConfigError);

    for (auto [m, n, k] : {std::tuple{50, 80, 5}, std::tuple{200, 120, 7}, std::tuple{13, 13, 13}}) {
        Tensor pa = random_points(m, 2, rng), pb = random_points(n, 2, rng);
        // round to a coarse grid so ties actually occur
        for (double& v : pa.data()) v = std::round(v * 4) / 4;
        for (double& v : pb.data()) v = std::round(v * 4) / 4;
        auto tab = top_k_neighbors(IdentifierColumn::numeric(pa), IdentifierColumn::numeric(pb), Metric::euclidean, k);
        for (int i = 0; i < m; ++i) {
            std::vector<std::pair<double, std::size_t>> scan;
            for (int j = 0; j < n; ++j) {
                const double dx = pa(i, 0) - pb(j, 0), dy = pa(i, 1) - pb(j, 1);
                scan.emplace_back(std::sqrt(dx * dx + dy * dy), j);
            }
            std::sort(scan.begin(), scan.end());
            for (int r = 0; r < k; ++r) {
                CHECK(tab.neighbor(i, r) == scan[r].second);
                CHECK(tab.distance(i, r) == doctest::Approx(scan[r].first).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("normalize_similarities") {
    auto t = table_from_distances({1, 2, 3});
    normalize_similarities(t);
    CHECK(t.mu0 == doctest::Approx(-2.0));
    CHECK(t.sigma0 == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(t.similarities[0] == doctest::Approx(1.2247448714));
    CHECK(t.similarities[1] == doctest::Approx(0.0));
    CHECK(t.similarities[2] == doctest::Approx(-1.2247448714));

    auto shifted = table_from_distances({11, 12, 13});
    normalize_similarities(shifted);
    for (int i = 0; i < 3; ++i) CHECK(shifted.similarities[i] == doctest::Approx(t.similarities[i]));

    auto flat = table_from_distances({2, 2, 2});
    CHECK_THROWS_AS(normalize_similarities(flat), DegenerateLinkageError);

    std::mt19937_64 rng(5);
    auto big = top_k_neighbors(IdentifierColumn::numeric(random_points(60, 3, rng)),
                               IdentifierColumn::numeric(random_points(90, 3, rng)), Metric::euclidean, 6);
    normalize_similarities(big);
    double mean = 0, sq = 0;
    for (double s : big.similarities) mean += s;
    mean /= static_cast<double>(big.similarities.size());
    for (double s : big.similarities) sq += (s - mean) * (s - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(sq / static_cast<double>(big.similarities.size())) - 1.0) < 1e-9);
    for (std::size_t e = 0; e < big.distances.size(); ++e)
        for (std::size_t f = 0; f < big.distances.size(); f += 37)
            if (big.distances[e] < big.distances[f]) CHECK(big.similarities[e] > big.similarities[f]);
}

TEST_CASE("perturb_similarities") {
    auto t = table_from_distances({1, 2, 3});
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(perturb_similarities(t, 0.1, rng), StateError);
    CHECK_THROWS_AS(party_a_view(t), StateError);
    normalize_similarities(t);
    CHECK_THROWS_AS(perturb_similarities(t, -1.0, rng), InputError);
    perturb_similarities(t, 0.0, rng);
    CHECK(t.perturbed == t.similarities);

    std::vector<double> d(100000);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (double& v : d) v = u(rng);
    auto big = table_from_distances(d);
    normalize_similarities(big);
    std::mt19937_64 noise(77);
    perturb_similarities(big, 0.4, noise);
    double mean = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) mean += big.perturbed[i] - big.similarities[i];
    mean /= static_cast<double>(d.size());
    double var = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double e = big.perturbed[i] - big.similarities[i] - mean;
        var += e * e;
    }
    var /= static_cast<double>(d.size() - 1);
    CHECK(std::abs(mean) < 3.0 * 0.4 / std::sqrt(1e5));
    CHECK(std::abs(var - 0.16) < 0.16 * 0.05);

    auto view = party_a_view(big);
    CHECK(view.values == big.perturbed);
    CHECK(view.neighbors == big.neighbors);
}

TEST_CASE("align: coverage, order, round trip") {
    std::mt19937_64 rng(6);
    const std::size_t m = 7, n = 9, k = 3;
    Tensor ka = random_points(m, 2, rng), kb = random_points(n, 2, rng);
    Tensor fa = random_points(m, 2, rng), fb = random_points(n, 4, rng);
    Tensor labels({m, 1});
    for (std::size_t i = 0; i < m; ++i) labels(i, 0) = static_cast<double>(i);
    PartyAView a(fa, labels, IdentifierColumn::numeric(ka));
    PartyBView b(fb, IdentifierColumn::numeric(kb));
    auto t = top_k_neighbors(a.identifiers(), b.identifiers(), Metric::euclidean, k);
    normalize_similarities(t);
    CHECK_THROWS_AS(align(a, b, t, 2), StateError);
    perturb_similarities(t, 0.3, rng);
    CHECK_THROWS_AS(align(a, b, t, 0), ConfigError);

    auto single = collect(align(a, b, t, m));
    REQUIRE(single.size() == 1);
    for (std::size_t i = 0; i < m; ++i) CHECK(single[0].a.rows[i] == i);

    std::set<std::tuple<std::size_t, std::size_t, double>> seen, want;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r) want.emplace(i, t.neighbor(i, r), t.perturbed[i * k + r]);
    auto batches = collect(align(a, b, t, 3));
    CHECK(batches.size() == 3);
    for (const auto& batch : batches) {
        CHECK(batch.b.features.rows() == batch.size() * k);
        CHECK(batch.a.similarities.rows() == batch.size() * k);
        for (std::size_t r = 0; r < batch.size(); ++r) {
            const std::size_t i = batch.a.rows[r];
            CHECK(batch.a.labels(r, 0) == static_cast<double>(i));
            CHECK(batch.a.features(r, 1) == fa(i, 1));
            for (std::size_t q = 0; q < k; ++q) {
                const std::size_t j = batch.b.rows[r * k + q];
                CHECK(batch.b.features(r * k + q, 3) == fb(j, 3));
                seen.emplace(i, j, batch.a.similarities(r * k + q, 0));
            }
        }
    }
    CHECK(seen == want);

    auto t1 = t.truncated(1);
    auto one = collect(align(a, b, t1, m));
    for (std::size_t i = 0; i < m; ++i) CHECK(one[0].b.rows[i] == t.neighbor(i, 0));

    auto bad = t;
    bad.neighbors[4] = n + 3;
    CHECK_THROWS_AS(bad.validate(), CorruptionError);
}

TEST_CASE("neighbor table CSV round trip") {
    std::mt19937_64 rng(9);
    auto t = top_k_neighbors(IdentifierColumn::numeric(random_points(5, 2, rng)),
                             IdentifierColumn::numeric(random_points(6, 2, rng)), Metric::euclidean, 2);
    normalize_similarities(t);
    perturb_similarities(t, 0.25, rng);
    const auto dir = std::filesystem::temp_directory_path() / "fedsim_linkage_test";
    std::filesystem::create_directories(dir);
    const auto csv = dir / "table.csv";
    write_table(t, csv);
    auto r = read_table(csv);
    CHECK(r.k == 2);
    CHECK(r.a_rows == 5);
    CHECK(r.neighbors == t.neighbors);
    CHECK(r.distances == t.distances);
    CHECK(r.perturbed == t.perturbed);
    CHECK(r.sigma0 == t.sigma0);
    CHECK(r.sigma == t.sigma);
    std::filesystem::remove_all(dir);
}
