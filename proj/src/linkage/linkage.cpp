#include "fedsim/linkage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fedsim/error.hpp"

namespace fedsim::linkage {

Metric parse_metric(std::string_view name) {
    if (name == "euclidean") return Metric::euclidean;
    if (name == "levenshtein") return Metric::levenshtein;
    if (name == "hamming") return Metric::hamming;
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::euclidean: return "euclidean";
        case Metric::levenshtein: return "levenshtein";
        case Metric::hamming: return "hamming";
    }
    return "?";
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("euclidean distance between vectors of different length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::size_t levenshtein_distance(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i + 1;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const std::size_t up = row[j + 1];
            row[j + 1] = std::min({up + 1, row[j] + 1, diag + (a[i] == b[j] ? 0U : 1U)});
            diag = up;
        }
    }
    return row[b.size()];
}

namespace {

IdentifierKind required_kind(Metric m) {
    switch (m) {
        case Metric::euclidean: return IdentifierKind::numeric;
        case Metric::levenshtein: return IdentifierKind::string;
        case Metric::hamming: return IdentifierKind::bloom;
    }
    return IdentifierKind::numeric;
}

void check_kinds(Metric metric, const IdentifierColumn& a, const IdentifierColumn& b) {
    const IdentifierKind want = required_kind(metric);
    if (a.kind() != want || b.kind() != want) {
        throw InputError(std::string(to_string(metric)) + " distance needs " + std::string(to_string(want)) +
                         " identifiers, got " + std::string(to_string(a.kind())) + "/" +
                         std::string(to_string(b.kind())));
    }
    if (want == IdentifierKind::numeric && a.size() > 0 && b.size() > 0 &&
        a.numeric_values().cols() != b.numeric_values().cols()) {
        throw InputError("numeric identifiers of different dimensionality");
    }
}

}  // namespace

double distance(Metric metric, const IdentifierColumn& a, std::size_t i, const IdentifierColumn& b, std::size_t j) {
    check_kinds(metric, a, b);
    if (i >= a.size() || j >= b.size()) throw InputError("identifier index out of range");
    switch (metric) {
        case Metric::euclidean: return euclidean_distance(a.numeric_values().row(i), b.numeric_values().row(j));
        case Metric::levenshtein:
            return static_cast<double>(levenshtein_distance(a.string_values()[i], b.string_values()[j]));
        case Metric::hamming: return static_cast<double>(pprl::hamming_distance(a.bloom_values()[i], b.bloom_values()[j]));
    }
    return 0.0;
}

NeighborTable NeighborTable::truncated(std::size_t k_new) const {
    if (k_new == 0 || k_new > k) throw ConfigError("cannot truncate a K=" + std::to_string(k) + " table to " + std::to_string(k_new));
    NeighborTable out;
    out.a_rows = a_rows;
    out.b_rows = b_rows;
    out.k = k_new;
    out.mu0 = mu0;
    out.sigma0 = sigma0;
    out.sigma = sigma;
    auto take = [&](const auto& src, auto& dst) {
        if (src.empty()) return;
        dst.reserve(a_rows * k_new);
        for (std::size_t i = 0; i < a_rows; ++i)
            for (std::size_t r = 0; r < k_new; ++r) dst.push_back(src[i * k + r]);
    };
    take(neighbors, out.neighbors);
    take(distances, out.distances);
    take(similarities, out.similarities);
    take(perturbed, out.perturbed);
    return out;
}

void NeighborTable::validate() const {
    const std::size_t n = a_rows * k;
    if (neighbors.size() != n || distances.size() != n) throw CorruptionError("neighbor table size mismatch");
    if (!similarities.empty() && similarities.size() != n) throw CorruptionError("similarity vector size mismatch");
    if (!perturbed.empty() && perturbed.size() != n) throw CorruptionError("perturbed similarity size mismatch");
    for (std::size_t j : neighbors)
        if (j >= b_rows) throw CorruptionError("neighbor index " + std::to_string(j) + " out of range");
}

NeighborTable top_k_neighbors(const IdentifierColumn& a, const IdentifierColumn& b, Metric metric, std::size_t k) {
    check_kinds(metric, a, b);
    if (k == 0) throw ConfigError("K must be at least 1");
    if (k > b.size()) {
        throw ConfigError("K = " + std::to_string(k) + " exceeds party B size " + std::to_string(b.size()));
    }
    NeighborTable t;
    t.a_rows = a.size();
    t.b_rows = b.size();
    t.k = k;
    t.neighbors.reserve(t.a_rows * k);
    t.distances.reserve(t.a_rows * k);
    std::vector<std::pair<double, std::size_t>> row(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) row[j] = {distance(metric, a, i, b, j), j};
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
        for (std::size_t r = 0; r < k; ++r) {
            t.distances.push_back(row[r].first);
            t.neighbors.push_back(row[r].second);
        }
    }
    return t;
}

void normalize_similarities(NeighborTable& table) {
    table.validate();
    if (table.distances.empty()) throw DegenerateLinkageError("no candidate distances to normalize");
    const double n = static_cast<double>(table.distances.size());
    double mean = 0.0;
    for (double d : table.distances) mean += -d;
    mean /= n;
    double var = 0.0;
    for (double d : table.distances) var += (-d - mean) * (-d - mean);
    var /= n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw DegenerateLinkageError("all candidate distances are equal; similarities cannot be standardized");
    }
    table.mu0 = mean;
    table.sigma0 = sd;
    table.similarities.resize(table.distances.size());
    for (std::size_t e = 0; e < table.distances.size(); ++e) table.similarities[e] = (-table.distances[e] - mean) / sd;
}

void perturb_similarities(NeighborTable& table, double sigma, std::mt19937_64& rng) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("noise scale sigma must be non-negative");
    if (!table.normalized()) throw StateError("perturb_similarities before normalize_similarities");
    table.sigma = sigma;
    table.perturbed = table.similarities;
    if (sigma == 0.0) return;
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& s : table.perturbed) s += noise(rng);
}

PerturbedSimilarities party_a_view(const NeighborTable& table) {
    if (!table.is_perturbed()) throw StateError("similarities have not been perturbed yet");
    return {table.k, table.neighbors, table.perturbed};
}

BatchStream::BatchStream(const PartyAView& a, const PartyBView& b, const NeighborTable& table,
                         std::vector<std::size_t> order, std::size_t batch_size)
    : a_(&a), b_(&b), table_(&table), order_(std::move(order)), batch_size_(batch_size) {
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    if (!table.is_perturbed()) throw StateError("alignment needs perturbed similarities");
    table.validate();
    if (table.a_rows != a.rows() || table.b_rows != b.rows()) {
        throw CorruptionError("neighbor table does not match the party views");
    }
    for (std::size_t i : order_)
        if (i >= a.rows()) throw CorruptionError("party-A row " + std::to_string(i) + " out of range");
}

std::size_t BatchStream::num_batches() const noexcept { return (order_.size() + batch_size_ - 1) / batch_size_; }

std::optional<AlignedBatch> BatchStream::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    const std::size_t n = end - cursor_;
    const std::size_t k = table_->k;
    const nn::Tensor& fa = a_->features();
    const nn::Tensor& ya = a_->labels();
    const nn::Tensor& fb = b_->features();

    AlignedBatch batch;
    batch.k = k;
    batch.a.rows.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), order_.begin() + static_cast<std::ptrdiff_t>(end));
    batch.a.features = nn::Tensor({n, fa.cols()});
    batch.a.labels = nn::Tensor({n, ya.cols()});
    batch.a.similarities = nn::Tensor({n * k, 1});
    batch.b.features = nn::Tensor({n * k, fb.cols()});
    batch.b.rows.reserve(n * k);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = batch.a.rows[r];
        std::copy(fa.row(i).begin(), fa.row(i).end(), batch.a.features.row(r).begin());
        std::copy(ya.row(i).begin(), ya.row(i).end(), batch.a.labels.row(r).begin());
        for (std::size_t rank = 0; rank < k; ++rank) {
            const std::size_t j = table_->neighbor(i, rank);
            if (j >= fb.rows()) throw CorruptionError("neighbor index " + std::to_string(j) + " out of range");
            batch.a.similarities[r * k + rank] = table_->perturbed[i * k + rank];
            batch.b.rows.push_back(j);
            std::copy(fb.row(j).begin(), fb.row(j).end(), batch.b.features.row(r * k + rank).begin());
        }
    }
    cursor_ = end;
    return batch;
}

BatchStream align(const PartyAView& a, const PartyBView& b, const NeighborTable& table, std::size_t batch_size) {
    std::vector<std::size_t> order(a.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    return BatchStream(a, b, table, std::move(order), batch_size);
}

std::vector<AlignedBatch> collect(BatchStream stream) {
    std::vector<AlignedBatch> out;
    while (auto b = stream.next()) out.push_back(std::move(*b));
    return out;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_table(const NeighborTable& table, const std::filesystem::path& csv) {
    table.validate();
    if (!table.is_perturbed()) throw StateError("only perturbed tables are persisted");
    std::ofstream out(csv);
    if (!out) throw InputError("cannot open " + csv.string() + " for writing");
    out << "a_idx,rank,b_idx,distance,similarity_perturbed\n";
    for (std::size_t i = 0; i < table.a_rows; ++i)
        for (std::size_t r = 0; r < table.k; ++r) {
            const std::size_t e = i * table.k + r;
            out << i << ',' << r << ',' << table.neighbors[e] << ',' << fmt_double(table.distances[e]) << ','
                << fmt_double(table.perturbed[e]) << '\n';
        }
    nlohmann::ordered_json meta;
    meta["mu0"] = table.mu0;
    meta["sigma0"] = table.sigma0;
    meta["sigma"] = table.sigma;
    meta["K"] = table.k;
    meta["a_rows"] = table.a_rows;
    meta["b_rows"] = table.b_rows;
    std::ofstream side(csv.string() + ".json");
    side << meta.dump(2) << '\n';
}

NeighborTable read_table(const std::filesystem::path& csv) {
    std::ifstream side(csv.string() + ".json");
    if (!side) throw InputError("missing sidecar " + csv.string() + ".json");
    const auto meta = nlohmann::json::parse(side);
    NeighborTable t;
    t.mu0 = meta.at("mu0").get<double>();
    t.sigma0 = meta.at("sigma0").get<double>();
    t.sigma = meta.at("sigma").get<double>();
    t.k = meta.at("K").get<std::size_t>();
    t.a_rows = meta.at("a_rows").get<std::size_t>();
    t.b_rows = meta.at("b_rows").get<std::size_t>();

    std::ifstream in(csv);
    if (!in) throw InputError("cannot open " + csv.string());
    std::string line;
    std::getline(in, line);
    if (line != "a_idx,rank,b_idx,distance,similarity_perturbed") throw InputError("unexpected neighbor table header");
    t.neighbors.assign(t.a_rows * t.k, 0);
    t.distances.assign(t.a_rows * t.k, 0.0);
    t.perturbed.assign(t.a_rows * t.k, 0.0);
    std::size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f[5];
        for (auto& s : f) std::getline(ss, s, ',');
        const std::size_t i = std::stoull(f[0]), r = std::stoull(f[1]);
        if (i >= t.a_rows || r >= t.k) throw CorruptionError("neighbor table entry out of range: " + line);
        const std::size_t e = i * t.k + r;
        t.neighbors[e] = std::stoull(f[2]);
        t.distances[e] = std::stod(f[3]);
        t.perturbed[e] = std::stod(f[4]);
        ++count;
    }
    if (count != t.a_rows * t.k) throw CorruptionError("neighbor table has missing entries");
    t.validate();
    return t;
}

}  // namespace fedsim::linkage
