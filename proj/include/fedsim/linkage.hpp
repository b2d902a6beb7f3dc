#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/identifier.hpp"
#include "fedsim/nn/tensor.hpp"
#include "fedsim/party.hpp"

namespace fedsim::linkage {

enum class Metric { euclidean, levenshtein, hamming };

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric m);

double euclidean_distance(std::span<const double> a, std::span<const double> b);
std::size_t levenshtein_distance(std::string_view a, std::string_view b);

/// Distance between record `i` of `a` and record `j` of `b`.
double distance(Metric metric, const IdentifierColumn& a, std::size_t i, const IdentifierColumn& b, std::size_t j);

/// Candidate pairs held by the coordinator (party C).
///
/// Row i stores the K party-B neighbors of party-A record i in ascending
/// distance (descending similarity), ties broken by ascending B index.
/// Entry (i, r) lives at index i * k + r of every per-entry vector.
struct NeighborTable {
    std::size_t a_rows = 0;
    std::size_t b_rows = 0;
    std::size_t k = 0;
    std::vector<std::size_t> neighbors;
    std::vector<double> distances;
    // Filled by normalize_similarities.
    std::vector<double> similarities;
    double mu0 = 0.0;
    double sigma0 = 0.0;
    // Filled by perturb_similarities.
    std::vector<double> perturbed;
    double sigma = 0.0;

    bool normalized() const noexcept { return !similarities.empty(); }
    bool is_perturbed() const noexcept { return !perturbed.empty(); }

    std::size_t neighbor(std::size_t i, std::size_t rank) const { return neighbors[i * k + rank]; }
    double distance(std::size_t i, std::size_t rank) const { return distances[i * k + rank]; }
    std::span<const double> perturbed_row(std::size_t i) const { return {perturbed.data() + i * k, k}; }

    /// Keeps only the first `k_new` neighbors of every row.
    NeighborTable truncated(std::size_t k_new) const;
    /// Throws CorruptionError when sizes or indices are inconsistent.
    void validate() const;
};

NeighborTable top_k_neighbors(const IdentifierColumn& a, const IdentifierColumn& b, Metric metric, std::size_t k);

/// rho = (-d - mu0) / sigma0 with mu0, sigma0 the population mean and
/// standard deviation of all negative distances stored in the table.
void normalize_similarities(NeighborTable& table);

/// s = rho + N(0, sigma^2), drawn in table order.
void perturb_similarities(NeighborTable& table, double sigma, std::mt19937_64& rng);

/// What party A sees of the coordinator's work: neighbor order and the
/// perturbed similarities, never raw distances or unperturbed similarities.
struct PerturbedSimilarities {
    std::size_t k = 0;
    std::vector<std::size_t> neighbors;
    std::vector<double> values;
};

PerturbedSimilarities party_a_view(const NeighborTable& table);

/// Party-A slice of a batch: its own rows, labels, and the similarities of
/// each row's K candidates.
struct PartyABatch {
    std::vector<std::size_t> rows;
    nn::Tensor features;      // batch x l_A
    nn::Tensor labels;        // batch x label width
    nn::Tensor similarities;  // (batch * K) x 1, block-major
};

/// Party-B slice: K consecutive feature rows per party-A row.
struct PartyBBatch {
    std::vector<std::size_t> rows;  // batch * K indices into party B
    nn::Tensor features;            // (batch * K) x l_B
};

struct AlignedBatch {
    std::size_t k = 0;
    PartyABatch a;
    PartyBBatch b;

    std::size_t size() const noexcept { return a.rows.size(); }
};

/// Streams aligned batches over the selected party-A rows in the given order.
/// Each party's slice is materialized from that party's own view.
class BatchStream {
public:
    BatchStream(const PartyAView& a, const PartyBView& b, const NeighborTable& table, std::vector<std::size_t> order,
                std::size_t batch_size);

    std::optional<AlignedBatch> next();
    std::size_t num_batches() const noexcept;
    void rewind() noexcept { cursor_ = 0; }

private:
    const PartyAView* a_;
    const PartyBView* b_;
    const NeighborTable* table_;
    std::vector<std::size_t> order_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
};

/// Batches over every party-A row in index order.
BatchStream align(const PartyAView& a, const PartyBView& b, const NeighborTable& table, std::size_t batch_size);
std::vector<AlignedBatch> collect(BatchStream stream);

/// CSV `a_idx,rank,b_idx,distance,similarity_perturbed` plus a JSON sidecar
/// `{mu0, sigma0, sigma, K}` at `<csv path>.json`.
void write_table(const NeighborTable& table, const std::filesystem::path& csv);
NeighborTable read_table(const std::filesystem::path& csv);

}  // namespace fedsim::linkage
