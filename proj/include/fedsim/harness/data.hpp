#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedsim/nn/tensor.hpp"
#include "fedsim/party.hpp"
#include "fedsim/vfl/model.hpp"

namespace fedsim::harness {

struct SyntheticSpec {
    vfl::Task task = vfl::Task::binary;
    std::size_t n_samples = 2000;
    std::size_t n_features = 20;
    std::size_t n_informative = 10;
    // Linear combinations of the informative columns.
    std::size_t n_redundant = 0;
    std::size_t n_common = 4;
    std::size_t classes = 2;
    double class_sep = 1.0;
    // Fraction of classification labels replaced by a random class.
    double flip_y = 0.01;
    // Residual scale of the regression target.
    double noise = 0.1;
    double sigma_cf = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GlobalDataset {
    vfl::Task task = vfl::Task::binary;
    std::size_t classes = 2;
    nn::Tensor features;  // n x n_features
    nn::Tensor labels;    // n x 1
};

/// Classification: Gaussian clusters around hypercube vertices (two per
/// class) in the informative subspace, mixed by a random linear map, then
/// redundant combinations and pure-noise columns. Regression: linear plus
/// tanh target on the informative columns with Gaussian residual.
GlobalDataset generate_synthetic(const SyntheticSpec& spec);

/// The two parties' views plus what only the harness may know.
struct VerticalData {
    PartyAView a;
    PartyBView b;
    // a_to_b[i] is the party-B row holding party-A row i's record.
    std::vector<std::size_t> a_to_b;
    std::vector<std::size_t> common_columns;
    std::vector<std::size_t> a_columns;
    std::vector<std::size_t> b_columns;
};

/// Picks `n_common` random columns as identifiers copied to both parties and
/// perturbed with N(0, sigma_cf^2) per party (party B only when `noise_both`
/// is false); divides the remaining columns equally; shuffles party B's rows.
VerticalData vertical_split(const GlobalDataset& data, std::size_t n_common, double sigma_cf, bool noise_both,
                            std::uint64_t seed);

/// [d^A | d^B] of the true record pairs, in party-A row order.
nn::Tensor combined_features(const VerticalData& v);

struct Splits {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..n-1 cut into round(n * r0), round(n * r1) and the rest.
Splits split_train_val_test(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

/// Party CSV files: a header row, numeric feature columns, `id:`-prefixed
/// identifier columns and (party A only) a `label` column. Identifiers are
/// numeric when every id cell parses as a number, otherwise the single id
/// column is read as strings.
PartyAView read_party_a_csv(const std::filesystem::path& path);
PartyBView read_party_b_csv(const std::filesystem::path& path);
void write_party_csv(const std::filesystem::path& path, const nn::Tensor& features, const nn::Tensor* labels,
                     const IdentifierColumn& ids);

/// Derives an independent stream seed for a named purpose.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace fedsim::harness
