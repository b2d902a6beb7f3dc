#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/harness/data.hpp"
#include "fedsim/linkage.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/vfl/baselines.hpp"
#include "fedsim/vfl/model.hpp"

namespace fedsim::harness {

struct DatasetConfig {
    std::string name = "synthetic";
    // "synthetic" or "csv"
    std::string source = "synthetic";
    SyntheticSpec synthetic;
    bool noise_both = true;
    std::filesystem::path party_a;
    std::filesystem::path party_b;
    // Task of CSV data (synthetic data carries its own).
    vfl::Task task = vfl::Task::binary;
    std::size_t classes = 2;
};

struct LinkageConfig {
    linkage::Metric metric = linkage::Metric::euclidean;
    // FEDERAL encoding of each numeric identifier coordinate (hamming metric).
    std::size_t bits_per_dim = 32;
    double bloom_threshold = 1.0;
    double bloom_lo = -5.0;
    double bloom_hi = 5.0;
    std::uint64_t bloom_seed = 7;
    // q-gram encoding of string identifiers (hamming metric).
    pprl::StringEncoderParams strings;
};

struct PrivacyConfig {
    // At most one of these is set. `tau_mid` picks sqrt(tau_floor(sigma0)),
    // the geometric middle of the feasible window.
    std::optional<double> tau;
    std::optional<double> sigma;
    bool tau_mid = false;

    bool enabled() const noexcept { return tau || sigma || tau_mid; }
    std::string label() const;
};

struct ExperimentConfig {
    std::string algorithm = "fedsim";
    DatasetConfig dataset;
    LinkageConfig linkage;
    std::size_t k = 10;
    PrivacyConfig privacy;
    std::array<double, 3> split{0.7, 0.1, 0.2};
    vfl::FitConfig fit;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    vfl::ModelConfig model;
    std::size_t mlp_hidden = 64;
    std::size_t audit_trials = 20000;
    std::filesystem::path output_dir;
    bool save_checkpoints = false;
    bool log_messages = false;

    void validate() const;
};

/// Sweep axes; an empty axis keeps the base value.
struct SweepConfig {
    std::vector<std::string> algorithms;
    std::vector<std::size_t> ks;
    std::vector<double> sigma_cfs;
    std::vector<PrivacyConfig> privacies;
    std::size_t workers = 1;
};

ExperimentConfig parse_experiment(const nlohmann::json& j);
SweepConfig parse_sweep(const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);
/// Directory for run artifacts: `output_dir` from the config, else
/// $FEDSIM_OUTPUT_ROOT/<default_name>, else ./fedsim_out/<default_name>.
std::filesystem::path resolve_output_dir(const std::filesystem::path& configured, const std::string& default_name);

struct AuditSummary {
    double tau = 0.0;
    double sigma = 0.0;
    double sigma0 = 0.0;
    double expected_disclosures = 0.0;
    double empirical_rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t trials = 0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    metrics::Scores test;
    // Linkage quality against the harness-only ground truth, when known.
    metrics::Scores linkage;
    std::vector<double> train_loss;
    std::vector<double> val_score;
    std::size_t best_epoch = 0;
    double sigma = 0.0;
    std::optional<double> tau;
    std::optional<AuditSummary> audit;
};

struct MetricsReport {
    std::string algorithm;
    std::string dataset;
    std::size_t k = 0;
    double sigma_cf = 0.0;
    std::optional<double> tau;
    double sigma = 0.0;
    double mu0 = 0.0;
    double sigma0 = 0.0;
    std::vector<SeedResult> seeds;

    struct Aggregate {
        std::string metric;
        double mean = 0.0;
        double std = 0.0;
    };
    /// Mean and sample standard deviation of each test metric over seeds.
    std::vector<Aggregate> aggregate() const;
    nlohmann::ordered_json to_json() const;
};

MetricsReport run_experiment(const ExperimentConfig& config);
std::vector<MetricsReport> run_sweep(const ExperimentConfig& base, const SweepConfig& sweep);
/// The configurations a sweep expands to, in report order.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base, const SweepConfig& sweep);

/// `algorithm,dataset,K,sigma_cf,tau,sigma,seed,metric_name,metric_value`
void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports);
void write_report_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
void write_report_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);

struct ReportRow {
    std::string algorithm;
    std::string dataset;
    std::size_t k = 0;
    double sigma_cf = 0.0;
    std::optional<double> tau;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
};

std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);
std::string format_double(double v);

}  // namespace fedsim::harness

namespace fedsim::harness {

/// Link, normalize, calibrate and perturb exactly as `run_experiment` does
/// for `seed`, without training. Needs a split-model algorithm.
linkage::NeighborTable build_neighbor_table(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace fedsim::harness
