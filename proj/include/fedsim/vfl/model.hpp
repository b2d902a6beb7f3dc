#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/linkage.hpp"
#include "fedsim/nn/autodiff.hpp"
#include "fedsim/nn/layers.hpp"
#include "fedsim/nn/loss.hpp"
#include "fedsim/nn/tensor.hpp"
#include "fedsim/vfl/messages.hpp"

namespace fedsim::vfl {

enum class Task { binary, multiclass, regression };

/// cnn: conv(k_conv x 1) -> dropout -> one-hidden-layer MLP.
/// average: column mean of the weighted outputs, then an affine head.
/// mean_output: the K preliminary outputs are the predictions themselves and
///   are averaged (AvgSim / Top1Sim / FeatureSim); no merge parameters.
enum class MergeMode { cnn, average, mean_output };
enum class SortKey { none, similarity, weight };

Task parse_task(std::string_view name);
std::string_view to_string(Task t);
MergeMode parse_merge_mode(std::string_view name);
std::string_view to_string(MergeMode m);

struct ModelConfig {
    Task task = Task::binary;
    std::size_t classes = 2;
    std::size_t l_a = 0;
    std::size_t l_b = 0;
    std::size_t k = 1;

    std::size_t local_hidden = 64;
    std::size_t cut_width = 16;
    std::size_t embed_width = 16;
    std::size_t agg_hidden = 64;
    std::size_t l_m = 8;

    bool weight_gate = true;
    std::size_t sim_hidden = 16;
    SortKey sort_key = SortKey::similarity;
    MergeMode merge = MergeMode::cnn;
    std::size_t k_conv = 3;
    std::size_t channels = 4;
    std::size_t merge_hidden = 64;
    double dropout = 0.1;

    // FeatureSim: the pair's similarity is an extra input of the party-A
    // aggregate net and the loss is applied per pair.
    bool append_similarity = false;
    bool pairwise_loss = false;

    std::size_t output_width() const noexcept;
    /// Width of each preliminary output row o_i.
    std::size_t preliminary_width() const noexcept;
    nn::LossKind loss_kind() const noexcept;
    void validate() const;

    /// Plain SplitNN over K candidates with averaged outputs (AvgSim; Top1Sim when k = 1).
    static ModelConfig splitnn(ModelConfig base);
};

/// Parameter sets of the full model: theta^B (party B), theta^A1 / theta^A2
/// (party A local and aggregate nets), theta^s (similarity model), theta^m
/// (merge model).
struct ModelBundle {
    ModelConfig config;
    nn::ParamSet theta_b{"theta_B"};
    nn::ParamSet theta_a1{"theta_A1"};
    nn::ParamSet theta_a2{"theta_A2"};
    nn::ParamSet theta_s{"theta_s"};
    nn::ParamSet theta_m{"theta_m"};

    static ModelBundle create(const ModelConfig& config, std::uint64_t seed);

    std::vector<nn::ParamSet*> party_a_sets();
    std::vector<nn::ParamSet*> all_sets();
    std::vector<const nn::ParamSet*> all_sets() const;
};

nn::MlpSpec party_b_spec(const ModelConfig& c);
nn::MlpSpec party_a_local_spec(const ModelConfig& c);
nn::MlpSpec party_a_aggregate_spec(const ModelConfig& c);
nn::MlpSpec similarity_spec(const ModelConfig& c);
nn::ConvSpec merge_conv_spec(const ModelConfig& c);
nn::MlpSpec merge_mlp_spec(const ModelConfig& c);
nn::MlpSpec merge_head_spec(const ModelConfig& c);

// Individual stages, usable on any tape.

/// c = f(theta^B; d^B), row-wise.
nn::Var party_b_forward(nn::Tape& tape, ModelBundle& m, nn::Var d_b, bool train, std::mt19937_64* rng);
/// o_i = f(theta^A; c_i, d^A_i): d^A is embedded once per row, repeated K
/// times and concatenated onto each neighbor's cut row. `s` (may be invalid)
/// is appended when the config asks for it.
nn::Var party_a_forward(nn::Tape& tape, ModelBundle& m, nn::Var c, nn::Var d_a, nn::Var s, bool train,
                        std::mt19937_64* rng);
/// w = sigmoid(f(theta^s; s)) element-wise over a column of similarities.
nn::Var weight_gate(nn::Tape& tape, ModelBundle& m, nn::Var s);
/// o' = diag(w) o.
nn::Var apply_weights(nn::Var o, nn::Var w);
/// Stable ascending sort of each block of `k` keys; result r of block b is the
/// index (into the whole column) of the row placed at position r.
std::vector<std::size_t> sort_permutation(std::span<const double> keys, std::size_t k);
nn::Var sort_gate(nn::Var o_weighted, std::span<const double> keys, std::size_t k);
/// Raw task output (logits / values) from the sorted weighted outputs.
nn::Var merge_gate(nn::Tape& tape, ModelBundle& m, nn::Var o_sorted, bool train, std::mt19937_64* rng);

/// Everything party A computes for one batch.
struct PartyAGraph {
    nn::Var raw;          // batch x out (logits for classification)
    nn::Var prediction;   // probabilities for binary, logits for multiclass, values for regression
    nn::Var pair_raw;     // per-pair outputs when the loss is pairwise
    nn::Var cut_input;    // leaf holding the received c
};

/// Party A's full forward (lines 8-13 of the training loop).
PartyAGraph party_a_graph(nn::Tape& tape, ModelBundle& m, const linkage::PartyABatch& batch, const nn::Tensor& cut,
                          bool train, std::mt19937_64* rng);

nn::Var task_loss(const ModelConfig& c, const PartyAGraph& g, const nn::Tensor& labels);

/// Converts raw outputs to the values scored by metrics: probabilities for
/// binary, softmax probabilities for multiclass, values for regression.
nn::Tensor to_predictions(const ModelConfig& c, const nn::Tensor& raw);

/// Party B's side of the protocol. Holds a tape between sending c and
/// receiving g^c.
class PartyB {
public:
    explicit PartyB(ModelBundle& model) : model_(&model) {}

    CutActivation forward(const linkage::PartyBBatch& batch, bool train, std::mt19937_64* rng);
    /// g^B = d(loss)/d(theta^B) through the received cut gradient.
    void backward(const CutGradient& grad);
    nn::ParamSet& params() noexcept { return model_->theta_b; }

private:
    ModelBundle* model_;
    std::unique_ptr<nn::Tape> tape_;
    nn::Var out_;
};

/// Party A's side of the protocol.
class PartyA {
public:
    explicit PartyA(ModelBundle& model) : model_(&model) {}

    /// Records the forward pass and returns the mean batch loss.
    double forward(const linkage::PartyABatch& batch, const CutActivation& cut, bool train, std::mt19937_64* rng);
    /// Backpropagates the last loss into theta^A, theta^s, theta^m and returns g^c.
    CutGradient backward();
    /// Prediction without recording gradients (dropout off).
    nn::Tensor predict(const linkage::PartyABatch& batch, const CutActivation& cut);

    std::vector<nn::ParamSet*> params() { return model_->party_a_sets(); }

private:
    ModelBundle* model_;
    std::unique_ptr<nn::Tape> tape_;
    PartyAGraph graph_;
    nn::Var loss_;
};

}  // namespace fedsim::vfl
