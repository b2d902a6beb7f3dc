#include "fedsim/vfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim::vfl {

Task parse_task(std::string_view name) {
    if (name == "binary" || name == "binary-cls") return Task::binary;
    if (name == "multiclass" || name == "multi-cls") return Task::multiclass;
    if (name == "regression") return Task::regression;
    throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::string_view to_string(Task t) {
    switch (t) {
        case Task::binary: return "binary-cls";
        case Task::multiclass: return "multi-cls";
        case Task::regression: return "regression";
    }
    return "?";
}

MergeMode parse_merge_mode(std::string_view name) {
    if (name == "cnn") return MergeMode::cnn;
    if (name == "average") return MergeMode::average;
    if (name == "mean_output") return MergeMode::mean_output;
    throw ConfigError("unknown merge mode '" + std::string(name) + "'");
}

std::string_view to_string(MergeMode m) {
    switch (m) {
        case MergeMode::cnn: return "cnn";
        case MergeMode::average: return "average";
        case MergeMode::mean_output: return "mean_output";
    }
    return "?";
}

std::size_t ModelConfig::output_width() const noexcept { return task == Task::multiclass ? classes : 1; }

std::size_t ModelConfig::preliminary_width() const noexcept {
    return merge == MergeMode::mean_output ? output_width() : l_m;
}

nn::LossKind ModelConfig::loss_kind() const noexcept {
    switch (task) {
        case Task::binary: return nn::LossKind::binary_cross_entropy;
        case Task::multiclass: return nn::LossKind::softmax_cross_entropy;
        case Task::regression: return nn::LossKind::mse;
    }
    return nn::LossKind::mse;
}

void ModelConfig::validate() const {
    if (l_a == 0 || l_b == 0) throw ConfigError("both parties need at least one training feature");
    if (k == 0) throw ConfigError("K must be at least 1");
    if (task == Task::multiclass && classes < 2) throw ConfigError("multiclass task needs at least two classes");
    if (local_hidden == 0 || cut_width == 0 || embed_width == 0 || agg_hidden == 0 || l_m == 0) {
        throw ConfigError("layer widths must be positive");
    }
    if (merge == MergeMode::cnn) {
        if (k_conv < 1 || k_conv > k) {
            throw ConfigError("k_conv = " + std::to_string(k_conv) + " must lie in [1, K = " + std::to_string(k) + "]");
        }
        if (channels == 0 || merge_hidden == 0) throw ConfigError("merge model widths must be positive");
    }
    if (weight_gate && sim_hidden == 0) throw ConfigError("similarity model needs a hidden layer");
    if (sort_key == SortKey::weight && !weight_gate) throw ConfigError("sorting by weights needs the weight gate");
    if (pairwise_loss && merge != MergeMode::mean_output) throw ConfigError("pairwise loss requires mean_output merge");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

ModelConfig ModelConfig::splitnn(ModelConfig base) {
    base.weight_gate = false;
    base.sort_key = SortKey::none;
    base.merge = MergeMode::mean_output;
    base.append_similarity = false;
    base.pairwise_loss = false;
    return base;
}

nn::MlpSpec party_b_spec(const ModelConfig& c) {
    return nn::MlpSpec::one_hidden("local", c.l_b, c.local_hidden, c.cut_width);
}

nn::MlpSpec party_a_local_spec(const ModelConfig& c) {
    return nn::MlpSpec::one_hidden("embed", c.l_a, c.local_hidden, c.embed_width);
}

nn::MlpSpec party_a_aggregate_spec(const ModelConfig& c) {
    const std::size_t in = c.cut_width + c.embed_width + (c.append_similarity ? 1 : 0);
    return nn::MlpSpec::one_hidden("agg", in, c.agg_hidden, c.preliminary_width());
}

nn::MlpSpec similarity_spec(const ModelConfig& c) {
    return nn::MlpSpec::one_hidden("sim", 1, c.sim_hidden, 1, nn::Activation::sigmoid);
}

nn::ConvSpec merge_conv_spec(const ModelConfig& c) { return {"merge.conv", c.k_conv, c.channels}; }

nn::MlpSpec merge_mlp_spec(const ModelConfig& c) {
    return nn::MlpSpec::one_hidden("merge.mlp", merge_conv_spec(c).output_width(c.k, c.l_m), c.merge_hidden,
                                   c.output_width());
}

nn::MlpSpec merge_head_spec(const ModelConfig& c) {
    nn::MlpSpec s;
    s.name = "merge.head";
    s.input_width = c.l_m;
    s.layers = {{c.output_width(), nn::Activation::identity}};
    return s;
}

ModelBundle ModelBundle::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelBundle m;
    m.config = config;
    std::mt19937_64 rng(seed);
    nn::init_mlp(m.theta_b, party_b_spec(config), rng);
    nn::init_mlp(m.theta_a1, party_a_local_spec(config), rng);
    nn::init_mlp(m.theta_a2, party_a_aggregate_spec(config), rng);
    if (config.weight_gate) nn::init_mlp(m.theta_s, similarity_spec(config), rng);
    switch (config.merge) {
        case MergeMode::cnn:
            nn::init_conv(m.theta_m, merge_conv_spec(config), rng);
            nn::init_mlp(m.theta_m, merge_mlp_spec(config), rng);
            break;
        case MergeMode::average: nn::init_mlp(m.theta_m, merge_head_spec(config), rng); break;
        case MergeMode::mean_output: break;
    }
    return m;
}

std::vector<nn::ParamSet*> ModelBundle::party_a_sets() { return {&theta_a1, &theta_a2, &theta_s, &theta_m}; }

std::vector<nn::ParamSet*> ModelBundle::all_sets() { return {&theta_b, &theta_a1, &theta_a2, &theta_s, &theta_m}; }

std::vector<const nn::ParamSet*> ModelBundle::all_sets() const {
    return {&theta_b, &theta_a1, &theta_a2, &theta_s, &theta_m};
}

nn::Var party_b_forward(nn::Tape& tape, ModelBundle& m, nn::Var d_b, bool train, std::mt19937_64* rng) {
    return nn::mlp_forward(tape, m.theta_b, party_b_spec(m.config), d_b, train, rng);
}

nn::Var party_a_forward(nn::Tape& tape, ModelBundle& m, nn::Var c, nn::Var d_a, nn::Var s, bool train,
                        std::mt19937_64* rng) {
    const ModelConfig& cfg = m.config;
    if (c.value().rows() != d_a.value().rows() * cfg.k) {
        throw DimensionError("party A expected " + std::to_string(d_a.value().rows() * cfg.k) + " cut rows, got " +
                             std::to_string(c.value().rows()));
    }
    nn::Var embed = nn::mlp_forward(tape, m.theta_a1, party_a_local_spec(cfg), d_a, train, rng);
    nn::Var x = nn::concat_cols(c, nn::repeat_rows(embed, cfg.k));
    if (cfg.append_similarity) {
        if (!s.valid()) throw ConfigError("FeatureSim input needs similarities");
        x = nn::concat_cols(x, s);
    }
    return nn::mlp_forward(tape, m.theta_a2, party_a_aggregate_spec(cfg), x, train, rng);
}

nn::Var weight_gate(nn::Tape& tape, ModelBundle& m, nn::Var s) {
    if (s.value().cols() != 1) throw DimensionError("weight gate expects a column of similarities");
    return nn::mlp_forward(tape, m.theta_s, similarity_spec(m.config), s, false);
}

nn::Var apply_weights(nn::Var o, nn::Var w) { return nn::scale_rows(o, w); }

std::vector<std::size_t> sort_permutation(std::span<const double> keys, std::size_t k) {
    if (k == 0 || keys.size() % k != 0) throw DimensionError("sort keys are not a whole number of K-blocks");
    std::vector<std::size_t> perm(keys.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t start = 0; start < keys.size(); start += k) {
        auto first = perm.begin() + static_cast<std::ptrdiff_t>(start);
        std::stable_sort(first, first + static_cast<std::ptrdiff_t>(k),
                         [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    }
    return perm;
}

nn::Var sort_gate(nn::Var o_weighted, std::span<const double> keys, std::size_t k) {
    if (keys.size() != o_weighted.value().rows()) throw DimensionError("one sort key per row is required");
    return nn::permute_rows(o_weighted, sort_permutation(keys, k));
}

nn::Var merge_gate(nn::Tape& tape, ModelBundle& m, nn::Var o_sorted, bool train, std::mt19937_64* rng) {
    const ModelConfig& cfg = m.config;
    switch (cfg.merge) {
        case MergeMode::cnn: {
            nn::Var conv = nn::conv_k1_forward(tape, m.theta_m, merge_conv_spec(cfg), o_sorted, cfg.k);
            conv = nn::dropout(conv, cfg.dropout, rng, train);
            return nn::mlp_forward(tape, m.theta_m, merge_mlp_spec(cfg), conv, train, rng);
        }
        case MergeMode::average:
            return nn::mlp_forward(tape, m.theta_m, merge_head_spec(cfg), nn::group_mean(o_sorted, cfg.k), train, rng);
        case MergeMode::mean_output: return nn::group_mean(o_sorted, cfg.k);
    }
    throw ConfigError("unknown merge mode");
}

PartyAGraph party_a_graph(nn::Tape& tape, ModelBundle& m, const linkage::PartyABatch& batch, const nn::Tensor& cut,
                          bool train, std::mt19937_64* rng) {
    const ModelConfig& cfg = m.config;
    PartyAGraph g;
    g.cut_input = tape.input(cut, true);
    nn::Var d_a = tape.constant(batch.features);
    nn::Var s = tape.constant(batch.similarities);
    nn::Var o = party_a_forward(tape, m, g.cut_input, d_a, s, train, rng);
    nn::Var w;
    nn::Var weighted = o;
    if (cfg.weight_gate) {
        w = weight_gate(tape, m, s);
        weighted = apply_weights(o, w);
    }
    nn::Var sorted = weighted;
    if (cfg.sort_key == SortKey::similarity) {
        sorted = sort_gate(weighted, batch.similarities.data(), cfg.k);
    } else if (cfg.sort_key == SortKey::weight) {
        sorted = sort_gate(weighted, w.value().data(), cfg.k);
    }
    g.raw = merge_gate(tape, m, sorted, train, rng);
    g.prediction = cfg.task == Task::binary ? nn::sigmoid(g.raw) : g.raw;
    if (cfg.pairwise_loss) g.pair_raw = o;
    return g;
}

nn::Var task_loss(const ModelConfig& c, const PartyAGraph& g, const nn::Tensor& labels) {
    if (!c.pairwise_loss) return nn::loss(g.prediction, labels, c.loss_kind());
    nn::Tensor repeated({labels.rows() * c.k, labels.cols()});
    for (std::size_t r = 0; r < repeated.rows(); ++r)
        for (std::size_t col = 0; col < labels.cols(); ++col) repeated(r, col) = labels(r / c.k, col);
    nn::Var pair_pred = c.task == Task::binary ? nn::sigmoid(g.pair_raw) : g.pair_raw;
    return nn::loss(pair_pred, repeated, c.loss_kind());
}

nn::Tensor to_predictions(const ModelConfig& c, const nn::Tensor& raw) {
    nn::Tensor out = raw;
    if (c.task == Task::binary) {
        for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
    } else if (c.task == Task::multiclass) {
        for (std::size_t r = 0; r < out.rows(); ++r) {
            auto row = out.row(r);
            const double mx = *std::max_element(row.begin(), row.end());
            double denom = 0.0;
            for (double& v : row) denom += (v = std::exp(v - mx));
            for (double& v : row) v /= denom;
        }
    }
    return out;
}

CutActivation PartyB::forward(const linkage::PartyBBatch& batch, bool train, std::mt19937_64* rng) {
    tape_ = std::make_unique<nn::Tape>();
    out_ = party_b_forward(*tape_, *model_, tape_->constant(batch.features), train, rng);
    return CutActivation(out_.value());
}

void PartyB::backward(const CutGradient& grad) {
    if (!tape_) throw StateError("party B received a cut gradient before sending activations");
    tape_->backward(out_, grad.value);
    tape_.reset();
}

double PartyA::forward(const linkage::PartyABatch& batch, const CutActivation& cut, bool train, std::mt19937_64* rng) {
    tape_ = std::make_unique<nn::Tape>();
    graph_ = party_a_graph(*tape_, *model_, batch, cut.value, train, rng);
    loss_ = task_loss(model_->config, graph_, batch.labels);
    return loss_.value()[0];
}

CutGradient PartyA::backward() {
    if (!tape_) throw StateError("party A backward before forward");
    tape_->backward(loss_);
    CutGradient g(tape_->grad(graph_.cut_input));
    tape_.reset();
    return g;
}

nn::Tensor PartyA::predict(const linkage::PartyABatch& batch, const CutActivation& cut) {
    nn::Tape tape;
    PartyAGraph g = party_a_graph(tape, *model_, batch, cut.value, false, nullptr);
    return to_predictions(model_->config, g.raw.value());
}

}  // namespace fedsim::vfl
