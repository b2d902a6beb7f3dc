#include "fedsim/vfl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsim/error.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/nn/loss.hpp"

namespace fedsim::vfl {

Algorithm parse_algorithm(std::string_view name) {
    if (name == "fedsim") return Algorithm::fedsim;
    if (name == "solo") return Algorithm::solo;
    if (name == "combine") return Algorithm::combine;
    if (name == "exact") return Algorithm::exact;
    if (name == "top1sim") return Algorithm::top1sim;
    if (name == "avgsim") return Algorithm::avgsim;
    if (name == "featuresim") return Algorithm::featuresim;
    throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::fedsim: return "fedsim";
        case Algorithm::solo: return "solo";
        case Algorithm::combine: return "combine";
        case Algorithm::exact: return "exact";
        case Algorithm::top1sim: return "top1sim";
        case Algorithm::avgsim: return "avgsim";
        case Algorithm::featuresim: return "featuresim";
    }
    return "?";
}

bool is_split(Algorithm a) noexcept { return a != Algorithm::solo && a != Algorithm::combine; }

ModelConfig config_for(Algorithm a, ModelConfig base, std::size_t k) {
    base.k = k;
    switch (a) {
        case Algorithm::fedsim:
            if (base.merge == MergeMode::cnn) base.k_conv = std::min(base.k_conv, k);
            return base;
        case Algorithm::exact:
        case Algorithm::top1sim: base.k = 1; return ModelConfig::splitnn(base);
        case Algorithm::avgsim: return ModelConfig::splitnn(base);
        case Algorithm::featuresim: {
            ModelConfig c = ModelConfig::splitnn(base);
            c.append_similarity = true;
            c.pairwise_loss = true;
            return c;
        }
        case Algorithm::solo:
        case Algorithm::combine: break;
    }
    throw ConfigError(std::string(to_string(a)) + " does not use the split model");
}

namespace {

bool same_identifier(const IdentifierColumn& a, std::size_t i, const IdentifierColumn& b, std::size_t j) {
    switch (a.kind()) {
        case IdentifierKind::numeric: {
            auto x = a.numeric_values().row(i);
            auto y = b.numeric_values().row(j);
            return std::equal(x.begin(), x.end(), y.begin(), y.end());
        }
        case IdentifierKind::string: return a.string_values()[i] == b.string_values()[j];
        case IdentifierKind::bloom: return a.bloom_values()[i] == b.bloom_values()[j];
    }
    return false;
}

}  // namespace

linkage::NeighborTable exact_table(const IdentifierColumn& a, const IdentifierColumn& b,
                                   std::vector<std::size_t>& matched) {
    if (a.kind() != b.kind()) throw InputError("identifier kinds differ between parties");
    if (b.size() == 0) throw EmptyLinkageError("party B holds no records");
    linkage::NeighborTable t;
    t.a_rows = a.size();
    t.b_rows = b.size();
    t.k = 1;
    t.neighbors.assign(a.size(), 0);
    t.distances.assign(a.size(), 0.0);
    matched.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (same_identifier(a, i, b, j)) {
                t.neighbors[i] = j;
                matched.push_back(i);
                break;
            }
        }
    }
    if (matched.empty()) throw EmptyLinkageError("no party-A record has an exactly matching identifier in party B");
    // The split model without gates ignores similarities; all pairs are exact.
    t.similarities.assign(a.size(), 0.0);
    t.perturbed = t.similarities;
    t.sigma0 = 1.0;
    return t;
}

nn::Tensor gather_rows(const nn::Tensor& labels, std::span<const std::size_t> rows) {
    nn::Tensor out({rows.size(), labels.cols()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= labels.rows()) throw CorruptionError("row index out of range");
        std::copy(labels.row(rows[r]).begin(), labels.row(rows[r]).end(), out.row(r).begin());
    }
    return out;
}

SplitLearner::SplitLearner(const PartyAView& a, const PartyBView& b, const linkage::NeighborTable& table,
                           ModelConfig config, std::uint64_t seed, const FitConfig& fit, MessageLog* log)
    : a_(&a), b_(&b), table_(&table), batch_size_(fit.batch_size) {
    if (config.k != table.k) {
        throw ConfigError("model K = " + std::to_string(config.k) + " but the table holds " + std::to_string(table.k));
    }
    config.l_a = a.width();
    config.l_b = b.width();
    model_ = std::make_unique<ModelBundle>(ModelBundle::create(config, seed));
    trainer_ = std::make_unique<FedSimTrainer>(*model_, fit.optimizer, log);
    best_ = *model_;
}

double SplitLearner::epoch(std::span<const std::size_t> rows, std::mt19937_64& rng) {
    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::shuffle(order.begin(), order.end(), rng);
    linkage::BatchStream stream(*a_, *b_, *table_, std::move(order), batch_size_);
    return trainer_->train_epoch(stream, rng);
}

nn::Tensor SplitLearner::predict(std::span<const std::size_t> rows) {
    linkage::BatchStream stream(*a_, *b_, *table_, {rows.begin(), rows.end()}, batch_size_);
    return vfl::predict(*model_, stream);
}

void SplitLearner::snapshot() { best_ = *model_; }

void SplitLearner::restore() {
    auto dst = model_->all_sets();
    auto src = best_.all_sets();
    for (std::size_t s = 0; s < dst.size(); ++s) *dst[s] = *src[s];
}

std::vector<const nn::ParamSet*> SplitLearner::params() const {
    return static_cast<const ModelBundle&>(*model_).all_sets();
}

MlpLearner::MlpLearner(nn::Tensor features, nn::Tensor labels, Task task, std::size_t classes, std::size_t hidden,
                       std::uint64_t seed, const FitConfig& fit)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      task_(task),
      classes_(task == Task::multiclass ? classes : 1),
      opt_(fit.optimizer),
      batch_size_(fit.batch_size) {
    if (features_.rows() != labels_.rows()) throw DimensionError("MLP features and labels differ in rows");
    if (batch_size_ == 0) throw ConfigError("batch size must be at least 1");
    spec_.name = "mlp";
    spec_.input_width = features_.cols();
    spec_.layers = {{hidden, nn::Activation::relu}, {hidden, nn::Activation::relu}, {classes_, nn::Activation::identity}};
    std::mt19937_64 rng(seed);
    nn::init_mlp(params_, spec_, rng);
    best_ = params_;
}

double MlpLearner::epoch(std::span<const std::size_t> rows, std::mt19937_64& rng) {
    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::shuffle(order.begin(), order.end(), rng);
    const nn::LossKind kind = task_ == Task::binary       ? nn::LossKind::binary_cross_entropy
                              : task_ == Task::multiclass ? nn::LossKind::softmax_cross_entropy
                                                          : nn::LossKind::mse;
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size_) {
        std::span<const std::size_t> idx(order.data() + start, std::min(batch_size_, order.size() - start));
        params_.zero_grad();
        nn::Tape tape;
        nn::Var x = tape.constant(gather_rows(features_, idx));
        nn::Var out = nn::mlp_forward(tape, params_, spec_, x, true, &rng);
        if (task_ == Task::binary) out = nn::sigmoid(out);
        nn::Var l = nn::loss(out, gather_rows(labels_, idx), kind);
        const double v = l.value()[0];
        if (!std::isfinite(v)) throw NumericError("non-finite loss at batch " + std::to_string(n) + " of the epoch");
        tape.backward(l);
        opt_.step(params_, ++step_);
        total += v;
        ++n;
    }
    if (n == 0) throw InputError("training rows are empty");
    return total / static_cast<double>(n);
}

nn::Tensor MlpLearner::predict(std::span<const std::size_t> rows) {
    nn::Tape tape;
    nn::Var out = nn::mlp_forward(tape, params_, spec_, tape.constant(gather_rows(features_, rows)), false);
    ModelConfig c;
    c.task = task_;
    return to_predictions(c, out.value());
}

void MlpLearner::snapshot() { best_ = params_; }
void MlpLearner::restore() { params_ = best_; }
std::vector<const nn::ParamSet*> MlpLearner::params() const { return {&params_}; }

FitHistory fit(Learner& learner, const FitConfig& config, Task task, const nn::Tensor& labels,
               std::span<const std::size_t> train, std::span<const std::size_t> val, std::mt19937_64& rng) {
    if (config.epochs == 0) throw ConfigError("epochs must be at least 1");
    if (train.empty() || val.empty()) throw ConfigError("training and validation sets must be non-empty");
    const nn::Tensor val_labels = gather_rows(labels, val);
    FitHistory h;
    std::size_t since_best = 0;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        h.train_loss.push_back(learner.epoch(train, rng));
        const double score = metrics::selection_score(task, learner.predict(val), val_labels);
        h.val_score.push_back(score);
        if (e == 0 || score > h.best_score) {
            h.best_score = score;
            h.best_epoch = e;
            learner.snapshot();
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    learner.restore();
    return h;
}

}  // namespace fedsim::vfl
