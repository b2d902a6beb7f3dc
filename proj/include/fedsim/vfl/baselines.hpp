#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/linkage.hpp"
#include "fedsim/nn/optim.hpp"
#include "fedsim/party.hpp"
#include "fedsim/vfl/messages.hpp"
#include "fedsim/vfl/model.hpp"
#include "fedsim/vfl/train.hpp"

namespace fedsim::vfl {

enum class Algorithm { fedsim, solo, combine, exact, top1sim, avgsim, featuresim };

Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(Algorithm a);
/// Whether the algorithm trains the split model over linked pairs.
bool is_split(Algorithm a) noexcept;

/// Model configuration of a split-model algorithm at neighbor count `k`
/// (top1sim and exact always use k = 1).
ModelConfig config_for(Algorithm a, ModelConfig base, std::size_t k);

/// Links every party-A row to the first party-B row (by index) with an
/// identical identifier. Rows without a match get neighbor 0 and are left
/// out of `matched`. Throws EmptyLinkageError when nothing matches.
linkage::NeighborTable exact_table(const IdentifierColumn& a, const IdentifierColumn& b,
                                   std::vector<std::size_t>& matched);

struct FitConfig {
    nn::OptimizerConfig optimizer;
    std::size_t batch_size = 64;
    std::size_t epochs = 30;
    std::size_t patience = 5;
};

struct FitHistory {
    std::vector<double> train_loss;
    std::vector<double> val_score;
    std::size_t best_epoch = 0;
    double best_score = 0.0;
};

/// A model trained epoch by epoch over party-A row indices.
class Learner {
public:
    virtual ~Learner() = default;
    virtual double epoch(std::span<const std::size_t> rows, std::mt19937_64& rng) = 0;
    virtual nn::Tensor predict(std::span<const std::size_t> rows) = 0;
    virtual void snapshot() = 0;
    virtual void restore() = 0;
    virtual std::vector<const nn::ParamSet*> params() const = 0;
};

/// FedSim and every split-model baseline.
class SplitLearner final : public Learner {
public:
    SplitLearner(const PartyAView& a, const PartyBView& b, const linkage::NeighborTable& table, ModelConfig config,
                 std::uint64_t seed, const FitConfig& fit, MessageLog* log = nullptr);

    double epoch(std::span<const std::size_t> rows, std::mt19937_64& rng) override;
    nn::Tensor predict(std::span<const std::size_t> rows) override;
    void snapshot() override;
    void restore() override;
    std::vector<const nn::ParamSet*> params() const override;

    ModelBundle& model() noexcept { return *model_; }

private:
    const PartyAView* a_;
    const PartyBView* b_;
    const linkage::NeighborTable* table_;
    std::size_t batch_size_;
    std::unique_ptr<ModelBundle> model_;
    std::unique_ptr<FedSimTrainer> trainer_;
    ModelBundle best_;
};

/// Centralized MLP (solo and combine): input -> hidden -> hidden -> output.
class MlpLearner final : public Learner {
public:
    MlpLearner(nn::Tensor features, nn::Tensor labels, Task task, std::size_t classes, std::size_t hidden,
               std::uint64_t seed, const FitConfig& fit);

    double epoch(std::span<const std::size_t> rows, std::mt19937_64& rng) override;
    nn::Tensor predict(std::span<const std::size_t> rows) override;
    void snapshot() override;
    void restore() override;
    std::vector<const nn::ParamSet*> params() const override;

private:
    nn::Tensor features_;
    nn::Tensor labels_;
    Task task_;
    std::size_t classes_;
    nn::MlpSpec spec_;
    nn::ParamSet params_{"mlp"};
    nn::ParamSet best_{"mlp"};
    nn::Optimizer opt_;
    std::size_t batch_size_;
    std::size_t step_ = 0;
};

/// Trains until `epochs` or until the validation score has not improved for
/// `patience` consecutive epochs, then restores the best snapshot.
FitHistory fit(Learner& learner, const FitConfig& config, Task task, const nn::Tensor& labels,
               std::span<const std::size_t> train, std::span<const std::size_t> val, std::mt19937_64& rng);

/// Rows of `labels` selected by `rows`.
nn::Tensor gather_rows(const nn::Tensor& labels, std::span<const std::size_t> rows);

}  // namespace fedsim::vfl
