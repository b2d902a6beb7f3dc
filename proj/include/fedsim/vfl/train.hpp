#pragma once

#include <cstddef>
#include <random>

#include "fedsim/linkage.hpp"
#include "fedsim/nn/optim.hpp"
#include "fedsim/vfl/messages.hpp"
#include "fedsim/vfl/model.hpp"

namespace fedsim::vfl {

/// Drives the two parties through the exchange of one training step per
/// batch. Each party owns its optimizer; both step after party B has
/// consumed g^c.
class FedSimTrainer {
public:
    FedSimTrainer(ModelBundle& model, const nn::OptimizerConfig& optimizer, MessageLog* log = nullptr);

    /// Mean of the per-batch losses. Throws NumericError naming the batch
    /// when a loss is not finite.
    double train_epoch(linkage::BatchStream& batches, std::mt19937_64& rng);
    /// Predictions for every party-A row of the stream, in stream order.
    nn::Tensor predict(linkage::BatchStream& batches);

    std::size_t steps() const noexcept { return step_; }
    ModelBundle& model() noexcept { return *model_; }

private:
    ModelBundle* model_;
    PartyA party_a_;
    PartyB party_b_;
    nn::Optimizer opt_a_;
    nn::Optimizer opt_b_;
    MessageLog* log_;
    std::size_t step_ = 0;
    std::size_t batch_counter_ = 0;
};

/// One epoch with a fresh optimizer.
double train_epoch(ModelBundle& model, linkage::BatchStream& batches, const nn::OptimizerConfig& optimizer,
                   std::mt19937_64& rng, MessageLog* log = nullptr);
nn::Tensor predict(ModelBundle& model, linkage::BatchStream& batches);

}  // namespace fedsim::vfl
