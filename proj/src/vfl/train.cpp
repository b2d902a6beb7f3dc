#include "fedsim/vfl/train.hpp"

#include <cmath>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim::vfl {

FedSimTrainer::FedSimTrainer(ModelBundle& model, const nn::OptimizerConfig& optimizer, MessageLog* log)
    : model_(&model), party_a_(model), party_b_(model), opt_a_(optimizer), opt_b_(optimizer), log_(log) {
    model.config.validate();
}

double FedSimTrainer::train_epoch(linkage::BatchStream& batches, std::mt19937_64& rng) {
    double total = 0.0;
    std::size_t n = 0;
    batches.rewind();
    while (auto batch = batches.next()) {
        if (batch->k != model_->config.k) {
            throw DimensionError("batch carries K = " + std::to_string(batch->k) + " but the model expects " +
                                 std::to_string(model_->config.k));
        }
        const std::size_t id = batch_counter_++;
        for (nn::ParamSet* p : model_->all_sets()) p->zero_grad();

        CutActivation cut = party_b_.forward(batch->b, true, &rng);
        if (log_) log_->send(id, cut);
        const double loss = party_a_.forward(batch->a, cut, true, &rng);
        if (!std::isfinite(loss)) {
            throw NumericError("non-finite loss at batch " + std::to_string(n) + " of the epoch");
        }
        CutGradient grad = party_a_.backward();
        if (log_) log_->send(id, grad);
        party_b_.backward(grad);

        ++step_;
        for (nn::ParamSet* p : party_a_.params()) opt_a_.step(*p, step_);
        opt_b_.step(party_b_.params(), step_);
        total += loss;
        ++n;
    }
    if (n == 0) throw InputError("training stream is empty");
    return total / static_cast<double>(n);
}

nn::Tensor FedSimTrainer::predict(linkage::BatchStream& batches) { return vfl::predict(*model_, batches); }

double train_epoch(ModelBundle& model, linkage::BatchStream& batches, const nn::OptimizerConfig& optimizer,
                   std::mt19937_64& rng, MessageLog* log) {
    FedSimTrainer trainer(model, optimizer, log);
    return trainer.train_epoch(batches, rng);
}

nn::Tensor predict(ModelBundle& model, linkage::BatchStream& batches) {
    PartyA a(model);
    PartyB b(model);
    std::vector<double> values;
    std::size_t width = model.config.output_width();
    std::size_t rows = 0;
    batches.rewind();
    while (auto batch = batches.next()) {
        CutActivation cut = b.forward(batch->b, false, nullptr);
        nn::Tensor p = a.predict(batch->a, cut);
        values.insert(values.end(), p.data().begin(), p.data().end());
        rows += p.rows();
    }
    return nn::Tensor({rows, width}, std::move(values));
}

}  // namespace fedsim::vfl
