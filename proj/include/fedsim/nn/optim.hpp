#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "fedsim/nn/tensor.hpp"

namespace fedsim::nn {

enum class OptimizerKind { sgd, adam, lamb };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::lamb;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-6;
    // Trust ratio ||theta|| / ||update|| is clipped to this range (LAMB only).
    double trust_min = 0.01;
    double trust_max = 10.0;

    void validate() const;
};

/// Applies one update to every parameter of a ParamSet. Moment buffers are
/// keyed by "<set>/<param>", so one optimizer can serve several sets.
///
///   sgd:  theta -= lr * (g + wd * theta)
///   adam: theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
///   lamb: r = m_hat / (sqrt(v_hat) + eps) + wd * theta,
///         theta -= lr * clip(||theta|| / ||r||) * r
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config);

    const OptimizerConfig& config() const noexcept { return config_; }

    /// `step` is the 1-based update index used for bias correction.
    void step(ParamSet& params, std::size_t step);

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    OptimizerConfig config_;
    std::map<std::string, Moments> state_;
};

}  // namespace fedsim::nn
