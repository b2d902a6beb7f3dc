#include "fedsim/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim::nn {

OptimizerKind parse_optimizer_kind(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    if (name == "lamb") return OptimizerKind::lamb;
    throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::lamb: return "lamb";
    }
    return "?";
}

void OptimizerConfig::validate() const {
    // Zero is allowed: a frozen run is used to check reproducibility.
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be non-negative");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ConfigError("moment coefficients must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(trust_min > 0.0) || trust_max < trust_min) throw ConfigError("invalid trust-ratio range");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

namespace {

double l2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

void Optimizer::step(ParamSet& params, std::size_t step) {
    if (step == 0) throw ConfigError("optimizer step index is 1-based");
    for (auto& [name, p] : params) {
        if (!p.grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + params.name() + "/" + name + "'");
    }
    const double lr = config_.learning_rate;
    const double wd = config_.weight_decay;
    if (config_.kind == OptimizerKind::sgd) {
        for (auto& [name, p] : params) {
            auto th = p.value.data();
            auto g = p.grad.data();
            for (std::size_t i = 0; i < th.size(); ++i) th[i] -= lr * (g[i] + wd * th[i]);
        }
        return;
    }

    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (auto& [name, p] : params) {
        Moments& mo = state_[params.name() + "/" + name];
        if (mo.m.empty()) {
            mo.m = Tensor(p.value.shape());
            mo.v = Tensor(p.value.shape());
        }
        auto th = p.value.data();
        auto g = p.grad.data();
        auto m = mo.m.data();
        auto v = mo.v.data();
        std::vector<double> update(th.size());
        for (std::size_t i = 0; i < th.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mh = m[i] / c1;
            const double vh = v[i] / c2;
            update[i] = mh / (std::sqrt(vh) + config_.epsilon) + wd * th[i];
        }
        double ratio = 1.0;
        if (config_.kind == OptimizerKind::lamb) {
            const double wn = l2(th);
            const double un = l2(update);
            if (wn > 0.0 && un > 0.0) ratio = std::clamp(wn / un, config_.trust_min, config_.trust_max);
        }
        for (std::size_t i = 0; i < th.size(); ++i) th[i] -= lr * ratio * update[i];
    }
}

}  // namespace fedsim::nn
