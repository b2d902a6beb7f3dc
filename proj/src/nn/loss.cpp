#include "fedsim/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim::nn {

LossKind parse_loss_kind(std::string_view name) {
    if (name == "mse") return LossKind::mse;
    if (name == "binary-cross-entropy" || name == "bce") return LossKind::binary_cross_entropy;
    if (name == "softmax-cross-entropy" || name == "ce") return LossKind::softmax_cross_entropy;
    throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

namespace {

constexpr double kProbClamp = 1e-12;

Var mse_loss(Var pred, const Tensor& target) {
    const Tensor& p = pred.value();
    if (!p.same_shape(target)) throw DimensionError("mse: " + p.shape_string() + " vs " + target.shape_string());
    const double n = static_cast<double>(p.rows());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - target[i]) * (p[i] - target[i]);
    const Var ins[] = {pred};
    return pred.tape->push(Tensor::scalar(s / n), ins, [pred, target, n](Tape& t, std::size_t self) {
        const double u = t.upstream(self)[0];
        const Tensor& p = t.value_of(pred.id);
        Tensor& g = t.grad_of(pred.id);
        for (std::size_t i = 0; i < p.size(); ++i) g[i] += u * 2.0 * (p[i] - target[i]) / n;
    });
}

Var bce_loss(Var pred, const Tensor& target) {
    const Tensor& p = pred.value();
    if (!p.same_shape(target)) throw DimensionError("bce: " + p.shape_string() + " vs " + target.shape_string());
    const double n = static_cast<double>(p.rows());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
        s -= target[i] * std::log(q) + (1.0 - target[i]) * std::log(1.0 - q);
    }
    const Var ins[] = {pred};
    return pred.tape->push(Tensor::scalar(s / n), ins, [pred, target, n](Tape& t, std::size_t self) {
        const double u = t.upstream(self)[0];
        const Tensor& p = t.value_of(pred.id);
        Tensor& g = t.grad_of(pred.id);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] < kProbClamp || p[i] > 1.0 - kProbClamp) continue;
            g[i] += u * (-(target[i] / p[i]) + (1.0 - target[i]) / (1.0 - p[i])) / n;
        }
    });
}

Var softmax_ce_loss(Var logits, const Tensor& target) {
    const Tensor& z = logits.value();
    if (z.rank() != 2 || target.size() != z.rows()) {
        throw DimensionError("softmax-ce: logits " + z.shape_string() + " vs labels " + target.shape_string());
    }
    const std::size_t rows = z.rows(), classes = z.cols();
    Tensor probs(z.shape());
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto cls = static_cast<std::size_t>(target[r]);
        if (target[r] < 0.0 || cls >= classes) throw InputError("softmax-ce: label out of range");
        double mx = z(r, 0);
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, z(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z(r, c) - mx);
        for (std::size_t c = 0; c < classes; ++c) probs(r, c) = std::exp(z(r, c) - mx) / denom;
        s -= (z(r, cls) - mx) - std::log(denom);
    }
    const double n = static_cast<double>(rows);
    const Var ins[] = {logits};
    return logits.tape->push(Tensor::scalar(s / n), ins,
                             [logits, target, probs = std::move(probs), n](Tape& t, std::size_t self) {
                                 const double u = t.upstream(self)[0];
                                 Tensor& g = t.grad_of(logits.id);
                                 for (std::size_t r = 0; r < probs.rows(); ++r)
                                     for (std::size_t c = 0; c < probs.cols(); ++c) {
                                         const double y = static_cast<std::size_t>(target[r]) == c ? 1.0 : 0.0;
                                         g(r, c) += u * (probs(r, c) - y) / n;
                                     }
                             });
}

}  // namespace

Var loss(Var pred, const Tensor& target, LossKind kind) {
    switch (kind) {
        case LossKind::mse: return mse_loss(pred, target);
        case LossKind::binary_cross_entropy: return bce_loss(pred, target);
        case LossKind::softmax_cross_entropy: return softmax_ce_loss(pred, target);
    }
    throw ConfigError("unknown loss kind");
}

}  // namespace fedsim::nn
