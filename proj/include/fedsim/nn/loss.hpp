#pragma once

#include <string_view>

#include "fedsim/nn/autodiff.hpp"

namespace fedsim::nn {

enum class LossKind { mse, binary_cross_entropy, softmax_cross_entropy };

LossKind parse_loss_kind(std::string_view name);

/// Mean loss over rows, recorded on the prediction's tape.
///
/// - mse: `pred` and `target` share a shape.
/// - binary_cross_entropy: `pred` holds probabilities (clamped to
///   [1e-12, 1 - 1e-12]); `target` holds 0/1 labels.
/// - softmax_cross_entropy: `pred` holds logits (rows x classes); `target` is a
///   column of class indices.
Var loss(Var pred, const Tensor& target, LossKind kind);

}  // namespace fedsim::nn
