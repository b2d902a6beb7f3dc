#pragma once

#include <functional>
#include <vector>

#include "fedsim/nn/autodiff.hpp"
#include "fedsim/nn/tensor.hpp"

namespace fedsim::nn {

/// Evaluates the model loss at the current parameter values. When
/// `with_gradients` is set it must also accumulate d(loss)/d(param) into the
/// gradient buffers (they are zeroed by the caller).
using LossClosure = std::function<double(bool with_gradients)>;

/// Builds a LossClosure from a function recording the loss on a fresh tape.
/// Calling it throws DeterminismError if the tape drew random numbers.
LossClosure tape_closure(std::function<Var(Tape&)> build);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
};

/// Central finite differences against analytic gradients over every scalar
/// of every set. Error per scalar is |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check(const LossClosure& closure, const std::vector<ParamSet*>& params, double step = 1e-5);

}  // namespace fedsim::nn
