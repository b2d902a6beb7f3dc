#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/nn/tensor.hpp"
#include "fedsim/vfl/model.hpp"

namespace fedsim::metrics {

double rmse(std::span<const double> pred, std::span<const double> truth);
/// 1 - SS_res / SS_tot. Throws InputError when the truth has zero variance.
double r_squared(std::span<const double> pred, std::span<const double> truth);
/// Binary: a single probability column thresholded at 0.5 against 0/1 labels.
/// Multiclass: argmax of each row against a column of class ids.
double accuracy(const nn::Tensor& pred, const nn::Tensor& truth);

using Scores = std::vector<std::pair<std::string, double>>;

/// accuracy for classification; rmse and r2 for regression.
Scores task_metrics(vfl::Task task, const nn::Tensor& pred, const nn::Tensor& truth);
/// Single number where larger is better, used for early stopping.
double selection_score(vfl::Task task, const nn::Tensor& pred, const nn::Tensor& truth);

}  // namespace fedsim::metrics
