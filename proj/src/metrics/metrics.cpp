#include "fedsim/metrics.hpp"

#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw DimensionError("prediction and truth lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
    if (a == 0) throw InputError("metrics need at least one row");
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred.size(), truth.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(ss / static_cast<double>(pred.size()));
}

double r_squared(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred.size(), truth.size());
    double mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ss_res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) throw InputError("R^2 is undefined for a constant target");
    return 1.0 - ss_res / ss_tot;
}

double accuracy(const nn::Tensor& pred, const nn::Tensor& truth) {
    check_lengths(pred.rows(), truth.rows());
    if (truth.cols() != 1) throw DimensionError("accuracy expects a label column");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        std::size_t cls = 0;
        if (pred.cols() == 1) {
            cls = pred(r, 0) >= 0.5 ? 1 : 0;
        } else {
            for (std::size_t c = 1; c < pred.cols(); ++c)
                if (pred(r, c) > pred(r, cls)) cls = c;
        }
        hits += static_cast<double>(cls) == truth(r, 0) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.rows());
}

Scores task_metrics(vfl::Task task, const nn::Tensor& pred, const nn::Tensor& truth) {
    if (task == vfl::Task::regression) {
        return {{"rmse", rmse(pred.data(), truth.data())}, {"r2", r_squared(pred.data(), truth.data())}};
    }
    return {{"accuracy", accuracy(pred, truth)}};
}

double selection_score(vfl::Task task, const nn::Tensor& pred, const nn::Tensor& truth) {
    if (task == vfl::Task::regression) return -rmse(pred.data(), truth.data());
    return accuracy(pred, truth);
}

}  // namespace fedsim::metrics
