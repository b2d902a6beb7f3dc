#include "fedsim/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "fedsim/error.hpp"

namespace fedsim::nn {

namespace {

std::size_t extent_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(extent_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != extent_product(shape_)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string());
    }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::column(std::span<const double> values) {
    return Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const noexcept {
    if (shape_.empty()) return 0;
    if (shape_.size() == 1) return 1;
    return shape_[0];
}

std::size_t Tensor::cols() const noexcept {
    if (shape_.empty()) return 0;
    if (shape_.size() == 1) return shape_[0];
    return data_.size() / shape_[0];
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::string Tensor::shape_string() const {
    std::string out = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape_[i]);
    }
    return out + ")";
}

Param& ParamSet::add(const std::string& key, Tensor value) {
    if (contains(key)) throw ConfigError("duplicate parameter '" + key + "' in " + name_);
    Tensor grad(value.shape());
    entries_.emplace_back(key, Param{std::move(value), std::move(grad)});
    return entries_.back().second;
}

bool ParamSet::contains(const std::string& key) const noexcept {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

Param& ParamSet::at(const std::string& key) {
    for (auto& [k, p] : entries_) {
        if (k == key) return p;
    }
    throw ConfigError("unknown parameter '" + key + "' in " + name_);
}

const Param& ParamSet::at(const std::string& key) const {
    for (const auto& [k, p] : entries_) {
        if (k == key) return p;
    }
    throw ConfigError("unknown parameter '" + key + "' in " + name_);
}

void ParamSet::zero_grad() noexcept {
    for (auto& [k, p] : entries_) p.grad.fill(0.0);
}

std::size_t ParamSet::num_scalars() const noexcept {
    std::size_t n = 0;
    for (const auto& [k, p] : entries_) n += p.value.size();
    return n;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
        if (a.entries_[i].first != b.entries_[i].first) return false;
        if (!(a.entries_[i].second.value == b.entries_[i].second.value)) return false;
    }
    return true;
}

}  // namespace fedsim::nn
