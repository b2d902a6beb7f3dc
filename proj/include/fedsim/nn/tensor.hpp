#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedsim::nn {

/// Dense row-major tensor of doubles.
///
/// Most of the engine works on rank-2 tensors (rows x cols); higher ranks are
/// only carried through for storage and checkpointing.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
    static Tensor column(std::span<const double> values);
    static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Rank-2 accessors. A rank-1 tensor is treated as a single row.
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols(), cols()}; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }

    void fill(double v) noexcept;
    bool all_finite() const noexcept;
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    std::string shape_string() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

struct Param {
    Tensor value;
    Tensor grad;
};

/// Named parameter tensors, each paired with a gradient buffer of the same shape.
/// Iteration order is insertion order, which keeps initialization and
/// serialization deterministic.
class ParamSet {
public:
    ParamSet() = default;
    explicit ParamSet(std::string name) : name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

    Param& add(const std::string& key, Tensor value);
    bool contains(const std::string& key) const noexcept;
    Param& at(const std::string& key);
    const Param& at(const std::string& key) const;

    void zero_grad() noexcept;
    std::size_t num_scalars() const noexcept;

    auto begin() noexcept { return entries_.begin(); }
    auto end() noexcept { return entries_.end(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }
    std::size_t size() const noexcept { return entries_.size(); }

    friend bool operator==(const ParamSet& a, const ParamSet& b);

private:
    std::string name_;
    std::vector<std::pair<std::string, Param>> entries_;
};

}  // namespace fedsim::nn
