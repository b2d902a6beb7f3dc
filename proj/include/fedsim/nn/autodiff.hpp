#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "fedsim/nn/tensor.hpp"

namespace fedsim::nn {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    bool valid() const noexcept { return tape != nullptr; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
/// node list backwards is a valid topological order for backpropagation.
///
/// Leaves come in three flavours: constants (no gradient), marked inputs
/// (gradient readable after backward, used for the cut layer), and parameter
/// leaves whose gradient is accumulated into the owning ParamSet.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var input(Tensor value, bool requires_grad = true);
    Var param(Param& p);

    /// Seeds d(loss)/d(loss) = 1; `loss` must be a 1x1 node of this tape.
    void backward(Var loss);
    /// Seeds an arbitrary upstream gradient, e.g. the cut-layer gradient
    /// received from the other party.
    void backward(Var output, const Tensor& upstream);

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;

    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    bool stochastic() const noexcept { return stochastic_; }
    void mark_stochastic() noexcept { stochastic_ = true; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Op implementation hooks.
    Var push(Tensor value, std::span<const Var> inputs, BackwardFn backward);
    Tensor& grad_of(std::size_t id);
    const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
    const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        Param* param = nullptr;
        bool requires_grad = false;
    };

    void check_owned(Var v, const char* what) const;
    void run_backward(std::size_t from);

    std::vector<Node> nodes_;
    bool stochastic_ = false;
    bool backward_done_ = false;
};

// Dense ops. All operate on rank-2 values.
Var matmul(Var x, Var w);
Var add_bias(Var x, Var bias);
Var add(Var a, Var b);
Var scale(Var x, double factor);
Var relu(Var x);
Var sigmoid(Var x);
Var dropout(Var x, double rate, std::mt19937_64* rng, bool train_mode);
Var concat_cols(Var a, Var b);
/// Row r of `x` becomes rows [r*times, (r+1)*times) of the result.
Var repeat_rows(Var x, std::size_t times);
/// Multiplies row r of `x` by w(r, 0); `w` is a column.
Var scale_rows(Var x, Var w);
/// Result row r is input row perm[r]; perm must be a permutation.
Var permute_rows(Var x, std::vector<std::size_t> perm);
/// Column means over consecutive groups of `group` rows.
Var group_mean(Var x, std::size_t group);
Var sum(Var x);
Var mean(Var x);
/// Convolution along consecutive blocks of `group` rows with kernel
/// (channels x kernel_height) and one bias per channel. Columns are never
/// mixed. Output: one row per block, laid out channel-major, then window
/// position, then column.
Var conv_rows(Var x, Var kernel, Var bias, std::size_t group);

}  // namespace fedsim::nn
