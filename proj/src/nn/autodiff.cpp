#include "fedsim/nn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim::nn {

const Tensor& Var::value() const {
    if (!tape) throw StateError("use of an unbound Var");
    return tape->value(*this);
}

void Tape::check_owned(Var v, const char* what) const {
    if (v.tape != this || v.id >= nodes_.size()) {
        throw StateError(std::string(what) + ": node was not recorded on this tape");
    }
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
    return {this, nodes_.size() - 1};
}

Var Tape::input(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, requires_grad});
    return {this, nodes_.size() - 1};
}

Var Tape::param(Param& p) {
    nodes_.push_back(Node{p.value, {}, {}, &p, true});
    return {this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const Var& in : inputs) {
        check_owned(in, "op input");
        needs = needs || nodes_[in.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
    return {this, nodes_.size() - 1};
}

Tensor& Tape::grad_of(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

const Tensor& Tape::value(Var v) const {
    check_owned(v, "value");
    return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
    check_owned(v, "grad");
    if (!backward_done_) throw StateError("gradient requested before backward");
    const Node& n = nodes_[v.id];
    if (!n.requires_grad) throw StateError("node does not require a gradient");
    return n.grad;
}

void Tape::backward(Var loss) {
    if (nodes_.empty()) throw StateError("backward called before any forward pass");
    check_owned(loss, "backward");
    const Tensor& v = nodes_[loss.id].value;
    if (v.size() != 1) throw StateError("backward(loss) requires a scalar node, got " + v.shape_string());
    Tensor seed(v.shape(), 1.0);
    backward(loss, seed);
}

void Tape::backward(Var output, const Tensor& upstream) {
    if (nodes_.empty()) throw StateError("backward called before any forward pass");
    check_owned(output, "backward");
    if (backward_done_) throw StateError("backward already ran on this tape");
    Node& out = nodes_[output.id];
    if (!out.value.same_shape(upstream)) {
        throw DimensionError("upstream gradient " + upstream.shape_string() + " does not match output " +
                             out.value.shape_string());
    }
    for (auto& n : nodes_) {
        if (n.requires_grad) n.grad = Tensor(n.value.shape());
    }
    backward_done_ = true;
    if (!out.requires_grad) return;
    auto g = out.grad.data();
    auto u = upstream.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += u[i];
    run_backward(output.id);
}

void Tape::run_backward(std::size_t from) {
    for (std::size_t k = from + 1; k-- > 0;) {
        Node& n = nodes_[k];
        if (!n.requires_grad) continue;
        if (n.backward) n.backward(*this, k);
        if (n.param) {
            auto dst = n.param->grad.data();
            auto src = n.grad.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    }
}

namespace {

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + t.shape_string());
}

void accumulate(Tape& tape, Var v, const Tensor& delta) {
    if (!tape.requires_grad(v.id)) return;
    auto g = tape.grad_of(v.id).data();
    auto d = delta.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

}  // namespace

Var matmul(Var x, Var w) {
    Tape& tape = *x.tape;
    const Tensor& a = x.value();
    const Tensor& b = w.value();
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + a.shape_string() + " x " + b.shape_string());
    }
    const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
    Tensor out({n, m});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < inner; ++k) {
            const double av = a(r, k);
            if (av == 0.0) continue;
            for (std::size_t c = 0; c < m; ++c) out(r, c) += av * b(k, c);
        }
    }
    const Var ins[] = {x, w};
    return tape.push(std::move(out), ins, [x, w, n, inner, m](Tape& t, std::size_t self) {
        const Tensor& g = t.upstream(self);
        const Tensor& a = t.value_of(x.id);
        const Tensor& b = t.value_of(w.id);
        if (t.requires_grad(x.id)) {
            Tensor& ga = t.grad_of(x.id);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t k = 0; k < inner; ++k) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < m; ++c) s += g(r, c) * b(k, c);
                    ga(r, k) += s;
                }
        }
        if (t.requires_grad(w.id)) {
            Tensor& gb = t.grad_of(w.id);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t k = 0; k < inner; ++k) {
                    const double av = a(r, k);
                    if (av == 0.0) continue;
                    for (std::size_t c = 0; c < m; ++c) gb(k, c) += av * g(r, c);
                }
        }
    });
}

Var add_bias(Var x, Var bias) {
    Tape& tape = *x.tape;
    const Tensor& a = x.value();
    const Tensor& b = bias.value();
    require_rank2(a, "add_bias");
    if (b.size() != a.cols()) {
        throw DimensionError("add_bias: bias " + b.shape_string() + " for input " + a.shape_string());
    }
    Tensor out = a;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) += b[c];
    const Var ins[] = {x, bias};
    return tape.push(std::move(out), ins, [x, bias](Tape& t, std::size_t self) {
        const Tensor& g = t.upstream(self);
        accumulate(t, x, g);
        if (t.requires_grad(bias.id)) {
            Tensor& gb = t.grad_of(bias.id);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
        }
    });
}

Var add(Var a, Var b) {
    Tape& tape = *a.tape;
    if (!a.value().same_shape(b.value())) {
        throw DimensionError("add: " + a.value().shape_string() + " vs " + b.value().shape_string());
    }
    Tensor out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    const Var ins[] = {a, b};
    return tape.push(std::move(out), ins, [a, b](Tape& t, std::size_t self) {
        accumulate(t, a, t.upstream(self));
        accumulate(t, b, t.upstream(self));
    });
}

Var scale(Var x, double factor) {
    Tape& tape = *x.tape;
    Tensor out = x.value();
    for (double& v : out.data()) v *= factor;
    const Var ins[] = {x};
    return tape.push(std::move(out), ins, [x, factor](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        auto g = t.grad_of(x.id).data();
        auto u = t.upstream(self).data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * u[i];
    });
}

Var relu(Var x) {
    Tape& tape = *x.tape;
    Tensor out = x.value();
    for (double& v : out.data()) v = v < 0.0 ? 0.0 : v;
    const Var ins[] = {x};
    return tape.push(std::move(out), ins, [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        auto g = t.grad_of(x.id).data();
        auto u = t.upstream(self).data();
        auto in = t.value_of(x.id).data();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (in[i] > 0.0) g[i] += u[i];
    });
}

Var sigmoid(Var x) {
    Tape& tape = *x.tape;
    Tensor out = x.value();
    for (double& v : out.data()) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    const Var ins[] = {x};
    return tape.push(std::move(out), ins, [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        auto g = t.grad_of(x.id).data();
        auto u = t.upstream(self).data();
        auto y = t.value_of(self).data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += u[i] * y[i] * (1.0 - y[i]);
    });
}

Var dropout(Var x, double rate, std::mt19937_64* rng, bool train_mode) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
    if (!train_mode || rate == 0.0) return x;
    if (!rng) throw ConfigError("dropout in training mode needs an explicit RNG");
    Tape& tape = *x.tape;
    tape.mark_stochastic();
    std::bernoulli_distribution keep(1.0 - rate);
    Tensor mask(x.value().shape());
    const double inv = 1.0 / (1.0 - rate);
    for (double& m : mask.data()) m = keep(*rng) ? inv : 0.0;
    Tensor out = x.value();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= mask[i];
    const Var ins[] = {x};
    return tape.push(std::move(out), ins, [x, mask = std::move(mask)](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        auto g = t.grad_of(x.id).data();
        auto u = t.upstream(self).data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += u[i] * mask[i];
    });
}

Var concat_cols(Var a, Var b) {
    Tape& tape = *a.tape;
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_rank2(x, "concat_cols");
    require_rank2(y, "concat_cols");
    if (x.rows() != y.rows()) {
        throw DimensionError("concat_cols: " + x.shape_string() + " and " + y.shape_string());
    }
    const std::size_t ca = x.cols(), cb = y.cols();
    Tensor out({x.rows(), ca + cb});
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::copy_n(x.row(r).begin(), ca, out.row(r).begin());
        std::copy_n(y.row(r).begin(), cb, out.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
    }
    const Var ins[] = {a, b};
    return tape.push(std::move(out), ins, [a, b, ca, cb](Tape& t, std::size_t self) {
        const Tensor& g = t.upstream(self);
        if (t.requires_grad(a.id)) {
            Tensor& ga = t.grad_of(a.id);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
        }
        if (t.requires_grad(b.id)) {
            Tensor& gb = t.grad_of(b.id);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
        }
    });
}

Var repeat_rows(Var x, std::size_t times) {
    if (times == 0) throw ConfigError("repeat_rows: times must be positive");
    Tape& tape = *x.tape;
    const Tensor& in = x.value();
    require_rank2(in, "repeat_rows");
    Tensor out({in.rows() * times, in.cols()});
    for (std::size_t r = 0; r < in.rows(); ++r)
        for (std::size_t k = 0; k < times; ++k) std::copy(in.row(r).begin(), in.row(r).end(), out.row(r * times + k).begin());
    const Var ins[] = {x};
    return tape.push(std::move(out), ins, [x, times](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        const Tensor& g = t.upstream(self);
        Tensor& gx = t.grad_of(x.id);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gx(r / times, c) += g(r, c);
    });
}

Var scale_rows(Var x, Var w) {
    Tape& tape = *x.tape;
    const Tensor& in = x.value();
    const Tensor& wv = w.value();
    require_rank2(in, "scale_rows");
    if (wv.size() != in.rows()) {
        throw DimensionError("scale_rows: weights " + wv.shape_string() + " for input " + in.shape_string());
    }
    Tensor out = in;
    for (std::size_t r = 0; r < in.rows(); ++r)
        for (double& v : out.row(r)) v *= wv[r];
    const Var ins[] = {x, w};
    return tape.push(std::move(out), ins, [x, w](Tape& t, std::size_t self) {
        const Tensor& g = t.upstream(self);
        const Tensor& in = t.value_of(x.id);
        const Tensor& wv = t.value_of(w.id);
        if (t.requires_grad(x.id)) {
            Tensor& gx = t.grad_of(x.id);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += g(r, c) * wv[r];
        }
        if (t.requires_grad(w.id)) {
            Tensor& gw = t.grad_of(w.id);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * in(r, c);
                gw[r] += s;
            }
        }
    });
}

Var permute_rows(Var x, std::vector<std::size_t> perm) {
    Tape& tape = *x.tape;
    const Tensor& in = x.value();
    require_rank2(in, "permute_rows");
    if (perm.size() != in.rows()) throw DimensionError("permute_rows: permutation length mismatch");
    std::vector<bool> seen(perm.size(), false);
    for (std::size_t p : perm) {
        if (p >= perm.size() || seen[p]) throw InputError("permute_rows: not a permutation");
        seen[p] = true;
    }
    Tensor out(in.shape());
    for (std::size_t r = 0; r < perm.size(); ++r) std::copy(in.row(perm[r]).begin(), in.row(perm[r]).end(), out.row(r).begin());
    const Var ins[] = {x};
    return tape.push(std::move(out), ins, [x, perm = std::move(perm)](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        const Tensor& g = t.upstream(self);
        Tensor& gx = t.grad_of(x.id);
        for (std::size_t r = 0; r < perm.size(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gx(perm[r], c) += g(r, c);
    });
}

Var group_mean(Var x, std::size_t group) {
    Tape& tape = *x.tape;
    const Tensor& in = x.value();
    require_rank2(in, "group_mean");
    if (group == 0 || in.rows() % group != 0) {
        throw DimensionError("group_mean: " + std::to_string(in.rows()) + " rows not divisible by " + std::to_string(group));
    }
    const std::size_t blocks = in.rows() / group;
    Tensor out({blocks, in.cols()});
    for (std::size_t r = 0; r < in.rows(); ++r)
        for (std::size_t c = 0; c < in.cols(); ++c) out(r / group, c) += in(r, c);
    for (double& v : out.data()) v /= static_cast<double>(group);
    const Var ins[] = {x};
    return tape.push(std::move(out), ins, [x, group](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        const Tensor& g = t.upstream(self);
        Tensor& gx = t.grad_of(x.id);
        const double inv = 1.0 / static_cast<double>(group);
        for (std::size_t r = 0; r < gx.rows(); ++r)
            for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g(r / group, c) * inv;
    });
}

Var sum(Var x) {
    Tape& tape = *x.tape;
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    const Var ins[] = {x};
    return tape.push(Tensor::scalar(s), ins, [x](Tape& t, std::size_t self) {
        if (!t.requires_grad(x.id)) return;
        const double u = t.upstream(self)[0];
        for (double& g : t.grad_of(x.id).data()) g += u;
    });
}

Var mean(Var x) {
    const auto n = x.value().size();
    if (n == 0) throw DimensionError("mean of an empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var conv_rows(Var x, Var kernel, Var bias, std::size_t group) {
    Tape& tape = *x.tape;
    const Tensor& in = x.value();
    const Tensor& ker = kernel.value();
    const Tensor& b = bias.value();
    require_rank2(in, "conv_rows");
    require_rank2(ker, "conv_rows");
    const std::size_t channels = ker.rows(), height = ker.cols();
    if (height == 0 || height > group) {
        throw ConfigError("kernel height " + std::to_string(height) + " must lie in [1, " + std::to_string(group) + "]");
    }
    if (group == 0 || in.rows() % group != 0) {
        throw DimensionError("conv_rows: " + std::to_string(in.rows()) + " rows not divisible by " + std::to_string(group));
    }
    if (b.size() != channels) throw DimensionError("conv_rows: bias size does not match channel count");
    const std::size_t blocks = in.rows() / group;
    const std::size_t positions = group - height + 1;
    const std::size_t feats = in.cols();
    Tensor out({blocks, channels * positions * feats});
    for (std::size_t blk = 0; blk < blocks; ++blk)
        for (std::size_t ch = 0; ch < channels; ++ch)
            for (std::size_t p = 0; p < positions; ++p)
                for (std::size_t f = 0; f < feats; ++f) {
                    double s = b[ch];
                    for (std::size_t q = 0; q < height; ++q) s += ker(ch, q) * in(blk * group + p + q, f);
                    out(blk, (ch * positions + p) * feats + f) = s;
                }
    const Var ins[] = {x, kernel, bias};
    return tape.push(std::move(out), ins,
                     [x, kernel, bias, group, channels, height, positions, feats, blocks](Tape& t, std::size_t self) {
                         const Tensor& g = t.upstream(self);
                         const Tensor& in = t.value_of(x.id);
                         const Tensor& ker = t.value_of(kernel.id);
                         const bool need_x = t.requires_grad(x.id);
                         const bool need_k = t.requires_grad(kernel.id);
                         const bool need_b = t.requires_grad(bias.id);
                         Tensor* gx = need_x ? &t.grad_of(x.id) : nullptr;
                         Tensor* gk = need_k ? &t.grad_of(kernel.id) : nullptr;
                         Tensor* gb = need_b ? &t.grad_of(bias.id) : nullptr;
                         for (std::size_t blk = 0; blk < blocks; ++blk)
                             for (std::size_t ch = 0; ch < channels; ++ch)
                                 for (std::size_t p = 0; p < positions; ++p)
                                     for (std::size_t f = 0; f < feats; ++f) {
                                         const double u = g(blk, (ch * positions + p) * feats + f);
                                         if (gb) (*gb)[ch] += u;
                                         for (std::size_t q = 0; q < height; ++q) {
                                             const std::size_t row = blk * group + p + q;
                                             if (gx) (*gx)(row, f) += ker(ch, q) * u;
                                             if (gk) (*gk)(ch, q) += in(row, f) * u;
                                         }
                                     }
                     });
}

}  // namespace fedsim::nn
