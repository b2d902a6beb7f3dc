#include "fedsim/nn/layers.hpp"

#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim::nn {

MlpSpec MlpSpec::one_hidden(std::string name, std::size_t in, std::size_t hidden, std::size_t out,
                            Activation out_act, double dropout) {
    MlpSpec spec;
    spec.name = std::move(name);
    spec.input_width = in;
    spec.layers = {{hidden, Activation::relu}, {out, out_act}};
    spec.dropout = dropout;
    return spec;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w({fan_in, fan_out});
    for (double& v : w.data()) v = dist(rng);
    return w;
}

void init_mlp(ParamSet& params, const MlpSpec& spec, std::mt19937_64& rng) {
    std::size_t width = spec.input_width;
    if (width == 0) throw ConfigError(spec.name + ": input width must be positive");
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const std::size_t out = spec.layers[i].width;
        if (out == 0) throw ConfigError(spec.name + ": layer " + std::to_string(i) + " has zero width");
        params.add(spec.name + ".W" + std::to_string(i), glorot_uniform(width, out, rng));
        params.add(spec.name + ".b" + std::to_string(i), Tensor({1, out}));
        width = out;
    }
}

namespace {

Var activate(Var x, Activation act) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return relu(x);
        case Activation::sigmoid: return sigmoid(x);
    }
    return x;
}

}  // namespace

Var mlp_forward(Tape& tape, ParamSet& params, const MlpSpec& spec, Var input, bool train_mode,
                std::mt19937_64* rng) {
    Var h = input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        Param& w = params.at(spec.name + ".W" + std::to_string(i));
        Param& b = params.at(spec.name + ".b" + std::to_string(i));
        if (h.value().rank() != 2 || h.value().cols() != w.value.rows()) {
            throw DimensionError(spec.name + " layer " + std::to_string(i) + ": input " + h.value().shape_string() +
                                 " does not match weight " + w.value.shape_string());
        }
        h = add_bias(matmul(h, tape.param(w)), tape.param(b));
        h = activate(h, spec.layers[i].activation);
        if (i + 1 < spec.layers.size()) h = dropout(h, spec.dropout, rng, train_mode);
    }
    return h;
}

std::size_t ConvSpec::output_width(std::size_t k, std::size_t features) const {
    return channels * (k - kernel_height + 1) * features;
}

void init_conv(ParamSet& params, const ConvSpec& spec, std::mt19937_64& rng) {
    if (spec.kernel_height == 0 || spec.channels == 0) throw ConfigError(spec.name + ": empty convolution");
    const double limit = std::sqrt(6.0 / static_cast<double>(spec.kernel_height + spec.channels * spec.kernel_height));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor kernel({spec.channels, spec.kernel_height});
    for (double& v : kernel.data()) v = dist(rng);
    params.add(spec.name + ".kernel", std::move(kernel));
    params.add(spec.name + ".bias", Tensor({1, spec.channels}));
}

Var conv_k1_forward(Tape& tape, ParamSet& params, const ConvSpec& spec, Var input, std::size_t k) {
    if (spec.kernel_height < 1 || spec.kernel_height > k) {
        throw ConfigError("conv kernel height " + std::to_string(spec.kernel_height) + " exceeds K = " + std::to_string(k));
    }
    return conv_rows(input, tape.param(params.at(spec.name + ".kernel")), tape.param(params.at(spec.name + ".bias")), k);
}

}  // namespace fedsim::nn
