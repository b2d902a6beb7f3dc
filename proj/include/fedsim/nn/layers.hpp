#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "fedsim/nn/autodiff.hpp"
#include "fedsim/nn/tensor.hpp"

namespace fedsim::nn {

enum class Activation { identity, relu, sigmoid };

struct LayerSpec {
    std::size_t width = 0;
    Activation activation = Activation::identity;
};

/// Fully connected stack. Parameters live in a ParamSet under
/// `<name>.W<i>` / `<name>.b<i>`; dropout (if any) follows every hidden layer.
struct MlpSpec {
    std::string name;
    std::size_t input_width = 0;
    std::vector<LayerSpec> layers;
    double dropout = 0.0;

    std::size_t output_width() const { return layers.empty() ? input_width : layers.back().width; }

    /// input -> hidden (relu) -> output (given activation).
    static MlpSpec one_hidden(std::string name, std::size_t in, std::size_t hidden, std::size_t out,
                              Activation out_act = Activation::identity, double dropout = 0.0);
};

/// Glorot-uniform weights, zero biases.
void init_mlp(ParamSet& params, const MlpSpec& spec, std::mt19937_64& rng);
Var mlp_forward(Tape& tape, ParamSet& params, const MlpSpec& spec, Var input, bool train_mode,
                std::mt19937_64* rng = nullptr);

/// Merge-gate convolution: `channels` kernels of size kernel_height x 1 slid
/// along the neighbor axis only.
struct ConvSpec {
    std::string name;
    std::size_t kernel_height = 1;
    std::size_t channels = 1;

    std::size_t output_width(std::size_t k, std::size_t features) const;
};

void init_conv(ParamSet& params, const ConvSpec& spec, std::mt19937_64& rng);
/// `input` holds consecutive blocks of `k` rows (one block per sample).
Var conv_k1_forward(Tape& tape, ParamSet& params, const ConvSpec& spec, Var input, std::size_t k);

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace fedsim::nn
