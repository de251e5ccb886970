#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "kda/gram.hpp"
#include "kda/matrix.hpp"

namespace kda {

enum class Activation { ReLU, Identity };

struct Layer {
    Matrix weight;              // out x in
    std::vector<double> bias;   // out
    Activation activation = Activation::ReLU;
};

// Feedforward network on column-major batches (each column one example).
// The final layer is the FC layer producing logits.
struct Mlp {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.back().weight.rows(); }
    // Output of the last hidden layer, the input to the final FC layer.
    std::size_t before_fc_tap() const { return layers.size() - 2; }
    std::size_t logits_tap() const { return layers.size() - 1; }

    void validate() const;
    bool operator==(const Mlp&) const;
};

// He-initialised ReLU hidden layers followed by an Identity output layer.
Mlp make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
             std::uint64_t seed);

// FNV-1a over the raw parameter bytes; used to confirm a network is unchanged.
std::uint64_t parameter_hash(const Mlp& net);

struct ForwardResult {
    Matrix logits;
    std::map<std::size_t, FeatureBlock> taps;  // tap layer -> its output
};

// Taps default to {before_fc_tap, logits_tap}.
ForwardResult forward(const Mlp& net, const Matrix& x);

// Activations kept for backpropagation: outputs[l] is the output of layer l.
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> outputs;
};

ForwardCache forward_cached(const Mlp& net, const Matrix& x);

struct MlpGrads {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;
};

// Backpropagates dL/d(logits) plus extra gradients injected at layer outputs
// (e.g. a distillation loss on the before-FC tap).
MlpGrads backprop(const Mlp& net, const ForwardCache& cache, const Matrix& dlogits,
                  const std::map<std::size_t, Matrix>& tap_grads = {});

struct SgdState {
    std::vector<Matrix> weight_velocity;
    std::vector<std::vector<double>> bias_velocity;
};

struct SgdParams {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

// v <- momentum v + g + weight_decay w;  w <- w - lr v
void sgd_update(Mlp& net, const MlpGrads& grads, SgdState& state, const SgdParams& params);

}  // namespace kda
