#include "kda/mlp.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "kda/errors.hpp"

namespace kda {

void Mlp::validate() const {
    if (layers.empty()) throw ArgumentError("Mlp: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].bias.size() != layers[l].weight.rows())
            throw DimensionError("Mlp: bias size mismatch in layer " + std::to_string(l));
        if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows())
            throw DimensionError("Mlp: layer " + std::to_string(l) + " input dim mismatch");
    }
    if (layers.back().activation != Activation::Identity)
        throw ArgumentError("Mlp: final layer must be Identity (logits)");
}

bool Mlp::operator==(const Mlp& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l)
        if (!(layers[l].weight == o.layers[l].weight) || layers[l].bias != o.layers[l].bias ||
            layers[l].activation != o.layers[l].activation)
            return false;
    return true;
}

Mlp make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
             std::uint64_t seed) {
    if (hidden.empty()) throw ArgumentError("make_mlp: need at least one hidden layer");
    std::mt19937_64 rng(seed);
    Mlp net;
    std::size_t in = input_dim;
    auto add = [&](std::size_t out, Activation act) {
        Layer layer{Matrix(out, in), std::vector<double>(out, 0.0), act};
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        for (double& w : layer.weight.data()) w = dist(rng);
        net.layers.push_back(std::move(layer));
        in = out;
    };
    for (std::size_t h : hidden) add(h, Activation::ReLU);
    add(output_dim, Activation::Identity);
    return net;
}

std::uint64_t parameter_hash(const Mlp& net) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](double v) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    };
    for (const Layer& l : net.layers) {
        for (double w : l.weight.data()) mix(w);
        for (double b : l.bias) mix(b);
    }
    return h;
}

ForwardCache forward_cached(const Mlp& net, const Matrix& x) {
    if (x.rows() != net.input_dim())
        throw DimensionError("forward: input dim " + std::to_string(x.rows()) + " != network input " +
                             std::to_string(net.input_dim()));
    ForwardCache cache{x, {}};
    cache.outputs.reserve(net.layers.size());
    const Matrix* in = &cache.input;
    for (const Layer& layer : net.layers) {
        Matrix z = matmul(layer.weight, *in);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (double& v : row) {
                v += layer.bias[r];
                if (layer.activation == Activation::ReLU && v < 0.0) v = 0.0;
            }
        }
        cache.outputs.push_back(std::move(z));
        in = &cache.outputs.back();
    }
    return cache;
}

ForwardResult forward(const Mlp& net, const Matrix& x) {
    ForwardCache cache = forward_cached(net, x);
    ForwardResult out;
    const std::size_t tap = net.layers.size() >= 2 ? net.before_fc_tap() : net.logits_tap();
    out.taps.emplace(tap, FeatureBlock{cache.outputs[tap], "before_fc"});
    out.taps.emplace(net.logits_tap(), FeatureBlock{cache.outputs.back(), "after_fc"});
    out.logits = std::move(cache.outputs.back());
    return out;
}

MlpGrads backprop(const Mlp& net, const ForwardCache& cache, const Matrix& dlogits,
                  const std::map<std::size_t, Matrix>& tap_grads) {
    const std::size_t L = net.layers.size();
    MlpGrads g;
    g.weight.resize(L);
    g.bias.resize(L);

    Matrix delta = dlogits;  // dL/d(output of layer l)
    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = net.layers[li];
        if (auto it = tap_grads.find(li); it != tap_grads.end()) delta = delta + it->second;
        if (layer.activation == Activation::ReLU) {
            const Matrix& out = cache.outputs[li];
            auto dd = delta.data();
            auto od = out.data();
            for (std::size_t k = 0; k < dd.size(); ++k)
                if (od[k] <= 0.0) dd[k] = 0.0;
        }
        const Matrix& in = li == 0 ? cache.input : cache.outputs[li - 1];
        g.weight[li] = matmul_nt(delta, in);
        g.bias[li].assign(delta.rows(), 0.0);
        for (std::size_t r = 0; r < delta.rows(); ++r)
            for (double v : delta.row(r)) g.bias[li][r] += v;
        if (li > 0) delta = matmul_tn(layer.weight, delta);
    }
    return g;
}

void sgd_update(Mlp& net, const MlpGrads& grads, SgdState& state, const SgdParams& p) {
    const std::size_t L = net.layers.size();
    if (state.weight_velocity.size() != L) {
        state.weight_velocity.clear();
        state.bias_velocity.clear();
        for (const Layer& l : net.layers) {
            state.weight_velocity.emplace_back(l.weight.rows(), l.weight.cols());
            state.bias_velocity.emplace_back(l.bias.size(), 0.0);
        }
    }
    for (std::size_t li = 0; li < L; ++li) {
        auto w = net.layers[li].weight.data();
        auto gw = grads.weight[li].data();
        auto vw = state.weight_velocity[li].data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            vw[k] = p.momentum * vw[k] + gw[k] + p.weight_decay * w[k];
            w[k] -= p.lr * vw[k];
        }
        auto& b = net.layers[li].bias;
        auto& vb = state.bias_velocity[li];
        for (std::size_t k = 0; k < b.size(); ++k) {
            vb[k] = p.momentum * vb[k] + grads.bias[li][k] + p.weight_decay * b[k];
            b[k] -= p.lr * vb[k];
        }
    }
}

}  // namespace kda
