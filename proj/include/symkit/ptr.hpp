#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "symkit/common.hpp"
#include "symkit/tensor.hpp"
#include "symkit/weights_io.hpp"

// Predictive token rectification: a semantic query distilled from the
// template tokens drives a channel-wise modulation field, which the gating
// head turns into a single-plane probabilistic mask over the search features.

namespace symkit {

enum class Activation { Tanh, Gelu };

inline double activate(Activation act, double x) {
    switch (act) {
        case Activation::Tanh:
            return std::tanh(x);
        case Activation::Gelu:
            return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    }
    return x;
}

inline std::string activation_name(Activation act) {
    return act == Activation::Tanh ? "tanh" : "gelu";
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "gelu") return Activation::Gelu;
    throw SchemaError("unknown activation '" + name + "'");
}

struct PtrWeights {
    // Mapping network: (weight [out x in], bias [out]) per layer, activation
    // between layers only.
    std::vector<std::pair<Tensor, Tensor>> mlp;
    Activation activation = Activation::Tanh;
    Tensor dw_kernels;  // [C x k x k]
    Tensor conv1_w;     // [1 x C], single-plane mask head
    Tensor conv1_b;     // [1]

    // All-zero weights: the gating head emits sigmoid(0) = 0.5 everywhere,
    // giving the exact half-scaling regression baseline.
    static PtrWeights neutral(std::size_t channels, std::size_t kernel = 3) {
        PtrWeights w;
        w.mlp.emplace_back(Tensor({channels, channels}), Tensor({channels}));
        w.mlp.emplace_back(Tensor({channels, channels}), Tensor({channels}));
        w.dw_kernels = Tensor({channels, kernel, kernel});
        w.conv1_w = Tensor({1, channels});
        w.conv1_b = Tensor({1});
        return w;
    }

    static PtrWeights seeded(std::size_t channels, std::size_t kernel = 3,
                             std::uint64_t seed = kDefaultWeightSeed) {
        PtrWeights w = neutral(channels, kernel);
        Rng rng(seed);
        const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
        for (auto& [weight, bias] : w.mlp) {
            for (double& v : weight.data()) v = rng.uniform(-bound, bound);
            for (double& v : bias.data()) v = rng.uniform(-0.1, 0.1);
        }
        const double kbound = 1.0 / static_cast<double>(kernel * kernel);
        for (double& v : w.dw_kernels.data()) v = rng.uniform(-kbound, kbound);
        for (double& v : w.conv1_w.data()) v = rng.uniform(-bound, bound);
        return w;
    }
};

struct RectifiedFeatures {
    Tensor f_hat;  // [C x H x W]
    Tensor mask;   // [H x W], values strictly in (0, 1)
};

// Mean of the template tokens over the token axis.
inline Tensor distill_semantic_query(const Tensor& template_tokens) {
    detail::require_rank(template_tokens, 2, "distill_semantic_query");
    if (template_tokens.dim(0) == 0)
        throw std::invalid_argument("distill_semantic_query: empty token set");
    return mean_rows(template_tokens);
}

inline Tensor map_modulation(const Tensor& q_sem, const PtrWeights& weights) {
    detail::require_rank(q_sem, 1, "map_modulation");
    if (weights.mlp.empty()) throw std::invalid_argument("map_modulation: no MLP layers");
    Tensor x = q_sem;
    for (std::size_t layer = 0; layer < weights.mlp.size(); ++layer) {
        const auto& [w, b] = weights.mlp[layer];
        if (w.rank() != 2 || w.dim(1) != x.dim(0) || b.rank() != 1 || b.dim(0) != w.dim(0)) {
            throw std::invalid_argument("map_modulation: layer " + std::to_string(layer) +
                                        " weight " + shape_string(w.shape()) +
                                        " does not accept input of length " +
                                        std::to_string(x.dim(0)));
        }
        Tensor y({w.dim(0)});
        for (std::size_t i = 0; i < w.dim(0); ++i) {
            double acc = b(i);
            for (std::size_t j = 0; j < w.dim(1); ++j) acc += w(i, j) * x(j);
            y(i) = acc;
        }
        if (layer + 1 < weights.mlp.size()) {
            for (double& v : y.data()) v = activate(weights.activation, v);
        }
        x = std::move(y);
    }
    return x;
}

// Depth-wise correlation with the modulation field injected as the
// channel-wise bias, squeezed through a 1x1 head and a logistic gate.
inline Tensor gating_mask(const Tensor& f_x, const Tensor& w_m, const PtrWeights& weights) {
    detail::require_rank(f_x, 3, "gating_mask");
    detail::require_rank(w_m, 1, "gating_mask");
    if (w_m.dim(0) != f_x.dim(0)) {
        throw std::invalid_argument("gating_mask: modulation field length " +
                                    std::to_string(w_m.dim(0)) + " vs " +
                                    std::to_string(f_x.dim(0)) + " channels");
    }
    if (weights.conv1_w.rank() != 2 || weights.conv1_w.dim(0) != 1)
        throw std::invalid_argument("gating_mask: mask head must emit a single channel");
    const Tensor correlated = depthwise_conv(f_x, weights.dw_kernels, w_m);
    const Tensor logits = conv1x1(correlated, weights.conv1_w, weights.conv1_b);
    const Tensor gated = sigmoid(logits);
    Tensor mask({f_x.dim(1), f_x.dim(2)});
    for (std::size_t y = 0; y < f_x.dim(1); ++y)
        for (std::size_t x = 0; x < f_x.dim(2); ++x) mask(y, x) = gated(0, y, x);
    return mask;
}

// f_hat[c,h,w] = f_x[c,h,w] * mask[h,w]
inline RectifiedFeatures rectify(const Tensor& f_x, const Tensor& mask) {
    detail::require_rank(f_x, 3, "rectify");
    detail::require_rank(mask, 2, "rectify");
    if (mask.dim(0) != f_x.dim(1) || mask.dim(1) != f_x.dim(2)) {
        throw std::invalid_argument("rectify: mask " + shape_string(mask.shape()) +
                                    " does not match feature map " + shape_string(f_x.shape()));
    }
    RectifiedFeatures out{Tensor(f_x.shape()), mask};
    for (std::size_t c = 0; c < f_x.dim(0); ++c)
        for (std::size_t y = 0; y < f_x.dim(1); ++y)
            for (std::size_t x = 0; x < f_x.dim(2); ++x)
                out.f_hat(c, y, x) = f_x(c, y, x) * mask(y, x);
    return out;
}

inline RectifiedFeatures apply_ptr(const Tensor& template_tokens, const Tensor& f_x,
                                   const PtrWeights& weights) {
    const Tensor q_sem = distill_semantic_query(template_tokens);
    const Tensor w_m = map_modulation(q_sem, weights);
    return rectify(f_x, gating_mask(f_x, w_m, weights));
}

inline void save_ptr_weights(const std::filesystem::path& path, const PtrWeights& w) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    for (std::size_t i = 0; i < w.mlp.size(); ++i) {
        tensors.emplace_back("mlp." + std::to_string(i) + ".weight", w.mlp[i].first);
        tensors.emplace_back("mlp." + std::to_string(i) + ".bias", w.mlp[i].second);
    }
    tensors.emplace_back("dw_kernels", w.dw_kernels);
    tensors.emplace_back("conv1.weight", w.conv1_w);
    tensors.emplace_back("conv1.bias", w.conv1_b);
    write_weights_file(path, {{"activation", activation_name(w.activation)}}, tensors);
}

inline PtrWeights load_ptr_weights(const std::filesystem::path& path) {
    const WeightsFile file = read_weights_file(path);
    PtrWeights w;
    w.activation = activation_from_name(file.meta_value("activation", "tanh"));
    for (std::size_t i = 0;; ++i) {
        const std::string stem = "mlp." + std::to_string(i);
        bool found = false;
        for (const auto& [name, t] : file.tensors) found |= name == stem + ".weight";
        if (!found) break;
        w.mlp.emplace_back(file.get(stem + ".weight"), file.get(stem + ".bias"));
    }
    if (w.mlp.empty()) throw SchemaError("ptr weights: no MLP layers in " + path.string());
    w.dw_kernels = file.get("dw_kernels");
    w.conv1_w = file.get("conv1.weight");
    w.conv1_b = file.get("conv1.bias");
    return w;
}

}  // namespace symkit
