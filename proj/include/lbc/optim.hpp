#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbc/network.hpp"
#include "lbc/tensor.hpp"

namespace lbc {

struct SgdConfig {
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int warmup_epochs = 0;
  int total_epochs = 1;
};

inline void validate(const SgdConfig& cfg) {
  if (cfg.base_lr <= 0.0) throw std::invalid_argument("base_lr must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw std::invalid_argument("momentum must be in [0, 1)");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
  if (cfg.total_epochs <= 0) throw std::invalid_argument("total_epochs must be positive");
  if (cfg.warmup_epochs < 0 || cfg.warmup_epochs >= cfg.total_epochs) {
    throw std::invalid_argument("warmup_epochs must satisfy 0 <= warmup < total_epochs");
  }
}

/// Linear warmup from 0 to base_lr over warmup_epochs, then cosine decay to 0
/// at total_epochs. Continuous at the junction; lr(warmup_epochs) == base_lr.
inline double lr_at(const SgdConfig& cfg, int epoch) {
  if (epoch < 0 || epoch >= cfg.total_epochs) {
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(cfg.total_epochs) + ")");
  }
  if (epoch < cfg.warmup_epochs) {
    return cfg.base_lr * static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
  }
  const double span = static_cast<double>(cfg.total_epochs - cfg.warmup_epochs);
  const double pos = static_cast<double>(epoch - cfg.warmup_epochs) / span;
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * pos));
}

/// Momentum buffers aligned with the network's weight/bias tensors.
template <typename Real>
struct SgdState {
  std::vector<Tensor<Real>> weight_velocity;
  std::vector<Tensor<Real>> bias_velocity;
};

template <typename Real>
SgdState<Real> make_sgd_state(const Network<Real>& net) {
  SgdState<Real> s;
  s.weight_velocity.resize(net.layers.size());
  s.bias_velocity.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].has_weight()) s.weight_velocity[i] = zeros_like(net.layers[i].weight);
    if (net.layers[i].has_bias) s.bias_velocity[i] = zeros_like(net.layers[i].bias);
  }
  return s;
}

/// One SGD update: v <- momentum*v + (g + wd*w); w <- w - lr*v.
/// Entries with a zero mask bit are skipped entirely, so frozen weights (and
/// their momentum buffers) stay bit-identical for the rest of training.
template <typename Real>
void sgd_step(Network<Real>& net, const Gradients<Real>& grads, SgdState<Real>& state,
              const SgdConfig& cfg, int epoch, const MaskSet<Real>* masks = nullptr) {
  const double lr = lr_at(cfg, epoch);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Layer<Real>& layer = net.layers[li];
    if (layer.has_weight()) {
      const Tensor<Real>& g = grads.weight[li];
      if (!g.same_shape(layer.weight)) {
        throw std::invalid_argument("layer " + std::to_string(li) + ": gradient shape " +
                                    shape_str(g.shape) + " vs weight shape " +
                                    shape_str(layer.weight.shape));
      }
      Tensor<Real>& v = state.weight_velocity[li];
      const Tensor<Real>* mask = (masks != nullptr && !(*masks)[li].empty()) ? &(*masks)[li] : nullptr;
      for (std::size_t k = 0; k < layer.weight.numel(); ++k) {
        if (mask != nullptr && mask->data[k] == Real{0}) continue;
        const double gk = static_cast<double>(g.data[k]) +
                          cfg.weight_decay * static_cast<double>(layer.weight.data[k]);
        const double vk = cfg.momentum * static_cast<double>(v.data[k]) + gk;
        v.data[k] = static_cast<Real>(vk);
        layer.weight.data[k] = static_cast<Real>(static_cast<double>(layer.weight.data[k]) - lr * vk);
      }
    }
    if (layer.has_bias && !grads.bias[li].empty()) {
      Tensor<Real>& v = state.bias_velocity[li];
      const Tensor<Real>& g = grads.bias[li];
      for (std::size_t k = 0; k < layer.bias.numel(); ++k) {
        const double gk = static_cast<double>(g.data[k]) +
                          cfg.weight_decay * static_cast<double>(layer.bias.data[k]);
        const double vk = cfg.momentum * static_cast<double>(v.data[k]) + gk;
        v.data[k] = static_cast<Real>(vk);
        layer.bias.data[k] = static_cast<Real>(static_cast<double>(layer.bias.data[k]) - lr * vk);
      }
    }
  }
}

}  // namespace lbc
