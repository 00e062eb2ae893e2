#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lbc/tensor.hpp"

namespace lbc {

enum class LayerKind : std::uint8_t { kLinear = 0, kConv2d = 1, kRelu = 2, kFlatten = 3 };

inline std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

/// One layer of the toy engine. Weight layouts: linear (out, in),
/// conv2d (out, in, kh, kw) at stride 1 with no padding.
template <typename Real>
struct Layer {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  Tensor<Real> weight;
  Tensor<Real> bias;
  bool has_bias = false;
  bool sparsifiable = false;

  bool has_weight() const { return kind == LayerKind::kLinear || kind == LayerKind::kConv2d; }
};

template <typename Real>
struct Network {
  std::vector<Layer<Real>> layers;
};

/// Per-layer weight masks aligned with Network::layers. An empty tensor means
/// "no mask" for that layer.
template <typename Real>
using MaskSet = std::vector<Tensor<Real>>;

template <typename Real>
Layer<Real> linear_layer(std::size_t in, std::size_t out, std::string name, bool bias = true) {
  Layer<Real> l;
  l.kind = LayerKind::kLinear;
  l.name = std::move(name);
  l.weight = Tensor<Real>({out, in});
  if (bias) {
    l.bias = Tensor<Real>({out});
    l.has_bias = true;
  }
  l.sparsifiable = true;
  return l;
}

template <typename Real>
Layer<Real> conv2d_layer(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                         std::string name, bool bias = true) {
  Layer<Real> l;
  l.kind = LayerKind::kConv2d;
  l.name = std::move(name);
  l.weight = Tensor<Real>({out_ch, in_ch, kh, kw});
  if (bias) {
    l.bias = Tensor<Real>({out_ch});
    l.has_bias = true;
  }
  l.sparsifiable = true;
  return l;
}

template <typename Real>
Layer<Real> relu_layer(std::string name = "relu") {
  Layer<Real> l;
  l.kind = LayerKind::kRelu;
  l.name = std::move(name);
  return l;
}

template <typename Real>
Layer<Real> flatten_layer(std::string name = "flatten") {
  Layer<Real> l;
  l.kind = LayerKind::kFlatten;
  l.name = std::move(name);
  return l;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weight init — the common default
/// for linear and conv layers — deterministic in the seed. Biases start at
/// zero.
template <typename Real>
void init_weights(Network<Real>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers) {
    if (!layer.has_weight()) continue;
    std::size_t fan_in = layer.weight.extent(1);
    for (std::size_t a = 2; a < layer.weight.rank(); ++a) fan_in *= layer.weight.extent(a);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    fill_uniform(layer.weight, rng, -bound, bound);
    if (layer.has_bias) {
      for (auto& v : layer.bias.data) v = Real{0};
    }
  }
}

template <typename Real>
struct ForwardCache {
  std::vector<Tensor<Real>> inputs;  // input seen by each layer
  Tensor<Real> output;
  bool valid = false;
};

namespace detail {

template <typename Real>
[[noreturn]] void shape_error(std::size_t layer_index, const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(layer_index) + ": " + what);
}

template <typename Real>
Tensor<Real> masked_weight(const Layer<Real>& layer, const Tensor<Real>* mask,
                           std::size_t layer_index) {
  if (mask == nullptr || mask->empty()) return layer.weight;
  if (!mask->same_shape(layer.weight)) {
    shape_error<Real>(layer_index, "mask shape " + shape_str(mask->shape) +
                                       " does not match weight shape " + shape_str(layer.weight.shape));
  }
  Tensor<Real> w = layer.weight;
  for (std::size_t i = 0; i < w.numel(); ++i) w.data[i] *= mask->data[i];
  return w;
}

template <typename Real>
Tensor<Real> linear_forward(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& bias,
                            bool has_bias, std::size_t layer_index) {
  if (x.rank() != 2) shape_error<Real>(layer_index, "linear expects 2-D input, got " + shape_str(x.shape));
  const std::size_t batch = x.extent(0), in = x.extent(1);
  const std::size_t out = w.extent(0);
  if (w.extent(1) != in) {
    shape_error<Real>(layer_index, "input width " + std::to_string(in) + " vs weight " + shape_str(w.shape));
  }
  Tensor<Real> y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      Real acc = has_bias ? bias.data[o] : Real{0};
      for (std::size_t i = 0; i < in; ++i) acc += x.at(b, i) * w.at(o, i);
      y.at(b, o) = acc;
    }
  }
  return y;
}

template <typename Real>
Tensor<Real> conv2d_forward(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& bias,
                            bool has_bias, std::size_t layer_index) {
  if (x.rank() != 4) shape_error<Real>(layer_index, "conv2d expects (b, c, h, w) input, got " + shape_str(x.shape));
  const std::size_t batch = x.extent(0), cin = x.extent(1), h = x.extent(2), ww = x.extent(3);
  const std::size_t cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (w.extent(1) != cin) {
    shape_error<Real>(layer_index, "input channels " + std::to_string(cin) + " vs weight " + shape_str(w.shape));
  }
  if (h < kh || ww < kw) {
    shape_error<Real>(layer_index, "image " + shape_str(x.shape) + " smaller than kernel " + shape_str(w.shape));
  }
  const std::size_t oh = h - kh + 1, ow = ww - kw + 1;
  Tensor<Real> y({batch, cout, oh, ow});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t yy = 0; yy < oh; ++yy) {
        for (std::size_t xx = 0; xx < ow; ++xx) {
          Real acc = has_bias ? bias.data[o] : Real{0};
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                acc += x.at(b, c, yy + ky, xx + kx) * w.at(o, c, ky, kx);
              }
            }
          }
          y.at(b, o, yy, xx) = acc;
        }
      }
    }
  }
  return y;
}

}  // namespace detail

/// Runs the network on `input`. When `masks` is given, each masked layer
/// computes with the element-wise product of mask and weight; this is done by
/// materializing the masked weights and running the identical dense kernel,
/// so results match a network whose weights were pre-multiplied, bit for bit.
template <typename Real>
Tensor<Real> forward(const Network<Real>& net, const Tensor<Real>& input,
                     const MaskSet<Real>* masks = nullptr, ForwardCache<Real>* cache = nullptr) {
  if (masks != nullptr && masks->size() != net.layers.size()) {
    throw std::invalid_argument("mask set size " + std::to_string(masks->size()) +
                                " does not match layer count " + std::to_string(net.layers.size()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->valid = false;
  }
  Tensor<Real> x = input;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Layer<Real>& layer = net.layers[li];
    if (cache != nullptr) cache->inputs.push_back(x);
    switch (layer.kind) {
      case LayerKind::kLinear: {
        Tensor<Real> w = detail::masked_weight(layer, masks ? &(*masks)[li] : nullptr, li);
        x = detail::linear_forward(x, w, layer.bias, layer.has_bias, li);
        break;
      }
      case LayerKind::kConv2d: {
        Tensor<Real> w = detail::masked_weight(layer, masks ? &(*masks)[li] : nullptr, li);
        x = detail::conv2d_forward(x, w, layer.bias, layer.has_bias, li);
        break;
      }
      case LayerKind::kRelu: {
        for (auto& v : x.data) v = v > Real{0} ? v : Real{0};
        break;
      }
      case LayerKind::kFlatten: {
        if (x.rank() < 2) detail::shape_error<Real>(li, "flatten needs a batch dimension");
        const std::size_t batch = x.extent(0);
        const std::size_t width = x.numel() / batch;  // before the move empties x.data
        x = Tensor<Real>({batch, width}, std::move(x.data));
        break;
      }
    }
    check_finite(x, "output of layer " + std::to_string(li) + " (" + layer.name + ")");
  }
  if (cache != nullptr) {
    cache->output = x;
    cache->valid = true;
  }
  return x;
}

/// Gradients w.r.t. the masked weight product and biases, aligned with layers.
/// Entries under a zero mask bit are still populated; it is the optimizer's
/// job never to apply them.
template <typename Real>
struct Gradients {
  std::vector<Tensor<Real>> weight;
  std::vector<Tensor<Real>> bias;
};

template <typename Real>
Gradients<Real> backward(const Network<Real>& net, const ForwardCache<Real>& cache,
                         const Tensor<Real>& loss_grad, const MaskSet<Real>* masks = nullptr) {
  if (!cache.valid || cache.inputs.size() != net.layers.size()) {
    throw std::logic_error("backward called without a matching forward pass");
  }
  Gradients<Real> grads;
  grads.weight.resize(net.layers.size());
  grads.bias.resize(net.layers.size());

  Tensor<Real> dy = loss_grad;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const Layer<Real>& layer = net.layers[i];
    const Tensor<Real>& x = cache.inputs[i];
    switch (layer.kind) {
      case LayerKind::kLinear: {
        Tensor<Real> w = detail::masked_weight(layer, masks ? &(*masks)[i] : nullptr, i);
        const std::size_t batch = x.extent(0), in = x.extent(1), out = w.extent(0);
        Tensor<Real> dw({out, in});
        for (std::size_t o = 0; o < out; ++o) {
          for (std::size_t ii = 0; ii < in; ++ii) {
            Real acc{0};
            for (std::size_t b = 0; b < batch; ++b) acc += dy.at(b, o) * x.at(b, ii);
            dw.at(o, ii) = acc;
          }
        }
        if (layer.has_bias) {
          Tensor<Real> db({out});
          for (std::size_t o = 0; o < out; ++o) {
            Real acc{0};
            for (std::size_t b = 0; b < batch; ++b) acc += dy.at(b, o);
            db.data[o] = acc;
          }
          grads.bias[i] = std::move(db);
        }
        Tensor<Real> dx({batch, in});
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t ii = 0; ii < in; ++ii) {
            Real acc{0};
            for (std::size_t o = 0; o < out; ++o) acc += dy.at(b, o) * w.at(o, ii);
            dx.at(b, ii) = acc;
          }
        }
        grads.weight[i] = std::move(dw);
        dy = std::move(dx);
        break;
      }
      case LayerKind::kConv2d: {
        Tensor<Real> w = detail::masked_weight(layer, masks ? &(*masks)[i] : nullptr, i);
        const std::size_t batch = x.extent(0), cin = x.extent(1), h = x.extent(2), ww = x.extent(3);
        const std::size_t cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
        const std::size_t oh = h - kh + 1, ow = ww - kw + 1;
        Tensor<Real> dw(w.shape);
        for (std::size_t o = 0; o < cout; ++o) {
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                Real acc{0};
                for (std::size_t b = 0; b < batch; ++b) {
                  for (std::size_t yy = 0; yy < oh; ++yy) {
                    for (std::size_t xx = 0; xx < ow; ++xx) {
                      acc += dy.at(b, o, yy, xx) * x.at(b, c, yy + ky, xx + kx);
                    }
                  }
                }
                dw.at(o, c, ky, kx) = acc;
              }
            }
          }
        }
        if (layer.has_bias) {
          Tensor<Real> db({cout});
          for (std::size_t o = 0; o < cout; ++o) {
            Real acc{0};
            for (std::size_t b = 0; b < batch; ++b) {
              for (std::size_t yy = 0; yy < oh; ++yy) {
                for (std::size_t xx = 0; xx < ow; ++xx) acc += dy.at(b, o, yy, xx);
              }
            }
            db.data[o] = acc;
          }
          grads.bias[i] = std::move(db);
        }
        Tensor<Real> dx(x.shape);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t iy = 0; iy < h; ++iy) {
              for (std::size_t ix = 0; ix < ww; ++ix) {
                Real acc{0};
                for (std::size_t o = 0; o < cout; ++o) {
                  for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                      if (iy < ky || ix < kx) continue;
                      const std::size_t yy = iy - ky, xx = ix - kx;
                      if (yy >= oh || xx >= ow) continue;
                      acc += dy.at(b, o, yy, xx) * w.at(o, c, ky, kx);
                    }
                  }
                }
                dx.at(b, c, iy, ix) = acc;
              }
            }
          }
        }
        grads.weight[i] = std::move(dw);
        dy = std::move(dx);
        break;
      }
      case LayerKind::kRelu: {
        Tensor<Real> dx = dy;
        for (std::size_t k = 0; k < dx.numel(); ++k) {
          if (!(x.data[k] > Real{0})) dx.data[k] = Real{0};
        }
        dy = std::move(dx);
        break;
      }
      case LayerKind::kFlatten: {
        dy = Tensor<Real>(x.shape, std::move(dy.data));
        break;
      }
    }
    check_finite(dy, "gradient into layer " + std::to_string(i));
  }
  return grads;
}

}  // namespace lbc
