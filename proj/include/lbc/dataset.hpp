#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lbc/combinatorics.hpp"
#include "lbc/tensor.hpp"

#include <nlohmann/json.hpp>

namespace lbc {

/// In-memory dataset. Classification sets carry `labels` (and num_classes);
/// regression sets carry `targets`. Inputs are (N, D) or (N, C, H, W).
template <typename Real>
struct Dataset {
  Tensor<Real> inputs;
  std::vector<std::size_t> labels;
  Tensor<Real> targets;
  std::size_t num_classes = 0;

  std::size_t size() const { return inputs.shape.empty() ? 0 : inputs.shape[0]; }
  bool is_classification() const { return !labels.empty(); }
};

/// Deterministic split: the last `val_fraction` of the samples becomes the
/// validation set.
template <typename Real>
std::pair<Dataset<Real>, Dataset<Real>> split_dataset(const Dataset<Real>& ds, double val_fraction = 0.1) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw std::invalid_argument("val_fraction must be in [0, 1)");
  }
  const std::size_t total = ds.size();
  const std::size_t val = static_cast<std::size_t>(static_cast<double>(total) * val_fraction);
  const std::size_t train = total - val;
  const std::size_t row = total == 0 ? 0 : ds.inputs.numel() / total;

  auto take = [&](std::size_t begin, std::size_t count) {
    Dataset<Real> out;
    Shape shape = ds.inputs.shape;
    shape[0] = count;
    out.inputs = Tensor<Real>(shape);
    std::copy(ds.inputs.data.begin() + static_cast<std::ptrdiff_t>(begin * row),
              ds.inputs.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * row),
              out.inputs.data.begin());
    if (!ds.labels.empty()) {
      out.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                        ds.labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
    }
    if (!ds.targets.empty()) {
      const std::size_t trow = ds.targets.numel() / total;
      Shape tshape = ds.targets.shape;
      tshape[0] = count;
      out.targets = Tensor<Real>(tshape);
      std::copy(ds.targets.data.begin() + static_cast<std::ptrdiff_t>(begin * trow),
                ds.targets.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * trow),
                out.targets.data.begin());
    }
    out.num_classes = ds.num_classes;
    return out;
  };
  return {take(0, train), take(train, val)};
}

/// Gathers the rows named by `indices` into a contiguous batch.
template <typename Real>
Dataset<Real> gather_batch(const Dataset<Real>& ds, const std::vector<std::size_t>& indices) {
  Dataset<Real> out;
  Shape shape = ds.inputs.shape;
  shape[0] = indices.size();
  out.inputs = Tensor<Real>(shape);
  const std::size_t row = ds.size() == 0 ? 0 : ds.inputs.numel() / ds.size();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    std::copy(ds.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * row),
              ds.inputs.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * row),
              out.inputs.data.begin() + static_cast<std::ptrdiff_t>(b * row));
  }
  if (!ds.labels.empty()) {
    out.labels.resize(indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) out.labels[b] = ds.labels[indices[b]];
  }
  if (!ds.targets.empty()) {
    const std::size_t trow = ds.targets.numel() / ds.size();
    Shape tshape = ds.targets.shape;
    tshape[0] = indices.size();
    out.targets = Tensor<Real>(tshape);
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const std::size_t i = indices[b];
      std::copy(ds.targets.data.begin() + static_cast<std::ptrdiff_t>(i * trow),
                ds.targets.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * trow),
                out.targets.data.begin() + static_cast<std::ptrdiff_t>(b * trow));
    }
  }
  out.num_classes = ds.num_classes;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators. All are fully determined by their seed.

/// Gaussian blobs, one per class, labels cycling 0,1,...,classes-1 so any
/// contiguous split stays balanced. Class means are rejection-sampled until
/// pairwise separation is at least 6 cluster widths, which keeps the classes
/// linearly separable with overwhelming probability.
///
/// `feature_scale_spread` > 0 multiplies feature k by a fixed random factor
/// 10^U(-spread, spread), mimicking unnormalized measurement units: the
/// information content is unchanged but raw feature (and hence first-layer
/// weight) magnitudes stop being comparable across columns.
template <typename Real>
Dataset<Real> make_blobs(std::size_t samples, std::size_t features, std::size_t classes,
                         std::uint64_t seed, double cluster_std = 1.0,
                         double feature_scale_spread = 0.0) {
  if (classes < 2) throw std::invalid_argument("make_blobs: need at least 2 classes");
  if (features == 0 || samples == 0) throw std::invalid_argument("make_blobs: empty shape");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-5.0, 5.0);
  std::normal_distribution<double> noise(0.0, cluster_std);

  std::vector<std::vector<double>> means;
  const double min_sep = 6.0 * cluster_std;
  while (means.size() < classes) {
    std::vector<double> c(features);
    for (auto& v : c) v = box(rng);
    bool ok = true;
    for (const auto& prev : means) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < features; ++k) d2 += (c[k] - prev[k]) * (c[k] - prev[k]);
      if (std::sqrt(d2) < min_sep) {
        ok = false;
        break;
      }
    }
    if (ok) means.push_back(std::move(c));
  }

  std::vector<double> scale(features, 1.0);
  if (feature_scale_spread > 0.0) {
    std::uniform_real_distribution<double> exponent(-feature_scale_spread, feature_scale_spread);
    for (auto& s : scale) s = std::pow(10.0, exponent(rng));
  }

  Dataset<Real> ds;
  ds.inputs = Tensor<Real>({samples, features});
  ds.labels.resize(samples);
  ds.num_classes = classes;
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t label = i % classes;
    ds.labels[i] = label;
    for (std::size_t k = 0; k < features; ++k) {
      ds.inputs.data[i * features + k] = static_cast<Real>((means[label][k] + noise(rng)) * scale[k]);
    }
  }
  return ds;
}

/// A least-squares regression problem whose generating weight vector is
/// exactly n:m sparse: within every group of m inputs only the slots of one
/// known combination carry non-zero coefficients. Used to test whether a
/// selection procedure can recover a planted support.
template <typename Real>
struct PlantedLinear {
  Dataset<Real> data;
  Tensor<Real> true_weight;            // (outputs, groups*m)
  std::vector<int> planted_combo;      // combo index per group in the (n,m) table
};

template <typename Real>
PlantedLinear<Real> make_planted_linear(std::size_t groups, int n, int m, std::size_t outputs,
                                        std::size_t samples, std::uint64_t seed,
                                        double noise_std = 0.0, const std::vector<int>* support = nullptr) {
  const CombinationTable table = enumerate_combinations(n, m);
  if (groups == 0 || outputs == 0 || samples == 0) {
    throw std::invalid_argument("make_planted_linear: empty shape");
  }
  if (groups % outputs != 0) {
    throw std::invalid_argument("make_planted_linear: groups must be a multiple of outputs");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(table.combos.size()) - 1);
  // Coefficients sit well above the init-noise floor so the planted support
  // is unambiguously identifiable — the point of a planted problem.
  std::uniform_real_distribution<double> mag(1.2, 2.0);
  std::uniform_int_distribution<int> coin(0, 1);

  const std::size_t blocks = groups / outputs;           // groups per output row
  const std::size_t in = blocks * static_cast<std::size_t>(m);

  PlantedLinear<Real> out;
  out.true_weight = Tensor<Real>({outputs, in});
  out.planted_combo.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const int combo = support ? (*support)[g % support->size()] : pick(rng);
    out.planted_combo[g] = combo;
    const std::size_t o = g / blocks;
    const std::size_t b = g % blocks;
    for (int slot : table.combos[static_cast<std::size_t>(combo)]) {
      const double coeff = (coin(rng) ? 1.0 : -1.0) * mag(rng);
      out.true_weight.at(o, b * static_cast<std::size_t>(m) + static_cast<std::size_t>(slot)) =
          static_cast<Real>(coeff);
    }
  }

  out.data.inputs = Tensor<Real>({samples, in});
  fill_normal(out.data.inputs, rng, 1.0);
  out.data.targets = Tensor<Real>({samples, outputs});
  std::normal_distribution<double> label_noise(0.0, noise_std);
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t o = 0; o < outputs; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) {
        acc += static_cast<double>(out.data.inputs.at(i, k)) * static_cast<double>(out.true_weight.at(o, k));
      }
      if (noise_std > 0.0) acc += label_noise(rng);
      out.data.targets.at(i, o) = static_cast<Real>(acc);
    }
  }
  return out;
}

/// Tiny image classification set: each class owns a fixed random template
/// image; samples are the template plus Gaussian pixel noise.
template <typename Real>
Dataset<Real> make_synthetic_images(std::size_t samples, std::size_t channels, std::size_t height,
                                    std::size_t width, std::size_t classes, std::uint64_t seed,
                                    double noise_std = 0.25) {
  if (classes < 2) throw std::invalid_argument("make_synthetic_images: need at least 2 classes");
  std::mt19937_64 rng(seed);
  const std::size_t pixels = channels * height * width;
  std::vector<std::vector<double>> templates(classes, std::vector<double>(pixels));
  std::uniform_real_distribution<double> level(-1.0, 1.0);
  for (auto& t : templates) {
    for (auto& v : t) v = level(rng);
  }
  std::normal_distribution<double> noise(0.0, noise_std);

  Dataset<Real> ds;
  ds.inputs = Tensor<Real>({samples, channels, height, width});
  ds.labels.resize(samples);
  ds.num_classes = classes;
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t label = i % classes;
    ds.labels[i] = label;
    for (std::size_t p = 0; p < pixels; ++p) {
      ds.inputs.data[i * pixels + p] = static_cast<Real>(templates[label][p] + noise(rng));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// IDX file format (the MNIST container): big-endian header and payload.
// Magic: 0x00 0x00 <dtype> <ndim>; dtype 0x08 = u8, 0x0D = f32.

struct IdxData {
  std::uint8_t dtype = 0;
  Shape shape;
  std::vector<std::uint8_t> u8;
  std::vector<float> f32;
};

namespace idx_detail {

inline std::uint32_t get_be32(std::istream& is, const std::string& path, std::size_t offset,
                              const char* what) {
  std::uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) {
    throw std::runtime_error(path + ": truncated " + what + " at offset " + std::to_string(offset));
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

inline void put_be32(std::ostream& os, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                       static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace idx_detail

inline IdxData read_idx(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::uint8_t head[4];
  is.read(reinterpret_cast<char*>(head), 4);
  if (is.gcount() != 4) throw std::runtime_error(path + ": truncated magic at offset 0");
  if (head[0] != 0 || head[1] != 0) {
    throw std::runtime_error(path + ": bad IDX magic at offset 0 (first two bytes must be zero)");
  }
  IdxData out;
  out.dtype = head[2];
  if (out.dtype != 0x08 && out.dtype != 0x0D) {
    throw std::runtime_error(path + ": unsupported IDX dtype 0x" + std::to_string(out.dtype) +
                             " at offset 2 (supported: 0x08 u8, 0x0D f32)");
  }
  const std::uint8_t ndim = head[3];
  if (ndim == 0 || ndim > 4) {
    throw std::runtime_error(path + ": bad IDX dimension count " + std::to_string(ndim) +
                             " at offset 3");
  }
  out.shape.resize(ndim);
  for (std::uint8_t d = 0; d < ndim; ++d) {
    out.shape[d] = idx_detail::get_be32(is, path, 4 + 4 * static_cast<std::size_t>(d), "dimension");
  }
  const std::size_t count = shape_numel(out.shape);
  const std::size_t payload_offset = 4 + 4 * static_cast<std::size_t>(ndim);
  if (out.dtype == 0x08) {
    out.u8.resize(count);
    is.read(reinterpret_cast<char*>(out.u8.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(is.gcount()) != count) {
      throw std::runtime_error(path + ": truncated payload at offset " +
                               std::to_string(payload_offset + static_cast<std::size_t>(is.gcount())));
    }
  } else {
    out.f32.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t bits = idx_detail::get_be32(is, path, payload_offset + 4 * i, "payload");
      float v;
      std::memcpy(&v, &bits, 4);
      out.f32[i] = v;
    }
  }
  return out;
}

inline void write_idx_u8(const std::string& path, const Shape& shape,
                         const std::vector<std::uint8_t>& data) {
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("write_idx_u8: data length does not match shape " + shape_str(shape));
  }
  if (shape.empty() || shape.size() > 4) throw std::invalid_argument("write_idx_u8: 1..4 dims");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const std::uint8_t head[4] = {0, 0, 0x08, static_cast<std::uint8_t>(shape.size())};
  os.write(reinterpret_cast<const char*>(head), 4);
  for (std::size_t e : shape) idx_detail::put_be32(os, static_cast<std::uint32_t>(e));
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!os) throw std::runtime_error("write failed for " + path);
}

inline void write_idx_f32(const std::string& path, const Shape& shape, const std::vector<float>& data) {
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("write_idx_f32: data length does not match shape " + shape_str(shape));
  }
  if (shape.empty() || shape.size() > 4) throw std::invalid_argument("write_idx_f32: 1..4 dims");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const std::uint8_t head[4] = {0, 0, 0x0D, static_cast<std::uint8_t>(shape.size())};
  os.write(reinterpret_cast<const char*>(head), 4);
  for (std::size_t e : shape) idx_detail::put_be32(os, static_cast<std::uint32_t>(e));
  for (float v : data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    idx_detail::put_be32(os, bits);
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// On-disk dataset directory: IDX payload files plus a JSON manifest.

/// Writes `ds` into `dir` as inputs.idx (+ labels.idx or targets.idx) with a
/// manifest.json describing kind, seed, and the split convention.
template <typename Real>
void save_dataset_dir(const std::string& dir, const Dataset<Real>& ds, const std::string& kind,
                      std::uint64_t seed, double val_fraction = 0.1) {
  std::vector<float> inputs(ds.inputs.data.begin(), ds.inputs.data.end());
  write_idx_f32(dir + "/inputs.idx", ds.inputs.shape, inputs);

  nlohmann::json manifest;
  manifest["kind"] = kind;
  manifest["seed"] = seed;
  manifest["val_fraction"] = val_fraction;
  manifest["input_shape"] = ds.inputs.shape;
  manifest["samples"] = ds.size();
  manifest["files"] = {{"inputs", "inputs.idx"}};
  if (ds.is_classification()) {
    std::vector<std::uint8_t> labels(ds.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (ds.labels[i] > 255) throw std::runtime_error("label exceeds u8 range");
      labels[i] = static_cast<std::uint8_t>(ds.labels[i]);
    }
    write_idx_u8(dir + "/labels.idx", {labels.size()}, labels);
    manifest["files"]["labels"] = "labels.idx";
    manifest["num_classes"] = ds.num_classes;
  } else {
    std::vector<float> targets(ds.targets.data.begin(), ds.targets.data.end());
    write_idx_f32(dir + "/targets.idx", ds.targets.shape, targets);
    manifest["files"]["targets"] = "targets.idx";
  }
  std::ofstream os(dir + "/manifest.json");
  if (!os) throw std::runtime_error("cannot open " + dir + "/manifest.json for writing");
  os << manifest.dump(2) << '\n';
}

template <typename Real>
Dataset<Real> load_dataset_dir(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw std::runtime_error("cannot open " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(dir + "/manifest.json: " + e.what());
  }

  Dataset<Real> ds;
  const IdxData inputs = read_idx(dir + "/" + manifest.at("files").at("inputs").get<std::string>());
  if (inputs.dtype != 0x0D) throw std::runtime_error(dir + ": inputs.idx must be f32");
  ds.inputs.shape = inputs.shape;
  ds.inputs.data.assign(inputs.f32.begin(), inputs.f32.end());

  if (manifest.at("files").contains("labels")) {
    const IdxData labels = read_idx(dir + "/" + manifest["files"]["labels"].get<std::string>());
    if (labels.dtype != 0x08 || labels.shape.size() != 1) {
      throw std::runtime_error(dir + ": labels.idx must be 1-D u8");
    }
    if (labels.shape[0] != ds.size()) {
      throw std::runtime_error(dir + ": label count " + std::to_string(labels.shape[0]) +
                               " does not match sample count " + std::to_string(ds.size()));
    }
    ds.labels.assign(labels.u8.begin(), labels.u8.end());
    ds.num_classes = manifest.at("num_classes").get<std::size_t>();
  } else {
    const IdxData targets = read_idx(dir + "/" + manifest.at("files").at("targets").get<std::string>());
    if (targets.dtype != 0x0D) throw std::runtime_error(dir + ": targets.idx must be f32");
    ds.targets.shape = targets.shape;
    ds.targets.data.assign(targets.f32.begin(), targets.f32.end());
  }
  return ds;
}

}  // namespace lbc
