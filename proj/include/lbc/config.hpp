#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbc/criteria.hpp"
#include "lbc/dataset.hpp"
#include "lbc/network.hpp"

#include <nlohmann/json.hpp>

namespace lbc {

struct ArchSpec {
  std::string kind = "mlp";            // "mlp" | "smallconv"
  std::vector<std::size_t> widths = {8, 16, 3};  // mlp: full chain in, hidden..., out
  // smallconv fields
  std::size_t in_channels = 1;
  std::size_t conv_channels = 8;
  std::size_t kernel = 3;
  std::size_t image_h = 8;
  std::size_t image_w = 8;
  std::size_t classes = 4;
};

struct DatasetSpec {
  std::string kind = "blobs";          // "blobs" | "planted" | "images" | "idx"
  std::size_t samples = 512;
  std::size_t features = 8;
  std::size_t classes = 3;
  double cluster_std = 1.0;
  double feature_scale_spread = 0.0;
  // planted
  std::size_t groups = 2;
  std::size_t outputs = 1;
  double noise_std = 0.0;
  // images
  std::size_t channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  // idx
  std::string dir;
};

struct RunConfig {
  ArchSpec arch;
  DatasetSpec dataset;
  int n = 2;
  int m = 4;
  std::size_t epochs = 30;
  std::size_t removal_begin_epoch = 0;
  std::size_t removal_end_epoch = 15;
  double base_lr = 0.05;
  double score_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t warmup_epochs = 0;
  std::size_t batch_size = 32;
  CriterionKind criterion = CriterionKind::kLbcScore;
  std::uint64_t seed = 0;
  std::vector<std::string> exempt_layers;
  int precision = 32;                  // 32 | 64
  std::string output_dir = "runs/out";
  bool score_lr_follows_schedule = true;  // scores reuse the warmup/cosine curve
};

namespace cfg_detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::invalid_argument("unknown config key \"" + it.key() + "\" in " + where);
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config key \"" + key + "\": " + e.what());
  }
}

}  // namespace cfg_detail

inline void to_json(nlohmann::json& j, const ArchSpec& a) {
  j = {{"kind", a.kind}};
  if (a.kind == "mlp") {
    j["widths"] = a.widths;
  } else {
    j["in_channels"] = a.in_channels;
    j["conv_channels"] = a.conv_channels;
    j["kernel"] = a.kernel;
    j["image_h"] = a.image_h;
    j["image_w"] = a.image_w;
    j["classes"] = a.classes;
  }
}

inline void from_json(const nlohmann::json& j, ArchSpec& a) {
  using cfg_detail::get_or;
  cfg_detail::reject_unknown(j, {"kind", "widths", "in_channels", "conv_channels", "kernel",
                                 "image_h", "image_w", "classes"},
                             "arch");
  a.kind = get_or<std::string>(j, "kind", a.kind);
  a.widths = get_or(j, "widths", a.widths);
  a.in_channels = get_or(j, "in_channels", a.in_channels);
  a.conv_channels = get_or(j, "conv_channels", a.conv_channels);
  a.kernel = get_or(j, "kernel", a.kernel);
  a.image_h = get_or(j, "image_h", a.image_h);
  a.image_w = get_or(j, "image_w", a.image_w);
  a.classes = get_or(j, "classes", a.classes);
}

inline void to_json(nlohmann::json& j, const DatasetSpec& d) {
  j = {{"kind", d.kind}};
  if (d.kind == "blobs") {
    j["samples"] = d.samples;
    j["features"] = d.features;
    j["classes"] = d.classes;
    j["cluster_std"] = d.cluster_std;
    j["feature_scale_spread"] = d.feature_scale_spread;
  } else if (d.kind == "planted") {
    j["samples"] = d.samples;
    j["groups"] = d.groups;
    j["outputs"] = d.outputs;
    j["noise_std"] = d.noise_std;
  } else if (d.kind == "images") {
    j["samples"] = d.samples;
    j["channels"] = d.channels;
    j["height"] = d.height;
    j["width"] = d.width;
    j["classes"] = d.classes;
    j["noise_std"] = d.noise_std;
  } else {
    j["dir"] = d.dir;
  }
}

inline void from_json(const nlohmann::json& j, DatasetSpec& d) {
  using cfg_detail::get_or;
  cfg_detail::reject_unknown(j, {"kind", "samples", "features", "classes", "cluster_std",
                                 "feature_scale_spread", "groups", "outputs", "noise_std",
                                 "channels", "height", "width", "dir"},
                             "dataset");
  d.kind = get_or<std::string>(j, "kind", d.kind);
  d.samples = get_or(j, "samples", d.samples);
  d.features = get_or(j, "features", d.features);
  d.classes = get_or(j, "classes", d.classes);
  d.cluster_std = get_or(j, "cluster_std", d.cluster_std);
  d.feature_scale_spread = get_or(j, "feature_scale_spread", d.feature_scale_spread);
  d.groups = get_or(j, "groups", d.groups);
  d.outputs = get_or(j, "outputs", d.outputs);
  d.noise_std = get_or(j, "noise_std", d.noise_std);
  d.channels = get_or(j, "channels", d.channels);
  d.height = get_or(j, "height", d.height);
  d.width = get_or(j, "width", d.width);
  d.dir = get_or<std::string>(j, "dir", d.dir);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{};
  j["arch"] = c.arch;
  j["dataset"] = c.dataset;
  j["n"] = c.n;
  j["m"] = c.m;
  j["epochs"] = c.epochs;
  j["removal_begin_epoch"] = c.removal_begin_epoch;
  j["removal_end_epoch"] = c.removal_end_epoch;
  j["base_lr"] = c.base_lr;
  j["score_lr"] = c.score_lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["warmup_epochs"] = c.warmup_epochs;
  j["batch_size"] = c.batch_size;
  j["criterion"] = criterion_name(c.criterion);
  j["seed"] = c.seed;
  j["exempt_layers"] = c.exempt_layers;
  j["precision"] = c.precision;
  j["output_dir"] = c.output_dir;
  j["score_lr_follows_schedule"] = c.score_lr_follows_schedule;
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  using cfg_detail::get_or;
  cfg_detail::reject_unknown(
      j,
      {"arch", "dataset", "n", "m", "epochs", "removal_begin_epoch", "removal_end_epoch", "base_lr",
       "score_lr", "momentum", "weight_decay", "warmup_epochs", "batch_size", "criterion", "seed",
       "exempt_layers", "precision", "output_dir", "score_lr_follows_schedule"},
      "run config");
  if (j.contains("arch")) c.arch = j.at("arch").get<ArchSpec>();
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<DatasetSpec>();
  c.n = get_or(j, "n", c.n);
  c.m = get_or(j, "m", c.m);
  c.epochs = get_or(j, "epochs", c.epochs);
  c.removal_begin_epoch = get_or(j, "removal_begin_epoch", c.removal_begin_epoch);
  c.removal_end_epoch = get_or(j, "removal_end_epoch", c.removal_end_epoch);
  c.base_lr = get_or(j, "base_lr", c.base_lr);
  c.score_lr = get_or(j, "score_lr", c.base_lr);  // default: follow the weight lr
  c.momentum = get_or(j, "momentum", c.momentum);
  c.weight_decay = get_or(j, "weight_decay", c.weight_decay);
  c.warmup_epochs = get_or(j, "warmup_epochs", c.warmup_epochs);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  if (j.contains("criterion")) c.criterion = parse_criterion(j.at("criterion").get<std::string>());
  c.seed = get_or(j, "seed", c.seed);
  c.exempt_layers = get_or(j, "exempt_layers", c.exempt_layers);
  c.precision = get_or(j, "precision", c.precision);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);
  c.score_lr_follows_schedule = get_or(j, "score_lr_follows_schedule", c.score_lr_follows_schedule);
}

inline void validate(const RunConfig& c) {
  if (c.n < 1 || c.m < c.n || c.m > 16) {
    throw std::invalid_argument("config: need 1 <= n <= m <= 16, got n=" + std::to_string(c.n) +
                                " m=" + std::to_string(c.m));
  }
  if (c.epochs == 0) throw std::invalid_argument("config: epochs must be positive");
  if (c.removal_begin_epoch > c.removal_end_epoch || c.removal_end_epoch >= c.epochs) {
    throw std::invalid_argument(
        "config: need removal_begin_epoch <= removal_end_epoch < epochs, got " +
        std::to_string(c.removal_begin_epoch) + " <= " + std::to_string(c.removal_end_epoch) +
        " < " + std::to_string(c.epochs));
  }
  if (c.base_lr < 0 || c.score_lr < 0) throw std::invalid_argument("config: learning rates must be >= 0");
  if (c.momentum < 0 || c.momentum >= 1) throw std::invalid_argument("config: momentum must be in [0, 1)");
  if (c.weight_decay < 0) throw std::invalid_argument("config: weight_decay must be >= 0");
  if (c.batch_size == 0) throw std::invalid_argument("config: batch_size must be positive");
  if (c.precision != 32 && c.precision != 64) {
    throw std::invalid_argument("config: precision must be 32 or 64, got " + std::to_string(c.precision));
  }
  if (c.arch.kind != "mlp" && c.arch.kind != "smallconv") {
    throw std::invalid_argument("config: unknown arch kind \"" + c.arch.kind + "\"");
  }
  if (c.arch.kind == "mlp" && c.arch.widths.size() < 2) {
    throw std::invalid_argument("config: mlp widths need at least input and output");
  }
  const std::string& dk = c.dataset.kind;
  if (dk != "blobs" && dk != "planted" && dk != "images" && dk != "idx") {
    throw std::invalid_argument("config: unknown dataset kind \"" + dk + "\"");
  }
  if (dk == "idx" && c.dataset.dir.empty()) {
    throw std::invalid_argument("config: dataset kind \"idx\" requires \"dir\"");
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  RunConfig cfg = j.get<RunConfig>();
  validate(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Factories driven by the config.

template <typename Real>
Dataset<Real> make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.kind == "blobs") {
    return make_blobs<Real>(spec.samples, spec.features, spec.classes, seed, spec.cluster_std,
                            spec.feature_scale_spread);
  }
  if (spec.kind == "planted") {
    // m is owned by the run config; planted datasets built here use the
    // layer geometry implied by groups/outputs with the run's group width.
    throw std::invalid_argument(
        "make_dataset: planted datasets need the run's (n, m); use make_planted_linear directly");
  }
  if (spec.kind == "images") {
    return make_synthetic_images<Real>(spec.samples, spec.channels, spec.height, spec.width,
                                       spec.classes, seed,
                                       spec.noise_std > 0.0 ? spec.noise_std : 0.25);
  }
  if (spec.kind == "idx") {
    return load_dataset_dir<Real>(spec.dir);
  }
  throw std::invalid_argument("make_dataset: unknown kind \"" + spec.kind + "\"");
}

template <typename Real>
Dataset<Real> make_dataset(const RunConfig& cfg) {
  if (cfg.dataset.kind == "planted") {
    return make_planted_linear<Real>(cfg.dataset.groups, cfg.n, cfg.m, cfg.dataset.outputs,
                                     cfg.dataset.samples, cfg.seed, cfg.dataset.noise_std)
        .data;
  }
  return make_dataset<Real>(cfg.dataset, cfg.seed);
}

template <typename Real>
Network<Real> make_network(const ArchSpec& arch) {
  Network<Real> net;
  if (arch.kind == "mlp") {
    for (std::size_t i = 0; i + 1 < arch.widths.size(); ++i) {
      if (i > 0) net.layers.push_back(relu_layer<Real>("relu" + std::to_string(i - 1)));
      net.layers.push_back(
          linear_layer<Real>(arch.widths[i], arch.widths[i + 1], "fc" + std::to_string(i)));
    }
    return net;
  }
  if (arch.kind == "smallconv") {
    if (arch.image_h < arch.kernel || arch.image_w < arch.kernel) {
      throw std::invalid_argument("smallconv: kernel larger than image");
    }
    net.layers.push_back(conv2d_layer<Real>(arch.in_channels, arch.conv_channels, arch.kernel,
                                            arch.kernel, "conv0"));
    net.layers.push_back(relu_layer<Real>("relu0"));
    net.layers.push_back(flatten_layer<Real>("flatten0"));
    const std::size_t oh = arch.image_h - arch.kernel + 1;
    const std::size_t ow = arch.image_w - arch.kernel + 1;
    net.layers.push_back(
        linear_layer<Real>(arch.conv_channels * oh * ow, arch.classes, "fc0"));
    return net;
  }
  throw std::invalid_argument("make_network: unknown arch kind \"" + arch.kind + "\"");
}

/// The architecture a planted-linear run trains: a single bias-free linear
/// layer with the same geometry as the generator.
template <typename Real>
Network<Real> make_planted_network(const RunConfig& cfg) {
  const std::size_t blocks = cfg.dataset.groups / cfg.dataset.outputs;
  Network<Real> net;
  net.layers.push_back(linear_layer<Real>(blocks * static_cast<std::size_t>(cfg.m),
                                          cfg.dataset.outputs, "fc0", /*bias=*/false));
  return net;
}

}  // namespace lbc
