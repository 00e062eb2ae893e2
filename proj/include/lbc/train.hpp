#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "lbc/config.hpp"
#include "lbc/criteria.hpp"
#include "lbc/dataset.hpp"
#include "lbc/grouping.hpp"
#include "lbc/lbc.hpp"
#include "lbc/loss.hpp"
#include "lbc/network.hpp"
#include "lbc/nmformat.hpp"
#include "lbc/optim.hpp"
#include "lbc/schedule.hpp"

#include <nlohmann/json.hpp>

namespace lbc {

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double density = 1.0;
  double flops_ratio = 1.0;  // cumulative training-FLOPs ratio vs dense
  double lr = 0.0;
};

inline const char* metrics_csv_header() {
  return "epoch,train_loss,val_loss,val_accuracy,density,flops_ratio,lr";
}

/// %.17g keeps the full double so re-reading the CSV reproduces the bits.
inline std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string metrics_csv_row(const MetricsRow& r) {
  std::string line = std::to_string(r.epoch);
  for (double v : {r.train_loss, r.val_loss, r.val_accuracy, r.density, r.flops_ratio, r.lr}) {
    line += ',';
    line += fmt_full(v);
  }
  return line;
}

/// Sparsity bookkeeping for one layer under training.
template <typename Real>
struct SparseLayer {
  std::size_t layer_id = 0;
  GroupView view;
  LbcLayerState<Real> state;
  Tensor<Real> taylor_acc;  // (G, M) running sum of |w * dL/dw|, reset each epoch
};

template <typename Real>
struct TrainHooks {
  /// Called after each epoch's batches with the current state.
  std::function<void(std::size_t epoch, const Network<Real>& net, const MaskSet<Real>& masks,
                     const std::vector<SparseLayer<Real>>& layers)>
      on_epoch;
  std::ostream* events = nullptr;  // JSON-lines sink
};

template <typename Real>
struct TrainResult {
  Network<Real> net;
  MaskSet<Real> masks;
  std::vector<SparseLayer<Real>> layers;
  std::vector<MetricsRow> metrics;
  FlopsModel flops;
  bool constrained = false;  // every group ended with exactly n survivors
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  double final_val_accuracy = 0.0;
};

template <typename Real>
struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;  // 0 for regression sets
};

template <typename Real>
EvalResult<Real> evaluate(const Network<Real>& net, const MaskSet<Real>& masks,
                          const Dataset<Real>& ds, std::size_t batch_size) {
  EvalResult<Real> out;
  const std::size_t total = ds.size();
  if (total == 0) return out;
  const MaskSet<Real>* mp = masks.empty() ? nullptr : &masks;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < total; begin += batch_size) {
    const std::size_t count = std::min(batch_size, total - begin);
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), begin);
    const Dataset<Real> batch = gather_batch(ds, idx);
    ForwardCache<Real> cache;
    const Tensor<Real> out_t = forward(net, batch.inputs, mp, &cache);
    if (ds.is_classification()) {
      const std::vector<int> labels(batch.labels.begin(), batch.labels.end());
      loss_sum += cross_entropy(out_t, labels).value * static_cast<double>(count);
      for (std::size_t b = 0; b < count; ++b) {
        if (argmax_row(out_t, b) == labels[b]) ++correct;
      }
    } else {
      loss_sum += mse(out_t, batch.targets).value * static_cast<double>(count);
    }
  }
  out.loss = loss_sum / static_cast<double>(total);
  if (ds.is_classification()) out.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return out;
}

namespace detail {

/// Dense forward multiply-accumulates of one layer for a single sample.
inline double layer_forward_macs(LayerKind kind, const Shape& weight_shape,
                                 const Shape& sample_input_shape) {
  if (kind == LayerKind::kLinear) {
    return static_cast<double>(weight_shape[0]) * static_cast<double>(weight_shape[1]);
  }
  // conv2d: (H - kh + 1)(W - kw + 1) positions, in*kh*kw MACs per output value.
  const double oh = static_cast<double>(sample_input_shape[1] - weight_shape[2] + 1);
  const double ow = static_cast<double>(sample_input_shape[2] - weight_shape[3] + 1);
  const double per_pos = static_cast<double>(weight_shape[1]) * static_cast<double>(weight_shape[2]) *
                         static_cast<double>(weight_shape[3]);
  return static_cast<double>(weight_shape[0]) * oh * ow * per_pos;
}

template <typename Real>
std::size_t mask_ones(const Tensor<Real>& mask) {
  std::size_t ones = 0;
  for (Real v : mask.data) {
    if (v != Real{0}) ++ones;
  }
  return ones;
}

}  // namespace detail

/// Decides which layers participate in sparsification: weighted layers not on
/// the exempt list. A candidate whose group width does not divide its fiber
/// length is a configuration error — exempt it explicitly instead.
template <typename Real>
std::vector<std::size_t> select_sparsifiable(Network<Real>& net, int m,
                                             const std::vector<std::string>& exempt) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer<Real>& layer = net.layers[i];
    if (!layer.has_weight()) continue;
    const bool exempted =
        std::find(exempt.begin(), exempt.end(), layer.name) != exempt.end();
    if (exempted) {
      layer.sparsifiable = false;
      continue;
    }
    std::size_t fiber = layer.weight.extent(1);
    for (std::size_t a = 2; a < layer.weight.rank(); ++a) fiber *= layer.weight.extent(a);
    if (fiber % static_cast<std::size_t>(m) != 0) {
      throw std::invalid_argument("layer \"" + layer.name + "\": fiber length " +
                                  std::to_string(fiber) + " is not divisible by m=" +
                                  std::to_string(m) + "; add it to exempt_layers to train it dense");
    }
    layer.sparsifiable = true;
    ids.push_back(i);
  }
  return ids;
}

/// Trains `net` under the gradual candidate-removal scheme. Per epoch, while
/// inside the removal window and the per-group collections are not yet
/// singletons, the lowest-scored combinations are discarded and the masks
/// recomputed before any forward pass; each batch then runs masked forward,
/// backward, a weight step restricted to mask-1 entries, and a score update.
template <typename Real>
TrainResult<Real> lbc_train(Network<Real> net, const Dataset<Real>& train_set,
                            const Dataset<Real>& val_set, const RunConfig& cfg,
                            const TrainHooks<Real>& hooks = {}) {
  validate(cfg);
  if (train_set.size() == 0) throw std::invalid_argument("lbc_train: empty training set");

  const CombinationTable table = enumerate_combinations(cfg.n, cfg.m);
  RemovalSchedule sched{static_cast<int>(cfg.removal_begin_epoch),
                        static_cast<int>(cfg.removal_end_epoch), table.size()};
  validate(sched, static_cast<int>(cfg.epochs));

  init_weights(net, cfg.seed);

  std::vector<SparseLayer<Real>> layers;
  for (std::size_t id : select_sparsifiable(net, cfg.m, cfg.exempt_layers)) {
    SparseLayer<Real> sl;
    sl.layer_id = id;
    sl.view = make_group_view(id, net.layers[id].weight.shape, static_cast<std::size_t>(cfg.m),
                              net.layers[id].kind);
    sl.state = make_lbc_state<Real>(sl.view.group_count, table);
    sl.taylor_acc = Tensor<Real>({sl.view.group_count, static_cast<std::size_t>(cfg.m)});
    layers.push_back(std::move(sl));
  }

  MaskSet<Real> masks(net.layers.size());
  for (auto& sl : layers) {
    masks[sl.layer_id] = weight_mask(sl.state, sl.view, net.layers[sl.layer_id].weight.shape);
  }

  SgdConfig sgd_cfg{cfg.base_lr, cfg.momentum, cfg.weight_decay,
                    static_cast<int>(cfg.warmup_epochs), static_cast<int>(cfg.epochs)};
  validate(sgd_cfg);
  SgdState<Real> sgd_state = make_sgd_state(net);
  SgdConfig score_cfg = sgd_cfg;
  score_cfg.base_lr = cfg.score_lr;

  std::mt19937_64 batch_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::mt19937_64 criterion_rng(cfg.seed ^ 0xA5C3A5C3A5C3A5C3ull);

  // Per-sample dense MACs per sparsifiable layer, measured off a dry forward.
  FlopsModel flops;
  {
    const Dataset<Real> probe = gather_batch(train_set, {0});
    ForwardCache<Real> cache;
    forward(net, probe.inputs, &masks, &cache);
    for (const auto& sl : layers) {
      Shape sample_shape(cache.inputs[sl.layer_id].shape.begin() + 1,
                         cache.inputs[sl.layer_id].shape.end());
      flops.layer_forward_flops.push_back(detail::layer_forward_macs(
          net.layers[sl.layer_id].kind, net.layers[sl.layer_id].weight.shape, sample_shape));
    }
  }

  std::size_t total_weights = 0;
  for (const auto& sl : layers) total_weights += net.layers[sl.layer_id].weight.numel();

  if (hooks.events) {
    nlohmann::json ev;
    ev["event"] = "run_start";
    ev["config"] = cfg;
    ev["train_samples"] = train_set.size();
    ev["val_samples"] = val_set.size();
    ev["collection_size"] = table.size();
    nlohmann::json jl = nlohmann::json::array();
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& sl = layers[k];
      jl.push_back({{"index", sl.layer_id},
                    {"name", net.layers[sl.layer_id].name},
                    {"kind", layer_kind_name(net.layers[sl.layer_id].kind)},
                    {"groups", sl.view.group_count},
                    {"weights", net.layers[sl.layer_id].weight.numel()},
                    {"forward_macs", flops.layer_forward_flops[k]}});
    }
    ev["layers"] = jl;
    *hooks.events << ev.dump() << '\n';
  }

  TrainResult<Real> result;
  const LossKind loss_kind = train_set.is_classification() ? LossKind::kCrossEntropy : LossKind::kMse;
  double sparse_flops = 0.0, dense_flops = 0.0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Candidate removal precedes the epoch's first forward pass.
    bool all_singleton = true;
    for (const auto& sl : layers) {
      for (std::size_t r : sl.state.removed) {
        if (r + 1 < table.size()) {
          all_singleton = false;
          break;
        }
      }
    }
    const int t = static_cast<int>(epoch);
    if (t >= sched.begin_epoch && t <= sched.end_epoch && !all_singleton) {
      for (auto& sl : layers) {
        Tensor<Real> selection;
        const Tensor<Real>* selection_ptr = nullptr;
        if (cfg.criterion != CriterionKind::kLbcScore) {
          const Tensor<Real> w_gm = gather(sl.view, net.layers[sl.layer_id].weight);
          selection = combo_score(cfg.criterion, table, w_gm, &sl.taylor_acc, &sl.state.scores,
                                  &criterion_rng);
          selection_ptr = &selection;
        }
        remove_candidates(sl.state, table, sched, t, selection_ptr);
        masks[sl.layer_id] = weight_mask(sl.state, sl.view, net.layers[sl.layer_id].weight.shape);
      }
    }
    // The gradient criterion accumulates within the current epoch only.
    for (auto& sl : layers) {
      std::fill(sl.taylor_acc.data.begin(), sl.taylor_acc.data.end(), Real{0});
    }

    // FLOPs bookkeeping for the masks active during this epoch.
    std::vector<double> density_row;
    for (const auto& sl : layers) {
      const std::size_t ones = detail::mask_ones(masks[sl.layer_id]);
      density_row.push_back(static_cast<double>(ones) /
                            static_cast<double>(net.layers[sl.layer_id].weight.numel()));
    }
    flops.density.push_back(density_row);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const double factor = (1.0 + flops.backward_multiplier) * flops.layer_forward_flops[k];
      sparse_flops += factor * density_row[k];
      dense_flops += factor;
    }
    const double flops_ratio = dense_flops > 0.0 ? sparse_flops / dense_flops : 1.0;

    std::shuffle(order.begin(), order.end(), batch_rng);
    const double lr = lr_at(sgd_cfg, t);
    const double score_lr = cfg.score_lr_follows_schedule ? lr_at(score_cfg, t) : cfg.score_lr;

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                         order.begin() + static_cast<std::ptrdiff_t>(begin + count));
      const Dataset<Real> batch = gather_batch(train_set, idx);
      ForwardCache<Real> cache;
      const Tensor<Real> out_t = forward(net, batch.inputs, &masks, &cache);
      LossResult<Real> loss;
      if (loss_kind == LossKind::kCrossEntropy) {
        const std::vector<int> labels(batch.labels.begin(), batch.labels.end());
        loss = cross_entropy(out_t, labels);
      } else {
        loss = mse(out_t, batch.targets);
      }
      loss_sum += loss.value * static_cast<double>(count);
      const Gradients<Real> grads = backward(net, cache, loss.grad, &masks);

      // Score and criterion statistics use the weights that produced the
      // gradients, i.e. before this batch's SGD step.
      for (auto& sl : layers) {
        const Tensor<Real> w_gm = gather(sl.view, net.layers[sl.layer_id].weight);
        const Tensor<Real> g_gm = gather(sl.view, grads.weight[sl.layer_id]);
        for (std::size_t k = 0; k < w_gm.numel(); ++k) {
          sl.taylor_acc.data[k] += std::abs(w_gm.data[k] * g_gm.data[k]);
        }
        const Tensor<Real> sgrad = score_gradients(sl.state, table, w_gm, g_gm);
        update_scores(sl.state, sgrad, score_lr);
      }
      sgd_step(net, grads, sgd_state, sgd_cfg, t, &masks);
    }

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(order.size());
    const EvalResult<Real> ev = evaluate(net, masks, val_set, cfg.batch_size);
    row.val_loss = ev.loss;
    row.val_accuracy = ev.accuracy;
    std::size_t total_ones = 0;
    for (const auto& sl : layers) total_ones += detail::mask_ones(masks[sl.layer_id]);
    row.density = total_weights > 0
                      ? static_cast<double>(total_ones) / static_cast<double>(total_weights)
                      : 1.0;
    row.flops_ratio = flops_ratio;
    row.lr = lr;
    result.metrics.push_back(row);

    if (hooks.events) {
      nlohmann::json evj;
      evj["event"] = "epoch";
      evj["epoch"] = epoch;
      evj["lr"] = lr;
      evj["score_lr"] = score_lr;
      evj["train_loss"] = row.train_loss;
      evj["val_loss"] = row.val_loss;
      evj["val_accuracy"] = row.val_accuracy;
      evj["density"] = row.density;
      evj["flops_ratio"] = row.flops_ratio;
      nlohmann::json jl = nlohmann::json::array();
      for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& sl = layers[k];
        std::size_t alive_min = table.size(), alive_max = 0;
        for (std::size_t g = 0; g < sl.state.groups(); ++g) {
          const std::size_t alive = table.size() - sl.state.removed[g];
          alive_min = std::min(alive_min, alive);
          alive_max = std::max(alive_max, alive);
        }
        double smin = 0.0, smax = 0.0, ssum = 0.0;
        if (!sl.state.scores.data.empty()) {
          smin = smax = static_cast<double>(sl.state.scores.data[0]);
          for (Real v : sl.state.scores.data) {
            smin = std::min(smin, static_cast<double>(v));
            smax = std::max(smax, static_cast<double>(v));
            ssum += static_cast<double>(v);
          }
        }
        jl.push_back({{"index", sl.layer_id},
                      {"alive_min", alive_min},
                      {"alive_max", alive_max},
                      {"density", density_row[k]},
                      {"score_min", smin},
                      {"score_max", smax},
                      {"score_mean", ssum / static_cast<double>(sl.state.scores.numel())}});
      }
      evj["layers"] = jl;
      *hooks.events << evj.dump() << '\n';
    }

    if (hooks.on_epoch) hooks.on_epoch(epoch, net, masks, layers);
  }

  result.constrained = true;
  for (const auto& sl : layers) {
    if (!satisfies_nm(sl.state, table)) result.constrained = false;
  }
  result.net = std::move(net);
  result.masks = std::move(masks);
  result.flops = flops;
  if (!result.metrics.empty()) {
    result.final_train_loss = result.metrics.back().train_loss;
    result.final_val_loss = result.metrics.back().val_loss;
    result.final_val_accuracy = result.metrics.back().val_accuracy;
  }

  if (hooks.events) {
    nlohmann::json evj;
    evj["event"] = "run_end";
    evj["epochs"] = cfg.epochs;
    evj["constrained"] = result.constrained;
    evj["final_train_loss"] = result.final_train_loss;
    evj["final_val_loss"] = result.final_val_loss;
    evj["final_val_accuracy"] = result.final_val_accuracy;
    if (!result.metrics.empty()) {
      evj["density"] = result.metrics.back().density;
      evj["flops_ratio"] = result.metrics.back().flops_ratio;
    }
    *hooks.events << evj.dump() << '\n';
  }

  result.layers = std::move(layers);
  return result;
}

// ---------------------------------------------------------------------------
// Criteria comparison harness.

struct ComparisonRow {
  CriterionKind kind = CriterionKind::kLbcScore;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  double val_accuracy = 0.0;
  std::size_t epochs = 0;
};

inline const char* comparison_csv_header() {
  return "kind,seed,final_train_loss,final_val_loss,val_accuracy,epochs";
}

inline std::string comparison_csv_row(const ComparisonRow& r) {
  std::string line = criterion_name(r.kind);
  line += ',' + std::to_string(r.seed);
  for (double v : {r.final_train_loss, r.final_val_loss, r.val_accuracy}) {
    line += ',';
    line += fmt_full(v);
  }
  line += ',' + std::to_string(r.epochs);
  return line;
}

/// Runs every (criterion, seed) cell on the same data with seed-identical
/// weight init, so rows differ only in the selection rule.
template <typename Real>
std::vector<ComparisonRow> run_comparison(const std::function<Network<Real>()>& net_factory,
                                          const Dataset<Real>& train_set,
                                          const Dataset<Real>& val_set, const RunConfig& base,
                                          const std::vector<CriterionKind>& kinds,
                                          const std::vector<std::uint64_t>& seeds) {
  std::vector<ComparisonRow> rows;
  for (std::uint64_t seed : seeds) {
    for (CriterionKind kind : kinds) {
      RunConfig cfg = base;
      cfg.seed = seed;
      cfg.criterion = kind;
      const TrainResult<Real> r = lbc_train(net_factory(), train_set, val_set, cfg);
      ComparisonRow row;
      row.kind = kind;
      row.seed = seed;
      row.final_train_loss = r.final_train_loss;
      row.final_val_loss = r.final_val_loss;
      row.val_accuracy = r.final_val_accuracy;
      row.epochs = cfg.epochs;
      rows.push_back(row);
    }
  }
  return rows;
}

/// Median of a non-empty sample (mean of the two middle order statistics).
inline double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  if (values.size() % 2 == 1) return values[h];
  return 0.5 * (values[h - 1] + values[h]);
}

}  // namespace lbc
