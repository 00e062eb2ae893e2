#include "lbc/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "lbc/config.hpp"

namespace lbc {
namespace {

RunConfig smoke_config() {
  RunConfig cfg;
  cfg.arch.widths = {8, 8, 3};
  cfg.dataset.samples = 64;
  cfg.dataset.features = 8;
  cfg.dataset.classes = 3;
  cfg.epochs = 6;
  cfg.removal_begin_epoch = 0;
  cfg.removal_end_epoch = 3;
  cfg.batch_size = 16;
  cfg.seed = 1;
  return cfg;
}

template <typename Real>
std::pair<Dataset<Real>, Dataset<Real>> smoke_data(const RunConfig& cfg) {
  return split_dataset(make_dataset<Real>(cfg), 0.25);
}

TEST(MetricsCsv, HeaderAndRowShape) {
  EXPECT_STREQ(metrics_csv_header(), "epoch,train_loss,val_loss,val_accuracy,density,flops_ratio,lr");
  MetricsRow r;
  r.epoch = 3;
  r.train_loss = 1.0 / 3.0;
  const std::string line = metrics_csv_row(r);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
  EXPECT_EQ(line.rfind("3,", 0), 0u);
}

TEST(MetricsCsv, FullPrecisionRoundTrip) {
  for (double v : {1.0 / 3.0, 0.1, 1e-300, 12345.678901234567, -2.5e17, 0.0}) {
    const std::string s = fmt_full(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
}

TEST(SelectSparsifiable, ExemptAndIndivisible) {
  ArchSpec arch;
  arch.widths = {8, 8, 3};
  auto net = make_network<float>(arch);
  const auto ids = select_sparsifiable(net, 4, {"fc1"});
  EXPECT_EQ(ids, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(net.layers[0].sparsifiable);
  EXPECT_FALSE(net.layers[2].sparsifiable);

  ArchSpec odd;
  odd.widths = {6, 8, 3};  // fc0 fiber length 6, not divisible by 4
  auto net2 = make_network<float>(odd);
  try {
    select_sparsifiable(net2, 4, {});
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("fc0"), std::string::npos);
    EXPECT_NE(msg.find("add it to exempt_layers to train it dense"), std::string::npos);
  }
  EXPECT_EQ(select_sparsifiable(net2, 4, {"fc0"}), (std::vector<std::size_t>{2}));
}

TEST(Evaluate, EmptyAndBatchInvariant) {
  const RunConfig cfg = smoke_config();
  auto net = make_network<float>(cfg.arch);
  init_weights(net, 3);
  MaskSet<float> masks;

  Dataset<float> empty;
  const auto z = evaluate(net, masks, empty, 8);
  EXPECT_EQ(z.loss, 0.0);
  EXPECT_EQ(z.accuracy, 0.0);

  const auto ds = make_blobs<float>(50, 8, 3, 9);
  const auto whole = evaluate(net, masks, ds, 50);
  const auto pieces = evaluate(net, masks, ds, 7);  // 50 = 7*7 + 1, uneven tail
  EXPECT_NEAR(pieces.loss, whole.loss, 1e-6 * (1.0 + std::abs(whole.loss)));
  EXPECT_EQ(pieces.accuracy, whole.accuracy);
}

TEST(LbcTrain, SmokeRunLandsOnTheConstraint) {
  const RunConfig cfg = smoke_config();
  const auto [train_set, val_set] = smoke_data<float>(cfg);
  const auto r = lbc_train(make_network<float>(cfg.arch), train_set, val_set, cfg);

  EXPECT_TRUE(r.constrained);
  ASSERT_EQ(r.metrics.size(), 6u);
  for (std::size_t e = 0; e < 6; ++e) EXPECT_EQ(r.metrics[e].epoch, e);
  EXPECT_EQ(r.metrics.back().density, 0.5);
  EXPECT_EQ(r.final_val_loss, r.metrics.back().val_loss);
  ASSERT_EQ(r.layers.size(), 2u);

  // Every mask carries exactly half ones, 2 per group of 4.
  const CombinationTable table = enumerate_combinations(cfg.n, cfg.m);
  for (const auto& sl : r.layers) {
    EXPECT_TRUE(satisfies_nm(sl.state, table));
    const auto& mask = r.masks[sl.layer_id];
    ASSERT_FALSE(mask.empty());
    std::size_t ones = 0;
    for (float v : mask.data) ones += v != 0.0f ? 1 : 0;
    EXPECT_EQ(ones, mask.numel() / 2);
  }
  EXPECT_GT(r.metrics.front().flops_ratio, r.metrics.back().flops_ratio);
  EXPECT_LT(r.metrics.back().flops_ratio, 1.0);
}

TEST(LbcTrain, DeterministicAcrossRuns) {
  const RunConfig cfg = smoke_config();
  const auto [train_set, val_set] = smoke_data<float>(cfg);
  const auto a = lbc_train(make_network<float>(cfg.arch), train_set, val_set, cfg);
  const auto b = lbc_train(make_network<float>(cfg.arch), train_set, val_set, cfg);

  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(metrics_csv_row(a.metrics[i]), metrics_csv_row(b.metrics[i]));
  }
  for (std::size_t l = 0; l < a.net.layers.size(); ++l) {
    const auto& wa = a.net.layers[l].weight.data;
    const auto& wb = b.net.layers[l].weight.data;
    ASSERT_EQ(wa.size(), wb.size());
    if (!wa.empty()) {
      EXPECT_EQ(std::memcmp(wa.data(), wb.data(), wa.size() * sizeof(float)), 0);
    }
  }
}

TEST(LbcTrain, MasksOnlyShrinkAndDeadWeightsFreeze) {
  const RunConfig cfg = smoke_config();
  const auto [train_set, val_set] = smoke_data<float>(cfg);

  struct Snapshot {
    MaskSet<float> masks;
    std::vector<std::vector<float>> weights;
  };
  std::vector<Snapshot> history;
  TrainHooks<float> hooks;
  hooks.on_epoch = [&](std::size_t, const Network<float>& net, const MaskSet<float>& masks,
                       const std::vector<SparseLayer<float>>&) {
    Snapshot s;
    s.masks = masks;
    for (const auto& layer : net.layers) s.weights.push_back(layer.weight.data);
    history.push_back(std::move(s));
  };
  lbc_train(make_network<float>(cfg.arch), train_set, val_set, cfg, hooks);

  ASSERT_EQ(history.size(), 6u);
  for (std::size_t t = 1; t < history.size(); ++t) {
    for (std::size_t l = 0; l < history[t].masks.size(); ++l) {
      const auto& prev = history[t - 1].masks[l];
      const auto& cur = history[t].masks[l];
      ASSERT_EQ(prev.empty(), cur.empty());
      if (cur.empty()) continue;
      for (std::size_t i = 0; i < cur.data.size(); ++i) {
        // No resurrection: a slot that was off stays off.
        if (prev.data[i] == 0.0f) {
          EXPECT_EQ(cur.data[i], 0.0f);
        }
        // A slot that is off now was off at the start of this epoch (the mask
        // only changes at the boundary), so its weight has not moved since
        // the previous snapshot.
        if (cur.data[i] == 0.0f && prev.data[i] == 0.0f) {
          const float wa = history[t - 1].weights[l][i];
          const float wb = history[t].weights[l][i];
          EXPECT_EQ(std::memcmp(&wa, &wb, sizeof(float)), 0);
        }
      }
    }
  }
}

TEST(LbcTrain, DegenerateWindowFiresBeforeTheFirstBatch) {
  RunConfig cfg = smoke_config();
  cfg.removal_begin_epoch = 0;
  cfg.removal_end_epoch = 0;  // one-shot removal at epoch 0
  const auto [train_set, val_set] = smoke_data<float>(cfg);
  const auto r = lbc_train(make_network<float>(cfg.arch), train_set, val_set, cfg);
  ASSERT_FALSE(r.metrics.empty());
  // The whole budget fires before epoch 0's first batch, so already the first
  // reported density sits on the constraint.
  EXPECT_EQ(r.metrics.front().density, 0.5);
  EXPECT_TRUE(r.constrained);
}

TEST(LbcTrain, AllExemptTrainsDense) {
  RunConfig cfg = smoke_config();
  cfg.exempt_layers = {"fc0", "fc1"};
  const auto [train_set, val_set] = smoke_data<float>(cfg);
  const auto r = lbc_train(make_network<float>(cfg.arch), train_set, val_set, cfg);
  EXPECT_TRUE(r.constrained);  // vacuously: nothing to constrain
  EXPECT_TRUE(r.layers.empty());
  for (const auto& row : r.metrics) {
    EXPECT_EQ(row.density, 1.0);
    EXPECT_EQ(row.flops_ratio, 1.0);
  }
  for (const auto& mask : r.masks) EXPECT_TRUE(mask.empty());
}

TEST(LbcTrain, EmptyTrainingSetThrows) {
  const RunConfig cfg = smoke_config();
  Dataset<float> empty;
  const auto val = make_blobs<float>(8, 8, 3, 0);
  EXPECT_THROW(lbc_train(make_network<float>(cfg.arch), empty, val, cfg), std::invalid_argument);
}

TEST(LbcTrain, EventsLogIsCompleteJsonl) {
  const RunConfig cfg = smoke_config();
  const auto [train_set, val_set] = smoke_data<float>(cfg);
  std::ostringstream events;
  TrainHooks<float> hooks;
  hooks.events = &events;
  const auto r = lbc_train(make_network<float>(cfg.arch), train_set, val_set, cfg, hooks);

  std::vector<nlohmann::json> lines;
  std::istringstream is(events.str());
  for (std::string line; std::getline(is, line);) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 1u + cfg.epochs + 1u);

  EXPECT_EQ(lines.front().at("event"), "run_start");
  EXPECT_EQ(lines.front().at("config").at("n"), cfg.n);
  EXPECT_EQ(lines.front().at("config").at("epochs"), cfg.epochs);
  EXPECT_EQ(lines.front().at("collection_size"), 6u);
  ASSERT_EQ(lines.front().at("layers").size(), 2u);
  EXPECT_EQ(lines.front().at("layers")[0].at("name"), "fc0");
  EXPECT_GT(lines.front().at("layers")[0].at("forward_macs").get<double>(), 0.0);

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto& ev = lines[1 + e];
    EXPECT_EQ(ev.at("event"), "epoch");
    EXPECT_EQ(ev.at("epoch"), e);
    for (const char* key : {"lr", "train_loss", "val_loss", "val_accuracy", "density", "flops_ratio"}) {
      EXPECT_TRUE(ev.contains(key)) << key;
    }
    EXPECT_EQ(ev.at("density"), r.metrics[e].density);
  }

  EXPECT_EQ(lines.back().at("event"), "run_end");
  EXPECT_EQ(lines.back().at("constrained"), true);
  EXPECT_EQ(lines.back().at("final_val_loss").get<double>(), r.final_val_loss);
}

TEST(RunComparison, SeedMajorGrid) {
  RunConfig cfg = smoke_config();
  cfg.epochs = 3;
  cfg.removal_end_epoch = 1;
  const auto [train_set, val_set] = smoke_data<float>(cfg);
  const std::vector<CriterionKind> kinds{CriterionKind::kLbcScore, CriterionKind::kMagnitude};
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  const auto rows = run_comparison<float>([&] { return make_network<float>(cfg.arch); }, train_set,
                                          val_set, cfg, kinds, seeds);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].seed, seeds[i / 2]);
    EXPECT_EQ(rows[i].kind, kinds[i % 2]);
    EXPECT_EQ(rows[i].epochs, 3u);
  }
  const std::string line = comparison_csv_row(rows[1]);
  EXPECT_EQ(line.rfind("magnitude,0,", 0), 0u);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
  EXPECT_STREQ(comparison_csv_header(), "kind,seed,final_train_loss,final_val_loss,val_accuracy,epochs");
}

TEST(Median, OddEvenEmpty) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_EQ(median({5.0}), 5.0);
  EXPECT_THROW(median({}), std::invalid_argument);
}

}  // namespace
}  // namespace lbc
