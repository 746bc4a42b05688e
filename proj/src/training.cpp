// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tcnimu/error.hpp"
#include "tcnimu/json_fields.hpp"
#include "tcnimu/ops.hpp"

namespace tcnimu {

using json_fields::json;
using json_fields::Reader;

// ---- config ---------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr > 0.0) && !(lr == 0.0 && allow_zero_lr))
    throw ConfigError("train: lr must be > 0");
  if (batch_size < 1)
    throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1)
    throw ConfigError("train: epochs must be >= 1");
  if (!(noise_sigma >= 0.0))
    throw ConfigError("train: noise_sigma must be >= 0");
  if (patience < 1)
    throw ConfigError("train: patience must be >= 1");
  rmsprop().validate();
}

RmsPropConfig TrainConfig::rmsprop() const {
  RmsPropConfig r = optimizer;
  r.lr = lr;
  r.allow_zero_lr = allow_zero_lr;
  return r;
}

json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"noise_sigma", noise_sigma},
          {"patience", patience},
          {"seed", seed},
          {"alpha", optimizer.alpha},
          {"eps", optimizer.eps},
          {"momentum", optimizer.momentum},
          {"weight_decay", optimizer.weight_decay},
          {"allow_zero_lr", allow_zero_lr},
          {"check_replay", check_replay}};
}

TrainConfig TrainConfig::from_json(const json &doc, const std::string &where) {
  const Reader r(doc, where);
  r.only_keys({"lr", "batch_size", "epochs", "noise_sigma", "patience", "seed", "alpha", "eps",
               "momentum", "weight_decay", "allow_zero_lr", "check_replay"});
  TrainConfig c;
  auto count = [&](const char *key, std::size_t fallback) {
    const long long v = r.integer(key, static_cast<long long>(fallback));
    if (v < 1)
      r.fail_at(key, "must be >= 1");
    return static_cast<std::size_t>(v);
  };
  c.lr = r.number("lr", c.lr);
  c.batch_size = count("batch_size", c.batch_size);
  c.epochs = count("epochs", c.epochs);
  c.patience = count("patience", c.patience);
  c.noise_sigma = r.number("noise_sigma", c.noise_sigma);
  const long long seed = r.integer("seed", static_cast<long long>(c.seed));
  if (seed < 0)
    r.fail_at("seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.optimizer.alpha = r.number("alpha", c.optimizer.alpha);
  c.optimizer.eps = r.number("eps", c.optimizer.eps);
  c.optimizer.momentum = r.number("momentum", c.optimizer.momentum);
  c.optimizer.weight_decay = r.number("weight_decay", c.optimizer.weight_decay);
  c.allow_zero_lr = r.boolean("allow_zero_lr", false);
  c.check_replay = r.boolean("check_replay", false);
  try {
    c.validate();
  } catch (const ConfigError &e) {
    r.fail(e.what());
  }
  return c;
}

// ---- datasets ---------------------------------------------------------------

void LabeledSet::check(const ModelConfig &config, const char *what) const {
  if (windows.empty())
    throw DataError(std::string(what) + " set is empty");
  for (const Window &w : windows)
    if (w.data.rank() != 2 || w.data.dim(0) != config.window_len || w.data.dim(1) != config.channels)
      throw DataError(std::string(what) + " window of '" + w.recording_id + "' has shape " +
                      shape_str(w.data.shape()) + ", model expects [" +
                      std::to_string(config.window_len) + ", " + std::to_string(config.channels) + "]");
  if (config.head == Head::softmax) {
    if (labels.size() != windows.size())
      throw DataError(std::string(what) + " set has no class label per window");
    for (int l : labels)
      if (l < 0 || static_cast<std::size_t>(l) >= config.outputs)
        throw DataError(std::string(what) + " label " + std::to_string(l) + " is outside the " +
                        std::to_string(config.outputs) + " model classes");
  } else {
    if (targets.size() != windows.size())
      throw DataError(std::string(what) + " set has no attribute vector per window");
    for (const auto &t : targets)
      if (t.size() != config.outputs)
        throw DataError(std::string(what) + " attribute vector has " + std::to_string(t.size()) +
                        " bits, model head has " + std::to_string(config.outputs));
  }
}

LabeledSet identity_set(std::vector<Window> windows, const std::vector<int> &subjects) {
  LabeledSet s;
  s.labels.reserve(windows.size());
  for (const Window &w : windows) {
    const auto it = std::find(subjects.begin(), subjects.end(), w.subject_id);
    if (it == subjects.end())
      throw DataError("window subject " + std::to_string(w.subject_id) + " has no class index");
    s.labels.push_back(static_cast<int>(it - subjects.begin()));
  }
  s.windows = std::move(windows);
  return s;
}

LabeledSet attribute_set(std::vector<Window> windows, const AttributeTable &table) {
  LabeledSet s;
  s.targets.reserve(windows.size());
  for (const Window &w : windows)
    s.targets.push_back(table.row(w.subject_id).bits);
  s.windows = std::move(windows);
  return s;
}

Tensor gather_batch(const std::vector<Window> &windows, std::span<const std::size_t> order) {
  if (order.empty())
    throw StateError("gather_batch: empty batch");
  const Shape ws = windows.at(order[0]).data.shape();
  const std::size_t per = shape_size(ws);
  Tensor out({order.size(), ws[0], ws[1]});
  for (std::size_t b = 0; b < order.size(); ++b) {
    const Tensor &d = windows.at(order[b]).data;
    if (d.shape() != ws)
      throw DataError("gather_batch: windows of differing shapes in one batch");
    std::copy_n(d.data(), per, out.data() + b * per);
  }
  return out;
}

// ---- metrics ----------------------------------------------------------------

Confusion make_confusion(std::size_t classes) {
  return Confusion(classes, std::vector<std::size_t>(classes, 0));
}

double accuracy(const Confusion &cm) {
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < cm.size(); ++i)
    for (std::size_t j = 0; j < cm[i].size(); ++j) {
      total += cm[i][j];
      if (i == j)
        hit += cm[i][j];
    }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

double weighted_f1(const Confusion &cm) {
  const std::size_t k = cm.size();
  std::vector<double> support(k, 0.0), predicted(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (cm[i].size() != k)
      throw ConfigError("weighted_f1: confusion matrix is not square");
    for (std::size_t j = 0; j < k; ++j) {
      const double v = static_cast<double>(cm[i][j]);
      support[i] += v;
      predicted[j] += v;
      total += v;
    }
  }
  if (total == 0.0)
    return 0.0;
  double wf1 = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(cm[c][c]);
    if (support[c] == 0.0 || predicted[c] == 0.0 || tp == 0.0)
      continue; // precision or recall undefined or zero: F1 = 0
    const double p = tp / predicted[c], r = tp / support[c];
    wf1 += support[c] / total * (2.0 * p * r / (p + r));
  }
  return 100.0 * wf1;
}

EvalResult evaluate(ModelParams &params, const LabeledSet &set, std::size_t batch_size) {
  const ModelConfig &cfg = params.config();
  set.check(cfg, "evaluation");
  if (batch_size < 1)
    throw ConfigError("evaluate: batch_size must be >= 1");
  const bool softmax = cfg.head == Head::softmax;
  EvalResult r;
  r.confusion = make_confusion(softmax ? cfg.outputs : 2);
  r.scores = Tensor({set.size(), cfg.outputs});
  std::vector<std::size_t> bit_hits(softmax ? 0 : cfg.outputs, 0);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  Rng unused(0);
  double loss_sum = 0.0;

  for (std::size_t from = 0; from < set.size(); from += batch_size) {
    const std::size_t to = std::min(set.size(), from + batch_size);
    const std::span<const std::size_t> idx(order.data() + from, to - from);
    ForwardResult f = forward(params, gather_batch(set.windows, idx), Mode::eval, unused);
    const Tensor &s = f.scores();
    std::copy_n(s.data(), s.size(), r.scores.data() + from * cfg.outputs);
    const std::size_t n = to - from;
    if (softmax) {
      std::vector<int> lab(set.labels.begin() + static_cast<std::ptrdiff_t>(from),
                           set.labels.begin() + static_cast<std::ptrdiff_t>(to));
      loss_sum += ops::cross_entropy_loss(f.tape.value(f.logits), lab).loss * static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) {
        const double *row = s.data() + b * cfg.outputs;
        const int pred = static_cast<int>(std::max_element(row, row + cfg.outputs) - row);
        r.predicted.push_back(pred);
        ++r.confusion[static_cast<std::size_t>(lab[b])][static_cast<std::size_t>(pred)];
      }
    } else {
      Tensor tgt({n, cfg.outputs});
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < cfg.outputs; ++k)
          tgt[b * cfg.outputs + k] = set.targets[from + b][k];
      loss_sum += ops::bce_loss(s, tgt).loss * static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < cfg.outputs; ++k) {
          const int truth = set.targets[from + b][k];
          const int pred = s[b * cfg.outputs + k] >= 0.5 ? 1 : 0;
          ++r.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
          bit_hits[k] += truth == pred;
        }
    }
  }
  r.loss = loss_sum / static_cast<double>(set.size());
  r.accuracy = accuracy(r.confusion);
  r.wf1 = weighted_f1(r.confusion);
  for (std::size_t hits : bit_hits)
    r.bit_accuracy.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(set.size()));
  return r;
}

// ---- run metrics ------------------------------------------------------------

json RunMetrics::to_json() const {
  return {{"train_loss", train_loss},
          {"val_loss", val_loss},
          {"val_accuracy", val_accuracy},
          {"val_wf1", val_wf1},
          {"best_epoch", best_epoch},
          {"epochs_run", epochs_run},
          {"early_stopped", early_stopped},
          {"test_accuracy", test_accuracy},
          {"test_wf1", test_wf1},
          {"test_confusion", test_confusion}};
}

RunMetrics RunMetrics::from_json(const json &doc) {
  RunMetrics m;
  try {
    doc.at("train_loss").get_to(m.train_loss);
    doc.at("val_loss").get_to(m.val_loss);
    doc.at("val_accuracy").get_to(m.val_accuracy);
    doc.at("val_wf1").get_to(m.val_wf1);
    doc.at("best_epoch").get_to(m.best_epoch);
    doc.at("epochs_run").get_to(m.epochs_run);
    doc.at("early_stopped").get_to(m.early_stopped);
    doc.at("test_accuracy").get_to(m.test_accuracy);
    doc.at("test_wf1").get_to(m.test_wf1);
    doc.at("test_confusion").get_to(m.test_confusion);
  } catch (const json::exception &e) {
    throw SchemaError(std::string("run metrics: ") + e.what());
  }
  return m;
}

// ---- training loop ------------------------------------------------------------

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

} // namespace

TrainResult train(ModelParams init, const LabeledSet &train_set, const LabeledSet &val_set,
                  const TrainConfig &config, const EpochLog &log) {
  config.validate();
  const ModelConfig &mc = init.config();
  train_set.check(mc, "training");
  val_set.check(mc, "validation");
  const RmsPropConfig opt = config.rmsprop();
  const bool softmax = mc.head == Head::softmax;

  Rng shuffle_rng(mix_seed(config.seed, 1));
  Rng noise_rng(mix_seed(config.seed, 2));
  Rng dropout_rng(mix_seed(config.seed, 3));

  ModelParams params = std::move(init);
  params.zero_grad();
  auto pointers = params.pointers();
  TrainResult result{params, {}};
  RunMetrics &m = result.metrics;
  double best_wf1 = -1.0, best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t from = 0; from < order.size(); from += config.batch_size, ++batch_index) {
      const std::size_t to = std::min(order.size(), from + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + from, to - from);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      try {
        const Tensor x = add_gaussian_noise(gather_batch(train_set.windows, idx), config.noise_sigma, noise_rng);
        ForwardResult f = forward(params, x, Mode::train, dropout_rng);
        if (config.check_replay && batch_index == 0 && !f.tape.replay_matches())
          throw StateError(where + ": tape replay is not bit-exact");
        ops::LossResult loss;
        if (softmax) {
          std::vector<int> lab;
          for (std::size_t i : idx)
            lab.push_back(train_set.labels[i]);
          loss = ops::cross_entropy_loss(f.tape.value(f.logits), lab);
          if (!std::isfinite(loss.loss))
            throw NumericError("loss is not finite");
          f.tape.backward(f.logits, loss.grad);
        } else {
          Tensor tgt({idx.size(), mc.outputs});
          for (std::size_t b = 0; b < idx.size(); ++b)
            for (std::size_t k = 0; k < mc.outputs; ++k)
              tgt[b * mc.outputs + k] = train_set.targets[idx[b]][k];
          loss = ops::bce_loss(f.scores(), tgt);
          if (!std::isfinite(loss.loss))
            throw NumericError("loss is not finite");
          f.tape.backward(f.output, loss.grad);
        }
        for (const ParamTensor *p : pointers)
          if (!p->grad.all_finite())
            throw NumericError("gradient of " + p->name + " is not finite");
        rmsprop_step(pointers, opt);
        loss_sum += loss.loss * static_cast<double>(idx.size());
      } catch (const NumericError &e) {
        throw NumericError("training aborted at " + where + ": " + e.what());
      }
    }
    m.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    const EvalResult val = evaluate(params, val_set, config.batch_size);
    m.val_loss.push_back(val.loss);
    m.val_accuracy.push_back(val.accuracy);
    m.val_wf1.push_back(val.wf1);
    m.epochs_run = epoch;
    // equal wF1 (typically a saturated 100) falls back to the lower val loss
    const bool improved = val.wf1 > best_wf1 || (val.wf1 == best_wf1 && val.loss < best_loss);
    if (improved) {
      best_wf1 = val.wf1;
      best_loss = val.loss;
      m.best_epoch = epoch;
      result.best = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (log)
      log("epoch " + std::to_string(epoch) + " train_loss " + fixed(m.train_loss.back(), 6) +
          " val_loss " + fixed(val.loss, 6) + " val_acc " + fixed(val.accuracy, 2) + " val_wf1 " +
          fixed(val.wf1, 2) + (improved ? " *" : ""));
    if (since_best >= config.patience && epoch < config.epochs) {
      m.early_stopped = true;
      break;
    }
  }
  result.best.zero_grad();
  return result;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = values.size();
  if (a.n == 0)
    return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(a.n);
  double sq = 0.0;
  for (double v : values)
    sq += (v - a.mean) * (v - a.mean);
  a.sd = std::sqrt(sq / static_cast<double>(a.n));
  return a;
}

RepeatSummary repeat_runs(std::size_t n, std::uint64_t seed,
                          const std::function<RunMetrics(std::uint64_t)> &run) {
  if (n < 1)
    throw ConfigError("repeat count must be >= 1");
  RepeatSummary s;
  std::vector<double> acc, wf1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t run_seed = i == 0 ? seed : mix_seed(seed, 1000 + i);
    s.seeds.push_back(run_seed);
    s.runs.push_back(run(run_seed));
    acc.push_back(s.runs.back().test_accuracy);
    wf1.push_back(s.runs.back().test_wf1);
  }
  s.accuracy = aggregate(acc);
  s.wf1 = aggregate(wf1);
  return s;
}

} // namespace tcnimu
