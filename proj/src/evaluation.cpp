// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tcnimu/error.hpp"
#include "tcnimu/json_fields.hpp"

namespace tcnimu {

using json = nlohmann::json;

IoaReport compute_ioa(std::span<const int> predicted, std::span<const int> truth,
                      std::span<const int> activity, std::size_t activities) {
  if (predicted.size() != truth.size() || truth.size() != activity.size())
    throw DataError("compute_ioa: predictions, truths and activities differ in length");
  std::vector<std::size_t> plus(activities, 0), minus(activities, 0);
  IoaReport r;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (activity[i] < 0) {
      ++r.unlabeled;
      continue;
    }
    const auto a = static_cast<std::size_t>(activity[i]);
    if (a >= activities)
      throw DataError("compute_ioa: activity " + std::to_string(activity[i]) + " outside [0, " +
                      std::to_string(activities) + ")");
    const bool ok = predicted[i] == truth[i];
    (ok ? plus : minus)[a]++;
    hits += ok;
    ++r.total;
  }
  for (std::size_t a = 0; a < activities; ++a) {
    const std::size_t n = plus[a] + minus[a];
    if (n == 0) {
      r.omitted.push_back(static_cast<int>(a));
      continue;
    }
    r.rows.push_back({static_cast<int>(a), plus[a], minus[a],
                      static_cast<double>(plus[a]) / static_cast<double>(n)});
  }
  r.overall_accuracy = r.total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(r.total);
  return r;
}

bool group_hit(const Identification &id, int truth) {
  return std::find(id.subjects.begin(), id.subjects.end(), truth) != id.subjects.end();
}

// ---- LOOCV ----------------------------------------------------------------------

TrainConfig loocv_preset(const std::string &name) {
  TrainConfig t;
  if (name == "text") {
    t.batch_size = 100;
    t.epochs = 10;
    t.lr = 1e-4;
  } else if (name == "table") {
    t.batch_size = 100;
    t.epochs = 50;
    t.lr = 1e-3;
  } else {
    throw ConfigError("unknown LOOCV preset '" + name + "' (text|table)");
  }
  return t;
}

LoocvReport run_loocv(const std::vector<Window> &windows, const std::vector<SubjectMeta> &subjects,
                      const AttributeSchema &schema, const LimbGrouping &grouping,
                      const LoocvOptions &options, const ProgressLog &log) {
  if (windows.empty())
    throw DataError("loocv: no windows");
  const AttributeTable table = build_table(subjects, schema);
  const std::vector<int> ids = subject_ids(windows);
  for (int id : ids)
    table.row(id); // every subject with windows must have metadata

  ModelConfig mc = options.model;
  mc.grouping = grouping;
  mc.channels = windows.front().data.dim(1);
  mc.window_len = windows.front().data.dim(0);
  mc.head = Head::sigmoid;
  mc.outputs = schema.bits();
  mc.validate();

  LoocvReport report;
  report.schema = schema.name;
  report.bit_names = schema.bit_names();
  std::vector<int> folds = options.only_folds.empty() ? ids : options.only_folds;

  for (std::size_t fold = 0; fold < folds.size(); ++fold) {
    const int held = folds[fold];
    SplitSpec spec;
    spec.strategy = SplitStrategy::leave_one_subject_out;
    spec.held_out_subject = held;
    spec.loso_train = options.loso_train;
    Splits sp = split(windows, spec);

    LoocvFold f;
    f.held_out = held;
    f.train_subjects = subject_ids(sp.train);
    f.val_subjects = subject_ids(sp.val);
    f.test_subjects = subject_ids(sp.test);
    auto leaks = [&](const std::vector<int> &v) { return std::find(v.begin(), v.end(), held) != v.end(); };
    if (leaks(f.train_subjects) || leaks(f.val_subjects) || f.test_subjects != std::vector<int>{held})
      throw StateError("loocv fold " + std::to_string(held) + ": held-out subject leaked into training");

    if (options.normalize) {
      const ChannelStats stats = fit_channel_stats(sp.train);
      sp.train = normalize(std::move(sp.train), stats);
      sp.val = normalize(std::move(sp.val), stats);
      sp.test = normalize(std::move(sp.test), stats);
    }
    f.train_windows = sp.train.size();
    f.val_windows = sp.val.size();
    f.test_windows = sp.test.size();

    TrainConfig tc = options.train;
    tc.seed = mix_seed(options.train.seed, static_cast<std::uint64_t>(held));
    Rng init_rng(mix_seed(tc.seed, 0));
    const LabeledSet train_set = attribute_set(std::move(sp.train), table);
    const LabeledSet val_set = attribute_set(std::move(sp.val), table);
    const LabeledSet test_set = attribute_set(std::move(sp.test), table);
    TrainResult tr = train(build(mc, init_rng), train_set, val_set, tc,
                           log ? ProgressLog([&](const std::string &s) { log("fold " + std::to_string(held) + " " + s); })
                               : ProgressLog());
    const EvalResult ev = evaluate(tr.best, test_set, tc.batch_size);
    f.metrics = tr.metrics;
    f.metrics.test_accuracy = ev.accuracy;
    f.metrics.test_wf1 = ev.wf1;
    f.metrics.test_confusion = ev.confusion;
    f.truth_bits = table.row(held).bits;
    f.bit_accuracy = ev.bit_accuracy;
    f.mean_bit_accuracy = aggregate(f.bit_accuracy).mean;

    std::size_t cos_hits = 0, prm_hits = 0, agree = 0;
    const std::size_t m = mc.outputs;
    for (std::size_t w = 0; w < test_set.size(); ++w) {
      const std::span<const double> a(ev.scores.data() + w * m, m);
      const Identification c = nna_identify(a, table, Metric::cosine);
      const Identification p = nna_identify(a, table, Metric::prm);
      cos_hits += group_hit(c, held);
      prm_hits += group_hit(p, held);
      agree += c.subjects == p.subjects;
      ++f.cosine_retrieved[c.subjects.front()];
    }
    const double n = static_cast<double>(test_set.size());
    f.cosine_hit = 100.0 * static_cast<double>(cos_hits) / n;
    f.prm_hit = 100.0 * static_cast<double>(prm_hits) / n;
    f.metric_agreement = 100.0 * static_cast<double>(agree) / n;
    if (log) {
      std::ostringstream s;
      s.setf(std::ios::fixed);
      s.precision(2);
      s << "fold " << held << " (" << fold + 1 << "/" << folds.size() << ") mean bit acc "
        << f.mean_bit_accuracy << " cosine hit " << f.cosine_hit << " prm hit " << f.prm_hit;
      log(s.str());
    }
    report.folds.push_back(std::move(f));
  }

  const std::size_t m = schema.bits();
  for (std::size_t b = 0; b < m; ++b) {
    std::vector<double> v;
    for (const auto &f : report.folds)
      v.push_back(f.bit_accuracy[b]);
    report.bit_accuracy.push_back(aggregate(v));
  }
  std::vector<double> mean, cos, prm;
  for (const auto &f : report.folds) {
    mean.push_back(f.mean_bit_accuracy);
    cos.push_back(f.cosine_hit);
    prm.push_back(f.prm_hit);
  }
  report.mean_bit_accuracy = aggregate(mean);
  report.cosine_hit = aggregate(cos);
  report.prm_hit = aggregate(prm);
  return report;
}

// ---- reports ---------------------------------------------------------------

std::string format_mean_sd(const Aggregate &a, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, a.mean, decimals, a.sd);
  return buf;
}

json report_to_json(const Report &r) {
  json rows = json::array();
  for (const auto &row : r.rows)
    rows.push_back({{"key", row.key},
                    {"mean", row.value.mean},
                    {"sd", row.value.sd},
                    {"n", row.value.n},
                    {"formatted", format_mean_sd(row.value)}});
  return {{"version", kReportVersion}, {"kind", r.kind}, {"details", r.details}, {"rows", rows}};
}

Report report_from_json(const json &doc) {
  try {
    if (doc.at("version").get<int>() != kReportVersion)
      throw SchemaError("unsupported report version " + doc.at("version").dump());
    Report r;
    r.kind = doc.at("kind").get<std::string>();
    r.details = doc.value("details", json::object());
    for (const auto &row : doc.at("rows"))
      r.rows.push_back({row.at("key").get<std::string>(),
                        {row.at("mean").get<double>(), row.at("sd").get<double>(), row.at("n").get<std::size_t>()}});
    return r;
  } catch (const json::exception &e) {
    throw SchemaError(std::string("report: ") + e.what());
  }
}

namespace {

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_fields(const std::string &line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"')
        out.back() += line[++i];
      else if (c == '"')
        quoted = false;
      else
        out.back() += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

std::string report_to_csv(const Report &r) {
  std::string out = "key,mean,sd,n\n";
  for (const auto &row : r.rows)
    out += csv_field(row.key) + "," + g17(row.value.mean) + "," + g17(row.value.sd) + "," +
           std::to_string(row.value.n) + "\n";
  return out;
}

Report report_from_csv(const std::string &csv, const std::string &kind) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || csv_fields(line) != std::vector<std::string>{"key", "mean", "sd", "n"})
    throw SchemaError("report CSV: header must be key,mean,sd,n");
  Report r;
  r.kind = kind;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      continue;
    const auto f = csv_fields(line);
    if (f.size() != 4)
      throw SchemaError("report CSV line " + std::to_string(line_no) + ": expected 4 fields");
    try {
      r.rows.push_back({f[0], {std::stod(f[1]), std::stod(f[2]), static_cast<std::size_t>(std::stoull(f[3]))}});
    } catch (const std::exception &) {
      throw SchemaError("report CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return r;
}

void emit_report(const Report &r, const std::filesystem::path &stem) {
  if (r.rows.empty())
    throw StateError("report '" + r.kind + "' has no rows to emit");
  json_fields::write_file(stem.string() + ".json", report_to_json(r));
  std::ofstream out(stem.string() + ".csv", std::ios::trunc);
  if (!out)
    throw IoError("cannot write " + stem.string() + ".csv");
  out << report_to_csv(r);
}

Report repeat_report(const RepeatSummary &s) {
  Report r;
  r.kind = "person_id";
  r.rows = {{"accuracy", s.accuracy}, {"wf1", s.wf1}};
  json runs = json::array();
  for (std::size_t i = 0; i < s.runs.size(); ++i)
    runs.push_back({{"seed", s.seeds[i]},
                    {"test_accuracy", s.runs[i].test_accuracy},
                    {"test_wf1", s.runs[i].test_wf1},
                    {"best_epoch", s.runs[i].best_epoch}});
  r.details["runs"] = runs;
  r.details["summary"] = {{"accuracy", format_mean_sd(s.accuracy)}, {"wf1", format_mean_sd(s.wf1)}};
  return r;
}

Report ioa_report(const std::vector<IoaReport> &runs, const std::vector<std::string> &names) {
  if (runs.empty())
    throw StateError("ioa report: no runs");
  Report r;
  r.kind = "ioa";
  std::set<int> acts;
  for (const auto &run : runs)
    for (const auto &row : run.rows)
      acts.insert(row.activity);
  for (int a : acts) {
    std::vector<double> v;
    for (const auto &run : runs)
      for (const auto &row : run.rows)
        if (row.activity == a)
          v.push_back(row.ioa);
    const std::string key = static_cast<std::size_t>(a) < names.size() ? names[static_cast<std::size_t>(a)]
                                                                       : "activity" + std::to_string(a);
    r.rows.push_back({key, aggregate(v)});
  }
  json per_run = json::array();
  for (const auto &run : runs) {
    json rows = json::array();
    for (const auto &row : run.rows)
      rows.push_back({{"activity", row.activity}, {"n_plus", row.n_plus}, {"n_minus", row.n_minus}, {"ioa", row.ioa}});
    per_run.push_back({{"rows", rows},
                       {"omitted", run.omitted},
                       {"unlabeled", run.unlabeled},
                       {"total", run.total},
                       {"overall_accuracy", run.overall_accuracy}});
  }
  r.details["runs"] = per_run;
  return r;
}

Report loocv_report(const LoocvReport &l) {
  Report r;
  r.kind = "loocv";
  for (std::size_t b = 0; b < l.bit_names.size(); ++b)
    r.rows.push_back({l.bit_names[b], l.bit_accuracy[b]});
  r.rows.push_back({"mean_bit_accuracy", l.mean_bit_accuracy});
  r.rows.push_back({"nna_cosine_hit", l.cosine_hit});
  r.rows.push_back({"nna_prm_hit", l.prm_hit});
  r.details["schema"] = l.schema;
  json folds = json::array();
  for (const auto &f : l.folds) {
    json retrieved = json::object();
    for (auto [id, n] : f.cosine_retrieved)
      retrieved[std::to_string(id)] = n;
    folds.push_back({{"held_out", f.held_out},
                     {"train_subjects", f.train_subjects},
                     {"val_subjects", f.val_subjects},
                     {"test_subjects", f.test_subjects},
                     {"windows", {f.train_windows, f.val_windows, f.test_windows}},
                     {"truth_bits", f.truth_bits},
                     {"bit_accuracy", f.bit_accuracy},
                     {"mean_bit_accuracy", f.mean_bit_accuracy},
                     {"cosine_hit", f.cosine_hit},
                     {"prm_hit", f.prm_hit},
                     {"metric_agreement", f.metric_agreement},
                     {"cosine_retrieved", retrieved},
                     {"metrics", f.metrics.to_json()}});
  }
  r.details["folds"] = folds;
  return r;
}

} // namespace tcnimu
