// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

// Command-line front end. Every command reads one JSON config; see README.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tcnimu/error.hpp"
#include "tcnimu/experiment.hpp"
#include "tcnimu/json_fields.hpp"
#include "tcnimu/log.hpp"
#include "tcnimu/synth.hpp"

namespace fs = std::filesystem;
using namespace tcnimu;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
  std::optional<std::size_t> repeat;
};

void add_common(CLI::App *cmd, Flags &f, bool config_required = true) {
  auto *opt = cmd->add_option("--config,-c", f.config, "experiment config (JSON)");
  if (config_required)
    opt->required();
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--out,-o", f.out, "override the output directory");
  cmd->add_flag("--deterministic", f.deterministic,
                "omit wall-clock values from outputs and verify tape replay, so reruns are byte-identical");
  cmd->add_option("--repeat", f.repeat, "override the number of repeated runs");
}

ExperimentConfig load_config(const Flags &f) {
  ExperimentConfig c = ExperimentConfig::load(f.config);
  if (f.seed)
    c.seed = *f.seed;
  if (!f.out.empty())
    c.out = fs::absolute(f.out);
  if (f.deterministic)
    c.deterministic = true;
  if (f.repeat) {
    if (*f.repeat < 1)
      throw ConfigError("--repeat must be >= 1");
    c.repeat = *f.repeat;
  }
  return c;
}

int exit_code(ErrorCategory c) {
  switch (c) {
  case ErrorCategory::config: return 2;
  case ErrorCategory::data: return 3;
  case ErrorCategory::io: return 4;
  case ErrorCategory::schema: return 5;
  case ErrorCategory::numeric: return 6;
  case ErrorCategory::state: return 7;
  }
  return 1;
}

void print_rows(const Report &r) {
  std::cout << r.kind << '\n';
  for (const ReportRow &row : r.rows)
    std::cout << "  " << row.key << "  " << format_mean_sd(row.value) << '\n';
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"tcnimu: person identification and soft-biometrics from IMU windows"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("--quiet,-q", quiet, "no progress output on stderr");

  Flags f;
  auto *prepare = app.add_subcommand("prepare", "segment, split and cache a dataset");
  auto *synth = app.add_subcommand("synth", "write a synthetic dataset");
  auto *train = app.add_subcommand("train", "train (repeat runs) and write metrics, report and checkpoint");
  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto *loocv = app.add_subcommand("loocv", "leave-one-subject-out soft-biometrics");
  auto *ioa = app.add_subcommand("ioa", "impact of activities on identification");
  auto *explain = app.add_subcommand("explain", "epsilon-LRP relevance of one test window");
  auto *report = app.add_subcommand("report", "re-render a report JSON as CSV and a text table");
  for (auto *cmd : {prepare, train, eval, loocv, ioa, explain})
    add_common(cmd, f);
  add_common(synth, f, false);
  std::string report_in;
  report->add_option("report", report_in, "report JSON written by another command")->required();
  report->add_option("--out,-o", f.out, "output stem (default: next to the input)");

  CLI11_PARSE(app, argc, argv);
  set_log_sink(quiet ? LogSink{} : LogSink([](const std::string &l) { std::cerr << l << '\n'; }));
  const ProgressLog log = [](const std::string &l) { log_line(l); };

  try {
    if (synth->parsed()) {
      SynthSpec spec;
      if (!f.config.empty()) {
        if (!fs::is_regular_file(f.config))
          throw IoError("config not found: " + f.config);
        spec = SynthSpec::from_json(json_fields::read_file(f.config), f.config);
      }
      if (f.seed)
        spec.seed = *f.seed;
      const fs::path out = f.out.empty() ? fs::path("synthetic") : fs::path(f.out);
      cmd_synth(spec, out, log);
      std::cout << (out / "manifest.json").string() << '\n';
    } else if (report->parsed()) {
      fs::path stem = f.out.empty() ? fs::path(report_in).replace_extension() : fs::path(f.out);
      print_rows(cmd_report(report_in, stem, {}));
    } else {
      const ExperimentConfig c = load_config(f);
      if (prepare->parsed()) {
        const PreparedData d = cmd_prepare(c, log);
        std::cout << (d.cache_hit ? "cache hit " : "prepared ") << d.cache_dir.string() << '\n';
      } else if (train->parsed()) {
        print_rows(cmd_train(c, log));
      } else if (eval->parsed()) {
        const auto r = cmd_eval(c, log);
        std::printf("accuracy %.2f  wF1 %.2f\n", r["accuracy"].get<double>(), r["wf1"].get<double>());
      } else if (loocv->parsed()) {
        print_rows(cmd_loocv(c, log));
      } else if (ioa->parsed()) {
        print_rows(cmd_ioa(c, log));
      } else if (explain->parsed()) {
        std::cout << cmd_explain(c, log).dump(2) << '\n';
      }
    }
  } catch (const Error &e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception &e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
