// SPDX-License-Identifier: Apache-2.0
#pragma once

// The `lego` command line: one binary, nine subcommands.
//
// Exit codes: 0 ok, 1 usage, 2 data or validation error, 3 numeric failure
// (non-finite loss, failed oracle or gradient check). Diagnostics go to the
// error stream; results go to files or the output stream.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "lego/checkpoint.hpp"
#include "lego/dataset.hpp"
#include "lego/error.hpp"
#include "lego/evaluation.hpp"
#include "lego/export.hpp"
#include "lego/fusion.hpp"
#include "lego/graph.hpp"
#include "lego/oracle.hpp"
#include "lego/trainer.hpp"

namespace lego::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numeric = 3 };

struct State {
  std::optional<std::uint64_t> seed;

  // gen-data
  std::string out;
  SyntheticSpec synth;

  // build-graph, fuse, export-graph
  std::string features, features_a, features_b, graph_file;
  std::string relation = "clamped-cosine";
  double gamma = 1.0;
  bool raw_features = false;
  std::size_t p = 2, q = 3;
  std::string form = "full-matrix";
  std::string normalization = "raw";
  std::string weights_file;
  std::vector<double> sel_a, sel_b;
  double threshold = 0.5;
  std::string kind;
  std::string format;

  // train, eval
  std::string data;
  bool synthetic = false;
  std::string preset, config;
  std::vector<std::string> settings;
  std::string log;
  bool baseline = false;
  std::string train_split = "train", val_split = "test";
  std::string model, split = "test", json, csv, scores;

  // oracle-check, grad-check
  std::size_t n = 5, trials = 200, cases = 20;
  double lambda = 1.0, alpha = 0.5, tol = 1e-4, oracle_tol = 1e-9;
  std::size_t k = 2;

  // presets
  std::string preset_name;
};

namespace detail {

inline void add_seed(CLI::App* cmd, State& s) {
  cmd->add_option("--seed", s.seed, "RNG seed (64-bit)");
}

inline void add_relation(CLI::App* cmd, State& s) {
  cmd->add_option("--relation", s.relation, "cosine | clamped-cosine | gaussian");
  cmd->add_option("--gamma", s.gamma, "gaussian bandwidth");
  cmd->add_flag("--raw-features", s.raw_features, "skip row L2 normalization");
}

inline GraphOptions graph_options(const State& s) {
  return {Relation{parse_relation_kind(s.relation), s.gamma}, !s.raw_features};
}

inline void write_matrix_to(const Matrix& m, const std::string& path, std::ostream& out) {
  if (path.empty())
    write_matrix(out, m);
  else
    save_matrix(m, path);
}

inline SyntheticSpec synthetic_spec(const State& s) {
  SyntheticSpec spec = s.synth;
  if (s.seed) spec.seed = *s.seed;
  return spec;
}

inline Dataset load_data(const State& s) {
  if (s.synthetic == !s.data.empty()) throw DataError("give exactly one of --data or --synthetic");
  return s.synthetic ? generate_synthetic(synthetic_spec(s)) : load_dataset(s.data);
}

inline std::optional<std::string> split_arg(const std::string& v) {
  if (v.empty() || v == "all") return std::nullopt;
  return v;
}

inline std::pair<std::string, std::string> parse_setting(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw DataError("--set expects key=value, got '" + kv + "'");
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

}  // namespace detail

/// Builds the parser with every option bound into `s`.
inline std::unique_ptr<CLI::App> make_app(State& s) {
  auto app = std::make_unique<CLI::App>("Graph power fusion and degree-variance-regularized anomaly scoring", "lego");
  app->require_subcommand(1);
  app->allow_extras(false);

  auto* gen = app->add_subcommand("gen-data", "write a synthetic multi-modal dataset");
  gen->add_option("--out", s.out, "output directory")->required();
  gen->add_option("--videos", s.synth.n_videos, "number of videos");
  gen->add_option("--snippets", s.synth.snippets_per_video, "snippets per video");
  gen->add_option("--rate", s.synth.anomaly_rate, "fraction of abnormal snippets");
  gen->add_option("--sep", s.synth.cluster_separation, "anomaly offset length");
  gen->add_option("--sigma", s.synth.noise_sigma, "noise scale");
  gen->add_option("--correlation", s.synth.modality_correlation, "cross-modal anomaly correlation");
  gen->add_option("--center-norm", s.synth.center_norm, "norm of the base cluster centers");
  detail::add_seed(gen, s);

  auto* bg = app->add_subcommand("build-graph", "relationship graph of one feature file");
  bg->add_option("--features", s.features, "feature file (N d header)")->required();
  detail::add_relation(bg, s);
  bg->add_option("--out", s.out, "output matrix file (default: stdout)");
  detail::add_seed(bg, s);

  auto* fu = app->add_subcommand("fuse", "fused graph of two feature files");
  fu->add_option("--features-a", s.features_a, "modality a feature file")->required();
  fu->add_option("--features-b", s.features_b, "modality b feature file")->required();
  fu->add_option("--p", s.p, "max power of modality a");
  fu->add_option("--q", s.q, "max power of modality b");
  fu->add_option("--form", s.form, "full-matrix | outer-product");
  fu->add_option("--weights", s.weights_file, "(P+1)x(Q+1) matrix file for full-matrix");
  fu->add_option("--sel-a", s.sel_a, "selector a for outer-product")->delimiter(',');
  fu->add_option("--sel-b", s.sel_b, "selector b for outer-product")->delimiter(',');
  fu->add_option("--normalization", s.normalization, "raw | row-stochastic");
  detail::add_relation(fu, s);
  fu->add_option("--out", s.out, "output matrix file (default: stdout)");
  detail::add_seed(fu, s);

  auto* tr = app->add_subcommand("train", "train fusion weights and classifier");
  tr->add_option("--data", s.data, "dataset manifest");
  tr->add_flag("--synthetic", s.synthetic, "train on the default synthetic dataset");
  tr->add_option("--preset", s.preset, "hyperparameter preset");
  tr->add_option("--config", s.config, "config file (key = value)");
  tr->add_option("--set", s.settings, "override one config key, key=value (repeatable)");
  tr->add_option("--out", s.out, "checkpoint path")->required();
  tr->add_option("--log", s.log, "per-epoch log path");
  tr->add_flag("--baseline", s.baseline, "train the element-wise product baseline instead");
  tr->add_option("--train-split", s.train_split, "training split, or 'all'");
  tr->add_option("--val-split", s.val_split, "validation split, or 'all'");
  detail::add_seed(tr, s);

  auto* ev = app->add_subcommand("eval", "score a dataset split with a checkpoint");
  ev->add_option("--model", s.model, "checkpoint path")->required();
  ev->add_option("--data", s.data, "dataset manifest");
  ev->add_flag("--synthetic", s.synthetic, "evaluate on the default synthetic dataset");
  ev->add_option("--split", s.split, "split to score, or 'all'");
  ev->add_option("--json", s.json, "write the full report as JSON");
  ev->add_option("--csv", s.csv, "write a one-row CSV summary");
  ev->add_option("--scores", s.scores, "write 'score label' lines");
  detail::add_seed(ev, s);

  auto* oc = app->add_subcommand("oracle-check", "compare fuse() with a four-loop reference");
  oc->add_option("--n", s.n, "nodes");
  oc->add_option("--p", s.p, "max power of modality a");
  oc->add_option("--q", s.q, "max power of modality b");
  oc->add_option("--trials", s.trials, "random instances");
  oc->add_option("--tol", s.oracle_tol, "max allowed deviation");
  detail::add_seed(oc, s);

  auto* gc = app->add_subcommand("grad-check", "finite-difference check of the training loss");
  gc->add_option("--cases", s.cases, "toy bag pairs");
  gc->add_option("--n", s.n, "nodes per bag");
  gc->add_option("--p", s.p, "max power of modality a");
  gc->add_option("--q", s.q, "max power of modality b");
  gc->add_option("--lambda", s.lambda, "regularizer weight");
  gc->add_option("--alpha", s.alpha, "degree cut-off");
  gc->add_option("--k", s.k, "top-k degrees");
  gc->add_option("--tol", s.tol, "max relative error");
  detail::add_seed(gc, s);

  auto* eg = app->add_subcommand("export-graph", "write a graph as JSON or DOT");
  eg->add_option("--graph", s.graph_file, "matrix file");
  eg->add_option("--features", s.features, "feature file; its relationship graph is exported");
  detail::add_relation(eg, s);
  eg->add_option("--threshold", s.threshold, "keep edges with weight above this");
  eg->add_option("--kind", s.kind, "graph name written to the output");
  eg->add_option("--format", s.format, "json | dot (default: from --out extension)");
  eg->add_option("--out", s.out, "output file (default: stdout)");
  detail::add_seed(eg, s);

  auto* pr = app->add_subcommand("presets", "print preset hyperparameters");
  pr->add_option("name", s.preset_name, "preset tag (default: all)");
  detail::add_seed(pr, s);

  for (auto* sub : app->get_subcommands({})) sub->allow_extras(false);
  return app;
}

namespace detail {

inline int gen_data(State& s, std::ostream& out) {
  const Dataset ds = generate_synthetic(synthetic_spec(s));
  const auto manifest = save_dataset(ds, s.out);
  out << manifest.string() << '\n';
  return ok;
}

inline int build_graph_cmd(State& s, std::ostream& out) {
  const auto g = relationship_graph(load_features(s.features), graph_options(s));
  write_matrix_to(g.scores, s.out, out);
  return ok;
}

inline int fuse_cmd(State& s, std::ostream& out) {
  const auto opts = graph_options(s);
  const auto norm = parse_power_normalization(s.normalization);
  const auto ga = relationship_graph(load_features(s.features_a), opts);
  const auto gb = relationship_graph(load_features(s.features_b), opts);
  if (ga.nodes() != gb.nodes())
    throw DimensionMismatch("fuse: feature files have " + std::to_string(ga.nodes()) + " and " +
                            std::to_string(gb.nodes()) + " rows");
  const FusionForm form = parse_fusion_form(s.form);
  FusionWeights w = FusionWeights::initial(form, s.p, s.q);
  if (form == FusionForm::full_matrix && !s.weights_file.empty()) w = FusionWeights::full_matrix(load_matrix(s.weights_file));
  if (form == FusionForm::outer_product && (!s.sel_a.empty() || !s.sel_b.empty()))
    w = FusionWeights::outer_product(s.sel_a, s.sel_b);
  const auto fused = fuse(expand_powers(ga, s.p, norm), expand_powers(gb, s.q, norm), w);
  write_matrix_to(fused.scores, s.out, out);
  return ok;
}

inline int train_cmd(State& s, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> file_settings, overrides;
  if (!s.config.empty()) file_settings = load_config_file(s.config);
  if (!s.preset.empty()) overrides.emplace_back("preset", s.preset);
  for (const auto& kv : s.settings) overrides.push_back(parse_setting(kv));
  if (s.seed) overrides.emplace_back("seed", std::to_string(*s.seed));
  TrainConfig cfg = resolve_config(file_settings, overrides);
  if (s.baseline) cfg = product_baseline(cfg);
  const Dataset ds = load_data(s);
  const auto result = train(ds, cfg, split_arg(s.train_split), split_arg(s.val_split));
  save_model(result.model, s.out);
  if (!s.log.empty()) save_log(result.log, s.log);
  out << describe(cfg) << '\n' << format_log(result.log);
  return ok;
}

inline int eval_cmd(State& s, std::ostream& out) {
  const Model model = load_model(s.model);
  const Dataset ds = load_data(s);
  const auto report = evaluate_model(model, ds, split_arg(s.split));
  if (!s.json.empty()) write_report_json(report, s.json);
  if (!s.csv.empty()) write_report_csv(report, s.csv);
  if (!s.scores.empty()) write_scores(report.pooled(), s.scores);
  out << "auc " << lego::detail::format_real(report.auc) << '\n';
  return ok;
}

inline int oracle_cmd(State& s, std::ostream& out) {
  if (s.n == 0) throw DataError("--n must be positive");
  const auto r = oracle::fuse_check(s.n, s.p, s.q, s.trials, s.seed.value_or(0));
  out << "trials " << r.trials << " max deviation " << lego::detail::format_real(r.max_deviation) << '\n';
  return r.max_deviation < s.oracle_tol ? ok : numeric;
}

inline int grad_cmd(State& s, std::ostream& out) {
  const RegularizerConfig reg(s.lambda, s.alpha, s.k, s.n);
  const auto r = oracle::grad_sweep(s.cases, s.n, s.p, s.q, reg, s.seed.value_or(0), s.tol);
  out << "cases " << s.cases << " checked " << r.checked << " excluded " << r.excluded << " max relative error "
      << lego::detail::format_real(r.max_rel_error) << '\n';
  return r.passed ? ok : numeric;
}

inline int export_cmd(State& s, std::ostream& out) {
  if (s.graph_file.empty() == s.features.empty()) throw DataError("give exactly one of --graph or --features");
  Matrix g;
  std::string kind = s.kind;
  if (!s.graph_file.empty()) {
    g = load_matrix(s.graph_file);
    if (kind.empty()) kind = "graph";
  } else {
    g = relationship_graph(load_features(s.features), graph_options(s)).scores;
    if (kind.empty()) kind = s.relation;
  }
  std::string format = s.format;
  if (format.empty()) {
    const auto ext = std::filesystem::path(s.out).extension();
    format = ext == ".dot" || ext == ".gv" ? "dot" : "json";
  }
  if (format != "json" && format != "dot") throw DataError("--format must be json or dot");
  std::ostringstream text;
  if (format == "dot")
    write_dot(text, g, kind, s.threshold);
  else
    text << graph_json(g, kind, s.threshold).dump(2) << '\n';
  if (s.out.empty()) {
    out << text.str();
  } else {
    std::ofstream f(s.out);
    if (!f) throw DataError("cannot open '" + s.out + "' for writing");
    f << text.str();
  }
  return ok;
}

inline int presets_cmd(State& s, std::ostream& out) {
  if (!s.preset_name.empty()) {
    out << describe(load_presets(s.preset_name)) << '\n';
    return ok;
  }
  for (const auto& name : preset_names()) out << name << ": " << describe(load_presets(name)) << '\n';
  return ok;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  State s;
  auto app = make_app(s);
  try {
    app->parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app->exit(e, out, err);
    return code == 0 ? ok : usage;
  }
  const CLI::App* cmd = app->get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    if (name == "gen-data") return detail::gen_data(s, out);
    if (name == "build-graph") return detail::build_graph_cmd(s, out);
    if (name == "fuse") return detail::fuse_cmd(s, out);
    if (name == "train") return detail::train_cmd(s, out);
    if (name == "eval") return detail::eval_cmd(s, out);
    if (name == "oracle-check") return detail::oracle_cmd(s, out);
    if (name == "grad-check") return detail::grad_cmd(s, out);
    if (name == "export-graph") return detail::export_cmd(s, out);
    if (name == "presets") return detail::presets_cmd(s, out);
  } catch (const NumericError& e) {
    err << "lego " << name << ": " << e.what() << '\n';
    return numeric;
  } catch (const std::exception& e) {
    err << "lego " << name << ": " << e.what() << '\n';
    return data;
  }
  err << "lego: unknown command '" << name << "'\n";
  return usage;
}

}  // namespace lego::cli
