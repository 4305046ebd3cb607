// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training loop: per step, sample a modality pair, fuse the precomputed power
// stacks of every bag with the current weights, score nodes, add the degree
// variance regularizer on one (abnormal, normal) bag pair, backpropagate and
// update. Everything is seeded; two runs with the same dataset and config
// produce identical checkpoints and logs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "lego/autodiff.hpp"
#include "lego/checkpoint.hpp"
#include "lego/dataset.hpp"
#include "lego/error.hpp"
#include "lego/evaluation.hpp"
#include "lego/fusion.hpp"
#include "lego/graph.hpp"
#include "lego/model.hpp"

namespace lego {

enum class OptimizerKind { sgd, adam };
enum class ModalitySampling { pairwise_random, fixed_pair };

inline std::string_view to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }
inline std::string_view to_string(ModalitySampling s) {
  return s == ModalitySampling::pairwise_random ? "pairwise-random" : "fixed-pair";
}

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw DataError("unknown optimizer '" + std::string(s) + "'");
}

inline ModalitySampling parse_sampling(std::string_view s) {
  if (s == "pairwise-random") return ModalitySampling::pairwise_random;
  if (s == "fixed-pair") return ModalitySampling::fixed_pair;
  throw DataError("unknown modality sampling '" + std::string(s) + "'");
}

struct TrainConfig {
  std::size_t P = 2;
  std::size_t Q = 3;
  FusionForm fusion_form = FusionForm::full_matrix;
  double lambda = 1.0;
  double alpha = 0.5;
  std::size_t k = 10;
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_bags = 32;
  std::uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  ModalitySampling modality_sampling = ModalitySampling::pairwise_random;
  std::size_t pair_a = 0;
  std::size_t pair_b = 1;
  Relation relation;
  PowerNormalization normalization = PowerNormalization::raw;
  bool normalize_features = true;
  std::size_t bag_size = kDefaultBagSize;
  /// Keep the fusion weights at their initial value (baseline runs).
  bool freeze_fusion = false;
  /// Overrides FusionWeights::initial when set; must be (P+1) x (Q+1).
  std::optional<FusionWeights> initial_fusion;

  RegularizerConfig regularizer() const { return RegularizerConfig(lambda, alpha, k, bag_size); }

  void validate() const {
    if (epochs == 0) throw DataError("epochs must be positive");
    if (batch_bags == 0) throw DataError("batch_bags must be positive");
    if (bag_size == 0) throw DataError("bag_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw DataError("learning_rate must be >= 0");
    if (pair_a == pair_b) throw DataError("pair_a and pair_b must differ");
    regularizer();
  }
};

/// Settings keyed by dataset tag. The table's (m, n) map to (P, Q).
inline TrainConfig load_presets(std::string_view name) {
  TrainConfig c;
  c.lambda = 1.0;
  c.alpha = 0.5;
  c.k = 10;
  c.batch_bags = 32;
  c.epochs = 30;
  if (name == "shanghaitech" || name == "sht") {
    c.fusion_form = FusionForm::full_matrix;
    c.P = 2;
    c.Q = 3;
  } else if (name == "ped2") {
    c.fusion_form = FusionForm::full_matrix;
    c.P = 4;
    c.Q = 3;
  } else if (name == "avenue") {
    c.fusion_form = FusionForm::outer_product;
    c.P = 2;
    c.Q = 7;
  } else if (name == "street") {
    c.fusion_form = FusionForm::full_matrix;
    c.P = 4;
    c.Q = 3;
  } else if (name == "combined") {
    c.fusion_form = FusionForm::full_matrix;
    c.P = 4;
    c.Q = 4;
    c.lambda = 0.001;
    c.epochs = 50;
  } else {
    throw UnknownPreset(std::string(name));
  }
  return c;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"shanghaitech", "ped2", "avenue", "street", "combined"};
  return names;
}

// ---------------------------------------------------------------------------
// Flat `key = value` config files.

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "preset",        "p",          "q",          "fusion_form",        "lambda",  "alpha",
      "k",             "learning_rate", "epochs",  "batch_bags",         "seed",    "optimizer",
      "adam_beta1",    "adam_beta2", "adam_eps",   "modality_sampling",  "pair_a",  "pair_b",
      "relation",      "gamma",      "normalization", "normalize_features", "bag_size", "freeze_fusion"};
  return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw DataError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw DataError(key + ": expected a real number, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

/// Applies one key (everything except `preset`, which callers resolve first).
inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "p") c.P = to_count(key, value);
  else if (key == "q") c.Q = to_count(key, value);
  else if (key == "fusion_form") c.fusion_form = parse_fusion_form(value);
  else if (key == "lambda") c.lambda = to_real(key, value);
  else if (key == "alpha") c.alpha = to_real(key, value);
  else if (key == "k") c.k = to_count(key, value);
  else if (key == "learning_rate") c.learning_rate = to_real(key, value);
  else if (key == "epochs") c.epochs = to_count(key, value);
  else if (key == "batch_bags") c.batch_bags = to_count(key, value);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_count(key, value));
  else if (key == "optimizer") c.optimizer = parse_optimizer(value);
  else if (key == "adam_beta1") c.adam_beta1 = to_real(key, value);
  else if (key == "adam_beta2") c.adam_beta2 = to_real(key, value);
  else if (key == "adam_eps") c.adam_eps = to_real(key, value);
  else if (key == "modality_sampling") c.modality_sampling = parse_sampling(value);
  else if (key == "pair_a") c.pair_a = to_count(key, value);
  else if (key == "pair_b") c.pair_b = to_count(key, value);
  else if (key == "relation") c.relation.kind = parse_relation_kind(value);
  else if (key == "gamma") c.relation.gamma = to_real(key, value);
  else if (key == "normalization") c.normalization = parse_power_normalization(value);
  else if (key == "normalize_features") c.normalize_features = to_bool(key, value);
  else if (key == "bag_size") c.bag_size = to_count(key, value);
  else if (key == "freeze_fusion") c.freeze_fusion = to_bool(key, value);
  else throw DataError("unknown config key '" + key + "'");
}

/// Ordered key/value pairs of a config file. `#` starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ParseError(source, lineno, "empty key");
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end())
      throw ParseError(source, lineno, "unknown key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path.string() + "'");
  return read_config(in, path.string());
}

/// defaults < preset < file < overrides. A preset may come from the
/// overrides, or failing that, from the file.
inline TrainConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_settings,
                                  const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::optional<std::string> preset;
  for (const auto& [k, v] : file_settings)
    if (k == "preset") preset = v;
  for (const auto& [k, v] : overrides)
    if (k == "preset") preset = v;
  TrainConfig c = preset ? load_presets(*preset) : TrainConfig{};
  for (const auto& [k, v] : file_settings)
    if (k != "preset") apply_setting(c, k, v);
  for (const auto& [k, v] : overrides)
    if (k != "preset") apply_setting(c, k, v);
  c.validate();
  return c;
}

inline std::string describe(const TrainConfig& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "P=%zu Q=%zu λ=%g α=%g k=%zu %s", c.P, c.Q, c.lambda, c.alpha, c.k,
                std::string(to_string(c.fusion_form)).c_str());
  return buf;
}

// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for (seed, purpose, index).
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ splitmix64(purpose)) + index));
}

/// Uniform unordered pair of distinct modality indices, returned ascending.
template <class Rng>
std::pair<std::size_t, std::size_t> sample_modality_pair(std::size_t modalities, Rng& rng) {
  if (modalities < 2) throw TooFewModalities(modalities);
  const std::size_t pairs = modalities * (modalities - 1) / 2;
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, pairs - 1)(rng);
  for (std::size_t i = 0; i < modalities; ++i) {
    const std::size_t row = modalities - 1 - i;
    if (pick < row) return {i, i + 1 + pick};
    pick -= row;
  }
  return {0, 1};
}

template <class Rng>
std::pair<const RelationshipGraph&, const RelationshipGraph&> sample_graph_pair(std::span<const RelationshipGraph> graphs,
                                                                                Rng& rng) {
  const auto [i, j] = sample_modality_pair(graphs.size(), rng);
  return {graphs[i], graphs[j]};
}

/// Modality pair for one training step: deterministic in (seed, step).
inline std::pair<std::size_t, std::size_t> step_modality_pair(const TrainConfig& cfg, std::size_t modalities,
                                                              std::size_t step) {
  if (modalities < 2) throw TooFewModalities(modalities);
  if (cfg.modality_sampling == ModalitySampling::fixed_pair || modalities == 2) {
    if (cfg.pair_a >= modalities || cfg.pair_b >= modalities)
      throw DataError("fixed modality pair out of range for " + std::to_string(modalities) + " modalities");
    return {cfg.pair_a, cfg.pair_b};
  }
  auto rng = derived_rng(cfg.seed, 1, step);
  return sample_modality_pair(modalities, rng);
}

/// Element-wise product baseline G = Ra (.) Rb: P = Q = 1, A = e_11, frozen.
inline TrainConfig product_baseline(TrainConfig cfg) {
  cfg.P = 1;
  cfg.Q = 1;
  cfg.fusion_form = FusionForm::full_matrix;
  Matrix A(2, 2);
  A(1, 1) = 1.0;
  cfg.initial_fusion = FusionWeights::full_matrix(std::move(A));
  cfg.freeze_fusion = true;
  return cfg;
}

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> eval_auc;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  /// Steps whose loss included the degree variance term.
  std::size_t regularizer_evaluations = 0;
  /// Steps with lambda > 0 whose batch lacked a normal or abnormal bag.
  std::size_t regularizer_skipped = 0;
};

inline std::string format_log(const std::vector<EpochLog>& log) {
  std::string out = "epoch mean_loss eval_auc\n";
  for (const auto& e : log)
    out += std::to_string(e.epoch) + ' ' + detail::format_real(e.mean_loss) + ' ' +
           (e.eval_auc ? detail::format_real(*e.eval_auc) : std::string("nan")) + '\n';
  return out;
}

inline void save_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << format_log(log);
}

namespace detail {

struct Optimizer {
  OptimizerKind kind;
  double lr, beta1, beta2, eps;
  std::size_t t = 0;
  std::vector<Matrix> m, v;

  void step(std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
    if (kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) axpy(-lr, *grads[i], *params[i]);
      return;
    }
    if (m.empty()) {
      for (const Matrix* p : params) {
        m.emplace_back(p->rows(), p->cols());
        v.emplace_back(p->rows(), p->cols());
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& p = *params[i];
      const Matrix& g = *grads[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[i][k] = beta1 * m[i][k] + (1.0 - beta1) * g[k];
        v[i][k] = beta2 * v[i][k] + (1.0 - beta2) * g[k] * g[k];
        p[k] -= lr * (m[i][k] / c1) / (std::sqrt(v[i][k] / c2) + eps);
      }
    }
  }
};

// Trainable tensors in a fixed order.
struct ParamSet {
  FusionForm form;
  Matrix A, a, b;  // A for full-matrix, a/b columns for outer-product
  Matrix W1, b1, W2, b2;

  static ParamSet from(const FusionWeights& f, const ClassifierParams& c) {
    ParamSet p{f.form, {}, {}, {}, c.W1, Matrix::row(c.b1), Matrix::column(c.W2), Matrix::scalar(c.b2)};
    if (f.form == FusionForm::full_matrix) {
      p.A = f.A;
    } else {
      p.a = Matrix::column(f.a);
      p.b = Matrix::column(f.b);
    }
    return p;
  }

  std::vector<Matrix*> fusion_tensors() {
    return form == FusionForm::full_matrix ? std::vector<Matrix*>{&A} : std::vector<Matrix*>{&a, &b};
  }

  FusionWeights fusion() const {
    if (form == FusionForm::full_matrix) return FusionWeights::full_matrix(A);
    return FusionWeights::outer_product({a.values().begin(), a.values().end()}, {b.values().begin(), b.values().end()});
  }

  ClassifierParams classifier() const {
    return {W1, {b1.values().begin(), b1.values().end()}, {W2.values().begin(), W2.values().end()}, b2(0, 0)};
  }
};

}  // namespace detail

/// Per-bag power stacks for every modality, up to max(P, Q).
struct PreparedBag {
  std::vector<std::vector<Matrix>> powers;  // [modality][power]
  std::vector<int> labels;
  bool abnormal = false;
};

inline std::vector<PreparedBag> prepare_bags(const std::vector<Bag>& bags, const std::vector<std::string>& modalities,
                                             const TrainConfig& cfg) {
  const std::size_t max_power = std::max(cfg.P, cfg.Q);
  const GraphOptions opts{cfg.relation, cfg.normalize_features};
  std::vector<PreparedBag> out;
  out.reserve(bags.size());
  for (const Bag& bag : bags) {
    PreparedBag pb;
    for (std::size_t m = 0; m < bag.features.size(); ++m) {
      const auto g = relationship_graph(FeatureSet(modalities[m], bag.features[m]), opts);
      pb.powers.push_back(expand_powers(g, max_power, cfg.normalization).powers);
    }
    pb.labels = bag.labels;
    pb.abnormal = bag.abnormal();
    out.push_back(std::move(pb));
  }
  return out;
}

struct TrainHooks {
  /// Called after each step with (step, loss).
  std::function<void(std::size_t, double)> on_step;
};

inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, std::optional<std::string> train_split = "train",
                         std::optional<std::string> val_split = "test", const TrainHooks& hooks = {}) {
  cfg.validate();
  ds.validate();
  const RegularizerConfig reg = cfg.regularizer();
  const auto bags = make_bags(ds, cfg.bag_size, train_split);
  if (bags.empty()) throw DataError("train: no bags in the training split");
  if (ds.modalities.size() < 2) throw TooFewModalities(ds.modalities.size());
  if (reg.lambda > 0.0) {
    const bool any_pos = std::any_of(bags.begin(), bags.end(), [](const Bag& b) { return b.abnormal(); });
    const bool any_neg = std::any_of(bags.begin(), bags.end(), [](const Bag& b) { return !b.abnormal(); });
    if (!any_pos || !any_neg) throw MissingPolarity("train: lambda > 0 needs both normal and abnormal bags");
  }
  const auto prepared = prepare_bags(bags, ds.modalities, cfg);
  const bool has_val = val_split && !make_bags(ds, cfg.bag_size, val_split).empty();

  TrainResult result;
  Model& model = result.model;
  model.P = cfg.P;
  model.Q = cfg.Q;
  model.relation = cfg.relation;
  model.normalization = cfg.normalization;
  model.normalize_features = cfg.normalize_features;
  model.regularizer = reg;
  model.bag_size = cfg.bag_size;
  model.modalities = ds.modalities;
  if (cfg.modality_sampling == ModalitySampling::fixed_pair || ds.modalities.size() == 2) {
    std::tie(model.eval_a, model.eval_b) = step_modality_pair(cfg, ds.modalities.size(), 0);
  } else {
    model.eval_a = std::min(cfg.pair_a, cfg.pair_b);
    model.eval_b = std::max(cfg.pair_a, cfg.pair_b);
  }

  auto init_rng = derived_rng(cfg.seed, 0, 0);
  const FusionWeights init_fusion = cfg.initial_fusion ? *cfg.initial_fusion : FusionWeights::initial(cfg.fusion_form, cfg.P, cfg.Q);
  if (init_fusion.rows() != cfg.P + 1 || init_fusion.cols() != cfg.Q + 1)
    throw DimensionMismatch("initial fusion weights do not match P and Q");
  detail::ParamSet params = detail::ParamSet::from(init_fusion,
                                                   ClassifierParams::uniform(cfg.bag_size, init_rng));
  detail::Optimizer opt{cfg.optimizer, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, 0, {}, {}};

  std::vector<std::size_t> order(prepared.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = derived_rng(cfg.seed, 2, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t loss_steps = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_bags, ++step) {
      const std::size_t last = std::min(order.size(), first + cfg.batch_bags);
      const auto [ma, mb] = step_modality_pair(cfg, ds.modalities.size(), step);

      autodiff::Tape tape;
      std::vector<Matrix*> trainable;
      std::vector<autodiff::NodeId> ids;
      auto input = [&](Matrix& m, const char* name, bool fusion_param = false) {
        if (fusion_param && cfg.freeze_fusion) return tape.constant(m);
        const auto id = tape.parameter(m, name);
        trainable.push_back(&m);
        ids.push_back(id);
        return id;
      };
      double loss = 0.0;
      try {
        autodiff::NodeId weights;
        if (params.form == FusionForm::full_matrix) {
          weights = input(params.A, "A", true);
        } else {
          const auto a = input(params.a, "a", true);
          const auto b = input(params.b, "b", true);
          weights = graph_ops::outer_weights(tape, a, b);
        }
        const graph_ops::ClassifierNodes cls{input(params.W1, "W1"), input(params.b1, "b1"), input(params.W2, "W2"),
                                             input(params.b2, "b2")};
        std::vector<autodiff::NodeId> graphs;
        std::vector<std::vector<int>> labels;
        std::vector<LabeledGraph> polarity;
        for (std::size_t t = first; t < last; ++t) {
          const PreparedBag& pb = prepared[order[t]];
          graphs.push_back(graph_ops::fused_graph(tape, weights, std::span(pb.powers[ma]).first(cfg.P + 1),
                                                  std::span(pb.powers[mb]).first(cfg.Q + 1)));
          labels.push_back(pb.labels);
          polarity.push_back({Matrix(), pb.labels});
        }
        autodiff::NodeId root = graph_ops::mean_bce(tape, graphs, labels, cls);
        if (reg.lambda > 0.0) {
          auto pair_rng = derived_rng(cfg.seed, 3, step);
          std::optional<RegularizerPair> pair;
          try {
            pair = sample_regularizer_pair(std::span<const LabeledGraph>(polarity), pair_rng);
          } catch (const MissingPolarity&) {
            ++result.regularizer_skipped;
          }
          if (pair) {
            root = tape.add(root, graph_ops::degree_variance_loss(tape, graphs[pair->abnormal], graphs[pair->normal], reg));
            ++result.regularizer_evaluations;
          }
        }
        loss = tape.forward(root);
        if (!std::isfinite(loss)) throw NonFinite("loss");
        const auto grads = tape.backward(root);
        std::vector<const Matrix*> g;
        for (auto id : ids) g.push_back(&grads.at(id));
        opt.step(trainable, g);
      } catch (const NonFinite& e) {
        throw NonFiniteLoss(step, e.what());
      }
      for (Matrix* m : trainable)
        if (!m->all_finite()) throw NonFiniteLoss(step, "parameter update produced non-finite values");
      if (hooks.on_step) hooks.on_step(step, loss);
      loss_sum += loss;
      ++loss_steps;
    }
    EpochLog entry{epoch, loss_sum / static_cast<double>(loss_steps), std::nullopt};
    if (has_val) {
      model.fusion = params.fusion();
      model.classifier = params.classifier();
      try {
        entry.eval_auc = evaluate_model(model, ds, val_split).auc;
      } catch (const DegenerateLabels&) {
      }
    }
    result.log.push_back(entry);
  }
  result.steps = step;
  model.fusion = params.fusion();
  model.classifier = params.classifier();
  return result;
}

}  // namespace lego
