// SPDX-License-Identifier: Apache-2.0
#pragma once

// Snippet-level ROC-AUC and model evaluation reports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lego/checkpoint.hpp"
#include "lego/dataset.hpp"
#include "lego/error.hpp"

namespace lego {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Mann-Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counted as 1/2. Sort-based, O(n log n).
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ShapeMismatch("auc: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) +
                        " labels");
  for (double s : scores)
    if (!std::isfinite(s)) throw DataError("auc: non-finite score");
  const std::size_t n = scores.size();
  const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw DegenerateLabels("auc needs at least one positive and one negative");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives (ranks are 1-based).
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double auc(const ScoredSet& s) { return auc(s.scores, s.labels); }

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct BagResult {
  std::string video;
  std::size_t start = 0;
  std::vector<double> scores;
  std::vector<int> labels;
};

struct EvalReport {
  double auc = 0.0;
  std::size_t snippets = 0;
  std::size_t positives = 0;
  Confusion confusion;  // at threshold 0.5
  std::vector<BagResult> bags;

  /// All snippet scores and labels, concatenated in bag order.
  ScoredSet pooled() const {
    ScoredSet s;
    for (const auto& b : bags) {
      s.scores.insert(s.scores.end(), b.scores.begin(), b.scores.end());
      s.labels.insert(s.labels.end(), b.labels.begin(), b.labels.end());
    }
    return s;
  }
};

inline Confusion confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i])
      (predicted ? c.tp : c.fn)++;
    else
      (predicted ? c.fp : c.tn)++;
  }
  return c;
}

inline EvalReport make_report(std::vector<BagResult> bags) {
  EvalReport r;
  r.bags = std::move(bags);
  const ScoredSet pooled = r.pooled();
  r.snippets = pooled.scores.size();
  r.positives = static_cast<std::size_t>(std::count(pooled.labels.begin(), pooled.labels.end(), 1));
  r.confusion = confusion_at(pooled.scores, pooled.labels);
  r.auc = auc(pooled);
  return r;
}

/// Scores every bag of the chosen split and computes one pooled AUC.
inline EvalReport evaluate_model(const Model& model, const Dataset& ds, std::optional<std::string> split = "test") {
  if (ds.modalities.size() <= std::max(model.eval_a, model.eval_b))
    throw ShapeMismatch("evaluate_model: dataset has " + std::to_string(ds.modalities.size()) +
                        " modalities, model needs indices " + std::to_string(model.eval_a) + " and " +
                        std::to_string(model.eval_b));
  const auto bags = make_bags(ds, model.bag_size, split);
  if (bags.empty()) throw DataError("evaluate_model: no bags in the selected split");
  std::vector<BagResult> results;
  results.reserve(bags.size());
  for (const auto& bag : bags)
    results.push_back({ds.videos[bag.video].id, bag.start, model.score(bag.features), bag.labels});
  return make_report(std::move(results));
}

inline nlohmann::json report_json(const EvalReport& r, const std::string& name = "LEGO") {
  nlohmann::json j;
  j["method"] = name;
  j["auc"] = r.auc;
  j["snippets"] = r.snippets;
  j["positives"] = r.positives;
  j["confusion"] = {{"threshold", 0.5}, {"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
  j["bags"] = nlohmann::json::array();
  for (const auto& b : r.bags) j["bags"].push_back({{"video", b.video}, {"start", b.start}, {"scores", b.scores}, {"labels", b.labels}});
  return j;
}

inline void write_report_json(const EvalReport& r, const std::filesystem::path& path, const std::string& name = "LEGO") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << report_json(r, name).dump(2) << '\n';
}

/// One summary row per method, in the spirit of a results table.
inline void write_report_csv(const EvalReport& r, const std::filesystem::path& path, const std::string& name = "LEGO") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "method,auc,snippets,positives,tp,fp,tn,fn\n";
  out << name << ',' << detail::format_real(r.auc) << ',' << r.snippets << ',' << r.positives << ',' << r.confusion.tp << ','
      << r.confusion.fp << ',' << r.confusion.tn << ',' << r.confusion.fn << '\n';
}

/// `score label` per line, full precision.
inline void write_scores(const ScoredSet& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < s.scores.size(); ++i) out << detail::format_real(s.scores[i]) << ' ' << s.labels[i] << '\n';
}

inline ScoredSet read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  ScoredSet s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 2) throw ParseError(path.string(), lineno, "expected 'score label'");
    s.scores.push_back(detail::parse_real(toks[0], path.string(), lineno));
    if (toks[1] != "0" && toks[1] != "1") throw ParseError(path.string(), lineno, "label must be 0 or 1");
    s.labels.push_back(toks[1] == "1" ? 1 : 0);
  }
  return s;
}

}  // namespace lego
