// SPDX-License-Identifier: Apache-2.0
#pragma once

// Trained model and its JSON checkpoint.
//
// Fields (format "lego-checkpoint", version 1):
//   P, Q                   max graph powers for modality a and b
//   fusion.form            "full-matrix" | "outer-product"
//   fusion.A               (P+1) x (Q+1) rows   (full-matrix)
//   fusion.a, fusion.b     P+1 and Q+1 values   (outer-product)
//   classifier.W1          N x N rows
//   classifier.b1, .W2     N values each
//   classifier.b2          scalar
//   relation.kind          "cosine" | "clamped-cosine" | "gaussian"
//   relation.gamma         gaussian bandwidth
//   normalization          "raw" | "row-stochastic"
//   normalize_features     row L2 normalization before graph construction
//   regularizer.lambda, .alpha, .k
//   bag_size               nodes per graph (N)
//   modalities             modality names, in dataset order
//   eval_pair              [a, b] modality indices used for scoring
// Doubles are written in shortest round-trip form, so save/load is lossless.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lego/error.hpp"
#include "lego/fusion.hpp"
#include "lego/graph.hpp"
#include "lego/matrix.hpp"
#include "lego/model.hpp"

namespace lego {

inline constexpr int kCheckpointVersion = 1;

struct Model {
  std::size_t P = 2;
  std::size_t Q = 3;
  FusionWeights fusion;
  ClassifierParams classifier;
  Relation relation;
  PowerNormalization normalization = PowerNormalization::raw;
  bool normalize_features = true;
  RegularizerConfig regularizer;
  std::size_t bag_size = 32;
  std::vector<std::string> modalities;
  std::size_t eval_a = 0;
  std::size_t eval_b = 1;

  GraphOptions graph_options() const { return {relation, normalize_features}; }

  /// Fused graph of one bag from its per-modality feature windows.
  FusedGraph fused_graph(const std::vector<Matrix>& bag_features) const {
    if (eval_a >= bag_features.size() || eval_b >= bag_features.size())
      throw ShapeMismatch("model expects modalities " + std::to_string(eval_a) + " and " + std::to_string(eval_b) +
                          ", bag has " + std::to_string(bag_features.size()));
    const auto ga = relationship_graph(FeatureSet(modality_name(eval_a), bag_features[eval_a]), graph_options());
    const auto gb = relationship_graph(FeatureSet(modality_name(eval_b), bag_features[eval_b]), graph_options());
    return fuse(expand_powers(ga, P, normalization), expand_powers(gb, Q, normalization), fusion);
  }

  std::vector<double> score(const std::vector<Matrix>& bag_features) const {
    return score_nodes(fused_graph(bag_features), classifier);
  }

  std::string modality_name(std::size_t m) const {
    return m < modalities.size() ? modalities[m] : "m" + std::to_string(m);
  }
};

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row_span(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline Matrix json_matrix(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw DataError("checkpoint: ragged matrix");
    for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const Model& m) {
  nlohmann::json j;
  j["format"] = "lego-checkpoint";
  j["version"] = kCheckpointVersion;
  j["P"] = m.P;
  j["Q"] = m.Q;
  j["fusion"]["form"] = std::string(to_string(m.fusion.form));
  if (m.fusion.form == FusionForm::full_matrix) {
    j["fusion"]["A"] = detail::matrix_json(m.fusion.A);
  } else {
    j["fusion"]["a"] = m.fusion.a;
    j["fusion"]["b"] = m.fusion.b;
  }
  j["classifier"]["W1"] = detail::matrix_json(m.classifier.W1);
  j["classifier"]["b1"] = m.classifier.b1;
  j["classifier"]["W2"] = m.classifier.W2;
  j["classifier"]["b2"] = m.classifier.b2;
  j["relation"]["kind"] = std::string(to_string(m.relation.kind));
  j["relation"]["gamma"] = m.relation.gamma;
  j["normalization"] = std::string(to_string(m.normalization));
  j["normalize_features"] = m.normalize_features;
  j["regularizer"]["lambda"] = m.regularizer.lambda;
  j["regularizer"]["alpha"] = m.regularizer.alpha;
  j["regularizer"]["k"] = m.regularizer.k;
  j["bag_size"] = m.bag_size;
  j["modalities"] = m.modalities;
  j["eval_pair"] = {m.eval_a, m.eval_b};
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "lego-checkpoint") throw DataError("not a lego checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    Model m;
    m.P = j.at("P").get<std::size_t>();
    m.Q = j.at("Q").get<std::size_t>();
    const auto& f = j.at("fusion");
    if (parse_fusion_form(f.at("form").get<std::string>()) == FusionForm::full_matrix)
      m.fusion = FusionWeights::full_matrix(detail::json_matrix(f.at("A")));
    else
      m.fusion = FusionWeights::outer_product(f.at("a").get<std::vector<double>>(), f.at("b").get<std::vector<double>>());
    if (m.fusion.rows() != m.P + 1 || m.fusion.cols() != m.Q + 1)
      throw DataError("checkpoint: fusion weights do not match P and Q");
    const auto& c = j.at("classifier");
    m.classifier.W1 = detail::json_matrix(c.at("W1"));
    m.classifier.b1 = c.at("b1").get<std::vector<double>>();
    m.classifier.W2 = c.at("W2").get<std::vector<double>>();
    m.classifier.b2 = c.at("b2").get<double>();
    m.classifier.validate();
    m.relation.kind = parse_relation_kind(j.at("relation").at("kind").get<std::string>());
    m.relation.gamma = j.at("relation").at("gamma").get<double>();
    m.normalization = parse_power_normalization(j.at("normalization").get<std::string>());
    m.normalize_features = j.at("normalize_features").get<bool>();
    const auto& r = j.at("regularizer");
    m.regularizer = RegularizerConfig(r.at("lambda").get<double>(), r.at("alpha").get<double>(), r.at("k").get<std::size_t>());
    m.bag_size = j.at("bag_size").get<std::size_t>();
    if (m.bag_size != m.classifier.nodes()) throw DataError("checkpoint: bag_size does not match classifier size");
    m.modalities = j.at("modalities").get<std::vector<std::string>>();
    const auto pair = j.at("eval_pair").get<std::vector<std::size_t>>();
    if (pair.size() != 2) throw DataError("checkpoint: eval_pair must have two entries");
    m.eval_a = pair[0];
    m.eval_b = pair[1];
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline std::string serialize(const Model& m) { return to_json(m).dump(1) + "\n"; }

inline void save_model(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << serialize(m);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path.string() + "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace lego
