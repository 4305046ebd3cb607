// SPDX-License-Identifier: Apache-2.0
#pragma once

// Graph export for external rendering: a JSON document
//   {n, kind, nodes: [{id, label}], edges: [{i, j, w}]}
// and Graphviz DOT. Only off-diagonal edges with weight strictly above the
// threshold are written; a symmetric matrix contributes i < j only.

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lego/error.hpp"
#include "lego/matrix.hpp"

namespace lego {

struct Edge {
  std::size_t i = 0, j = 0;
  double w = 0.0;
};

inline std::vector<Edge> graph_edges(const Matrix& g, double threshold) {
  if (!g.is_square()) throw ShapeMismatch("graph_edges: graph is " + g.shape_string());
  const bool symmetric = max_asymmetry(g) == 0.0;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = symmetric ? i + 1 : 0; j < g.cols(); ++j)
      if (i != j && g(i, j) > threshold) edges.push_back({i, j, g(i, j)});
  return edges;
}

/// Node labels default to the node index.
inline nlohmann::json graph_json(const Matrix& g, const std::string& kind, double threshold,
                                 const std::vector<std::string>& labels = {}) {
  if (!labels.empty() && labels.size() != g.rows())
    throw ShapeMismatch("graph_json: " + std::to_string(labels.size()) + " labels for " + std::to_string(g.rows()) +
                        " nodes");
  nlohmann::json j;
  j["n"] = g.rows();
  j["kind"] = kind;
  j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < g.rows(); ++i)
    j["nodes"].push_back({{"id", i}, {"label", labels.empty() ? std::to_string(i) : labels[i]}});
  j["edges"] = nlohmann::json::array();
  for (const auto& e : graph_edges(g, threshold)) j["edges"].push_back({{"i", e.i}, {"j", e.j}, {"w", e.w}});
  return j;
}

inline void write_dot(std::ostream& out, const Matrix& g, const std::string& kind, double threshold,
                      const std::vector<std::string>& labels = {}) {
  if (!labels.empty() && labels.size() != g.rows()) throw ShapeMismatch("write_dot: label count differs from node count");
  const bool symmetric = max_asymmetry(g) == 0.0;
  const char* arrow = symmetric ? " -- " : " -> ";
  out << (symmetric ? "graph" : "digraph") << " \"" << kind << "\" {\n";
  for (std::size_t i = 0; i < g.rows(); ++i)
    out << "  n" << i << " [label=\"" << (labels.empty() ? std::to_string(i) : labels[i]) << "\"];\n";
  char w[32];
  for (const auto& e : graph_edges(g, threshold)) {
    std::snprintf(w, sizeof w, "%.6g", e.w);
    out << "  n" << e.i << arrow << 'n' << e.j << " [weight=" << w << ", label=\"" << w << "\"];\n";
  }
  out << "}\n";
}

inline void save_graph_export(const Matrix& g, const std::string& kind, double threshold,
                              const std::filesystem::path& path, const std::vector<std::string>& labels = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  if (path.extension() == ".dot" || path.extension() == ".gv")
    write_dot(out, g, kind, threshold, labels);
  else
    out << graph_json(g, kind, threshold, labels).dump(2) << '\n';
}

}  // namespace lego
