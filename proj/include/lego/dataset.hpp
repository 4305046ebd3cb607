// SPDX-License-Identifier: Apache-2.0
#pragma once

// Feature/label files, snippet labelling, bag assembly and the synthetic
// multi-modal anomaly generator.
//
// Feature text format:
//   line 1:  N d
//   then N lines of d whitespace-separated decimal floats.
// Label file: one 0/1 token per frame, whitespace separated.
// Manifest (JSON):
//   { "format": "lego-manifest", "version": 1, "snippet_len": 16,
//     "modalities": ["visual", "text"],
//     "videos": [ { "id": "...", "split": "train",
//                   "features": { "visual": "path", "text": "path" },
//                   "labels": "path" } ] }
// Relative paths resolve against the manifest's directory.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "lego/error.hpp"
#include "lego/graph.hpp"
#include "lego/matrix.hpp"

namespace lego {

inline constexpr std::size_t kDefaultSnippetLen = 16;
inline constexpr std::size_t kDefaultBagSize = 32;

struct SnippetLabelTrack {
  std::vector<int> frame_labels;
  std::size_t snippet_len = kDefaultSnippetLen;
  std::vector<int> snippet_labels;
};

/// A snippet is abnormal if any of its frames is. The trailing partial window
/// is dropped.
inline SnippetLabelTrack derive_snippet_labels(std::span<const int> frames,
                                               std::size_t snippet_len = kDefaultSnippetLen) {
  if (snippet_len == 0) throw DataError("snippet length must be >= 1");
  SnippetLabelTrack t{{frames.begin(), frames.end()}, snippet_len, {}};
  const std::size_t count = frames.size() / snippet_len;
  t.snippet_labels.assign(count, 0);
  for (std::size_t s = 0; s < count; ++s)
    for (std::size_t f = s * snippet_len; f < (s + 1) * snippet_len; ++f)
      if (frames[f] != 0) {
        t.snippet_labels[s] = 1;
        break;
      }
  return t;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_real(std::string_view tok, const std::string& source, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && tok.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(source, line, "bad number '" + std::string(tok) + "'");
  if (!std::isfinite(v)) throw ParseError(source, line, "non-finite value '" + std::string(tok) + "'");
  return v;
}

inline std::size_t parse_count(std::string_view tok, const std::string& source, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(source, line, "bad count '" + std::string(tok) + "'");
  return v;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads the `N d` + rows text format. Blank lines after the last row are
/// ignored.
inline Matrix read_matrix(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::pair<std::size_t, std::size_t>> header;
  while (!header && std::getline(in, line)) {
    ++lineno;
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 2) throw ParseError(source, lineno, "header must be 'N d'");
    header = {detail::parse_count(toks[0], source, lineno), detail::parse_count(toks[1], source, lineno)};
  }
  if (!header) throw ParseError(source, lineno, "missing 'N d' header");
  const auto [n, d] = *header;
  if (n == 0 || d == 0) throw Inconsistent(source + ":" + std::to_string(lineno) + ": N and d must be positive");
  Matrix m(n, d);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (row == n)
      throw Inconsistent(source + ":" + std::to_string(lineno) + ": more than the " + std::to_string(n) +
                         " rows declared in the header");
    if (toks.size() != d)
      throw Inconsistent(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(d) + " columns, got " +
                         std::to_string(toks.size()));
    for (std::size_t j = 0; j < d; ++j) m(row, j) = detail::parse_real(toks[j], source, lineno);
    ++row;
  }
  if (row != n)
    throw Inconsistent(source + ": header declares " + std::to_string(n) + " rows, found " + std::to_string(row));
  return m;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << detail::format_real(m(i, j));
    }
    out << '\n';
  }
}

inline Matrix load_matrix(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return read_matrix(in, path.string());
}

inline void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  write_matrix(out, m);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline FeatureSet load_features(const std::filesystem::path& path, std::string modality_id = {}) {
  if (modality_id.empty()) modality_id = path.stem().string();
  return FeatureSet(std::move(modality_id), load_matrix(path));
}

inline void save_features(const FeatureSet& fs, const std::filesystem::path& path) {
  save_matrix(fs.features(), path);
}

inline std::vector<int> read_labels(std::istream& in, const std::string& source = "<stream>") {
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (auto tok : detail::split_ws(line)) {
      if (tok == "0")
        labels.push_back(0);
      else if (tok == "1")
        labels.push_back(1);
      else
        throw ParseError(source, lineno, "label must be 0 or 1, got '" + std::string(tok) + "'");
    }
  }
  return labels;
}

inline std::vector<int> load_labels(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return read_labels(in, path.string());
}

inline void save_labels(std::span<const int> labels, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (std::size_t i = 0; i < labels.size(); ++i) out << (labels[i] ? '1' : '0') << ((i + 1) % 64 ? ' ' : '\n');
  out << '\n';
}

struct Video {
  std::string id;
  std::string split = "train";
  std::vector<Matrix> features;  // one snippets x d matrix per modality
  std::vector<int> snippet_labels;

  std::size_t snippets() const { return snippet_labels.size(); }
};

struct Dataset {
  std::vector<std::string> modalities;
  std::vector<Video> videos;
  std::size_t snippet_len = kDefaultSnippetLen;

  std::size_t total_snippets() const {
    std::size_t n = 0;
    for (const auto& v : videos) n += v.snippets();
    return n;
  }

  void validate() const {
    if (modalities.empty()) throw DataError("dataset has no modalities");
    for (const auto& v : videos) {
      if (v.features.size() != modalities.size())
        throw Inconsistent("video '" + v.id + "' has " + std::to_string(v.features.size()) + " modalities, expected " +
                           std::to_string(modalities.size()));
      for (std::size_t m = 0; m < v.features.size(); ++m)
        if (v.features[m].rows() != v.snippet_labels.size())
          throw Inconsistent("video '" + v.id + "' modality '" + modalities[m] + "' has " +
                             std::to_string(v.features[m].rows()) + " snippets but " +
                             std::to_string(v.snippet_labels.size()) + " labels");
    }
  }
};

/// Snippet-level labels expanded to frames (every frame of a snippet shares its label).
inline std::vector<int> expand_to_frames(std::span<const int> snippet_labels, std::size_t snippet_len) {
  std::vector<int> frames;
  frames.reserve(snippet_labels.size() * snippet_len);
  for (int l : snippet_labels) frames.insert(frames.end(), snippet_len, l);
  return frames;
}

/// Returns the manifest path.
inline std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "lego-manifest";
  manifest["version"] = 1;
  manifest["snippet_len"] = ds.snippet_len;
  manifest["modalities"] = ds.modalities;
  manifest["videos"] = nlohmann::json::array();
  for (const auto& v : ds.videos) {
    nlohmann::json jv;
    jv["id"] = v.id;
    jv["split"] = v.split;
    for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
      const std::string file = v.id + "." + ds.modalities[m] + ".txt";
      save_matrix(v.features[m], dir / file);
      jv["features"][ds.modalities[m]] = file;
    }
    const std::string labels = v.id + ".labels.txt";
    save_labels(expand_to_frames(v.snippet_labels, ds.snippet_len), dir / labels);
    jv["labels"] = labels;
    manifest["videos"].push_back(std::move(jv));
  }
  auto out = detail::open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return dir / "manifest.json";
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  auto in = detail::open_in(manifest_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  Dataset ds;
  try {
    ds.snippet_len = j.value("snippet_len", kDefaultSnippetLen);
    ds.modalities = j.at("modalities").get<std::vector<std::string>>();
    for (const auto& jv : j.at("videos")) {
      Video v;
      v.id = jv.at("id").get<std::string>();
      v.split = jv.value("split", std::string("train"));
      for (const auto& m : ds.modalities) v.features.push_back(load_matrix(resolve(jv.at("features").at(m).get<std::string>())));
      const auto frames = load_labels(resolve(jv.at("labels").get<std::string>()));
      v.snippet_labels = derive_snippet_labels(frames, ds.snippet_len).snippet_labels;
      ds.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  ds.validate();
  return ds;
}

/// N consecutive snippets of one video; one graph node per snippet.
struct Bag {
  std::size_t video = 0;
  std::size_t start = 0;
  std::vector<Matrix> features;  // per modality, N x d
  std::vector<int> labels;

  bool abnormal() const { return std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; }); }
};

/// Non-overlapping windows of `bag_size` snippets; each video's final short
/// window is dropped. `split` filters videos when given.
inline std::vector<Bag> make_bags(const Dataset& ds, std::size_t bag_size = kDefaultBagSize,
                                  std::optional<std::string> split = std::nullopt) {
  if (bag_size == 0) throw DataError("bag size must be >= 1");
  std::vector<Bag> bags;
  for (std::size_t vi = 0; vi < ds.videos.size(); ++vi) {
    const Video& v = ds.videos[vi];
    if (split && v.split != *split) continue;
    for (std::size_t start = 0; start + bag_size <= v.snippets(); start += bag_size) {
      Bag b;
      b.video = vi;
      b.start = start;
      for (const Matrix& f : v.features) {
        Matrix window(bag_size, f.cols());
        for (std::size_t i = 0; i < bag_size; ++i)
          std::copy_n(f.row_span(start + i).begin(), f.cols(), window.row_span(i).begin());
        b.features.push_back(std::move(window));
      }
      b.labels.assign(v.snippet_labels.begin() + static_cast<std::ptrdiff_t>(start),
                      v.snippet_labels.begin() + static_cast<std::ptrdiff_t>(start + bag_size));
      bags.push_back(std::move(b));
    }
  }
  return bags;
}

struct SyntheticSpec {
  std::size_t n_videos = 40;
  std::size_t snippets_per_video = 96;
  std::vector<std::size_t> dims{64, 32};
  std::vector<std::string> modality_names{"visual", "text"};
  double anomaly_rate = 0.1;
  double cluster_separation = 3.0;
  double noise_sigma = 1.0;
  double modality_correlation = 0.5;
  std::uint64_t seed = 42;
  /// Every `holdout_every`-th video (1-based) is marked "test"; 0 disables.
  std::size_t holdout_every = 4;
  double mean_run_length = 4.0;
  /// Norm of each modality's base-cluster center.
  double center_norm = 1.25;

  void validate() const {
    if (n_videos == 0 || snippets_per_video == 0) throw DataError("synthetic: need at least one video and snippet");
    if (dims.empty()) throw DataError("synthetic: need at least one modality");
    if (modality_names.size() != dims.size()) throw DataError("synthetic: one name per modality dimension required");
    for (auto d : dims)
      if (d == 0) throw DataError("synthetic: modality dimension must be positive");
    if (!(anomaly_rate >= 0.0 && anomaly_rate < 1.0)) throw DataError("synthetic: anomaly_rate must lie in [0, 1)");
    if (!(cluster_separation >= 0.0)) throw DataError("synthetic: cluster_separation must be >= 0");
    if (!(noise_sigma > 0.0)) throw DataError("synthetic: noise_sigma must be > 0");
    if (!(modality_correlation >= 0.0 && modality_correlation <= 1.0))
      throw DataError("synthetic: modality_correlation must lie in [0, 1]");
    if (!(mean_run_length >= 1.0)) throw DataError("synthetic: mean_run_length must be >= 1");
    if (!(center_norm > 0.0)) throw DataError("synthetic: center_norm must be > 0");
  }
};

namespace detail {

template <class Rng>
std::vector<double> random_unit(std::size_t d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(d);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& x : v) {
      x = g(rng);
      sq += x * x;
    }
  } while (sq == 0.0);
  const double n = std::sqrt(sq);
  for (double& x : v) x /= n;
  return v;
}

// Columns of a d x r matrix with orthonormal columns (Gram-Schmidt).
template <class Rng>
Matrix random_orthonormal(std::size_t d, std::size_t r, Rng& rng) {
  Matrix e(d, r);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t c = 0; c < r; ++c) {
    std::vector<double> v(d);
    for (;;) {
      for (double& x : v) x = g(rng);
      for (std::size_t prev = 0; prev < c; ++prev) {
        double dp = 0.0;
        for (std::size_t i = 0; i < d; ++i) dp += v[i] * e(i, prev);
        for (std::size_t i = 0; i < d; ++i) v[i] -= dp * e(i, prev);
      }
      double sq = 0.0;
      for (double x : v) sq += x * x;
      if (sq > 1e-12) {
        const double n = std::sqrt(sq);
        for (std::size_t i = 0; i < d; ++i) e(i, c) = v[i] / n;
        break;
      }
    }
  }
  return e;
}

}  // namespace detail

/// Multi-modal snippet features with exact labels.
///
/// Normal snippets of modality m are center_norm * c_m + noise, with c_m a
/// random unit vector and noise ~ N(0, sigma^2 / d_m) per coordinate (expected noise norm
/// sigma). Abnormal snippets add separation * u_m. The directions u_m mix a
/// latent direction shared by all modalities (mapped into each modality by a
/// fixed orthonormal embedding) with a modality-private one:
///   u_m = normalize(rho * E_m z + sqrt(1 - rho^2) * w_m).
/// Abnormal snippets come in contiguous runs with geometric length (mean
/// `mean_run_length`) and total exactly round(rate * total snippets).
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t modalities = spec.dims.size();
  const std::size_t shared_dim = *std::min_element(spec.dims.begin(), spec.dims.end());

  std::vector<std::vector<double>> centers, directions;
  const auto z = detail::random_unit(shared_dim, rng);
  for (std::size_t m = 0; m < modalities; ++m) {
    const std::size_t d = spec.dims[m];
    centers.push_back(detail::random_unit(d, rng));
    const Matrix embed = detail::random_orthonormal(d, shared_dim, rng);
    const auto own = detail::random_unit(d, rng);
    const double rho = spec.modality_correlation;
    const double rest = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    std::vector<double> u(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      double shared = 0.0;
      for (std::size_t c = 0; c < shared_dim; ++c) shared += embed(i, c) * z[c];
      u[i] = rho * shared + rest * own[i];
    }
    double sq = 0.0;
    for (double x : u) sq += x * x;
    const double n = std::sqrt(sq);
    for (double& x : u) x /= n;
    directions.push_back(std::move(u));
  }

  // Place anomaly runs.
  const std::size_t total = spec.n_videos * spec.snippets_per_video;
  const auto target = static_cast<std::size_t>(std::llround(spec.anomaly_rate * static_cast<double>(total)));
  std::vector<std::vector<int>> labels(spec.n_videos, std::vector<int>(spec.snippets_per_video, 0));
  std::size_t placed = 0;
  std::geometric_distribution<std::size_t> run_extra(1.0 / spec.mean_run_length);
  std::uniform_int_distribution<std::size_t> pick_video(0, spec.n_videos - 1);
  for (std::size_t attempt = 0; placed < target && attempt < 100000; ++attempt) {
    const std::size_t len = std::min({1 + run_extra(rng), target - placed, spec.snippets_per_video});
    const std::size_t v = pick_video(rng);
    std::uniform_int_distribution<std::size_t> pick_start(0, spec.snippets_per_video - len);
    const std::size_t s = pick_start(rng);
    auto& row = labels[v];
    if (std::any_of(row.begin() + static_cast<std::ptrdiff_t>(s), row.begin() + static_cast<std::ptrdiff_t>(s + len),
                    [](int l) { return l != 0; }))
      continue;
    std::fill_n(row.begin() + static_cast<std::ptrdiff_t>(s), len, 1);
    placed += len;
  }
  for (std::size_t v = 0; v < spec.n_videos && placed < target; ++v)
    for (std::size_t s = 0; s < spec.snippets_per_video && placed < target; ++s)
      if (!labels[v][s]) {
        labels[v][s] = 1;
        ++placed;
      }

  Dataset ds;
  ds.modalities = spec.modality_names;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    Video vid;
    char id[32];
    std::snprintf(id, sizeof id, "video%03zu", v);
    vid.id = id;
    vid.split = spec.holdout_every && (v + 1) % spec.holdout_every == 0 ? "test" : "train";
    vid.snippet_labels = labels[v];
    for (std::size_t m = 0; m < modalities; ++m) {
      const std::size_t d = spec.dims[m];
      const double noise = spec.noise_sigma / std::sqrt(static_cast<double>(d));
      Matrix f(spec.snippets_per_video, d);
      for (std::size_t s = 0; s < spec.snippets_per_video; ++s) {
        const double shift = labels[v][s] ? spec.cluster_separation : 0.0;
        for (std::size_t i = 0; i < d; ++i) f(s, i) = spec.center_norm * centers[m][i] + shift * directions[m][i] + noise * gauss(rng);
      }
      vid.features.push_back(std::move(f));
    }
    ds.videos.push_back(std::move(vid));
  }
  return ds;
}

}  // namespace lego
