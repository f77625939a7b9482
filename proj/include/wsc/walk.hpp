#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/rng.hpp"

namespace wsc {

// Row-stochastic transition structure Pi = D^-1 A over the CSR pattern of A.
// Rows of isolated vertices are all-zero and flagged; walks started there
// stay in place. Immutable once built (alias tables included).
template <typename S>
struct TransitionMatrix {
  int vertex_count = 0;
  std::vector<int> row_offsets;
  std::vector<int> cols;
  std::vector<S> probs;
  std::vector<S> degree;       // weighted row sums of A
  std::vector<char> isolated;  // degree == 0

  // Optional alias tables (Vose); empty until build_alias_tables.
  std::vector<int> alias_partner;
  std::vector<S> alias_threshold;

  bool has_alias() const { return !alias_partner.empty(); }

  int row_size(int v) const { return row_offsets[v + 1] - row_offsets[v]; }

  S prob(int u, int v) const {
    for (int e = row_offsets[u]; e < row_offsets[u + 1]; ++e)
      if (cols[e] == v) return probs[e];
    return S(0);
  }
};

template <typename S>
TransitionMatrix<S> build_transition(const Graph<S>& graph) {
  WSC_REQUIRE(graph.vertex_count >= 1, DomainError, "transition matrix needs >= 1 vertex");
  TransitionMatrix<S> tm;
  tm.vertex_count = graph.vertex_count;
  tm.row_offsets = graph.adj_offsets;
  tm.cols = graph.adj_cols;
  tm.probs.resize(graph.adj_cols.size());
  tm.degree.resize(graph.vertex_count);
  tm.isolated.resize(graph.vertex_count);
  for (int v = 0; v < graph.vertex_count; ++v) {
    S deg = S(0);
    for (int e = graph.adj_offsets[v]; e < graph.adj_offsets[v + 1]; ++e) {
      WSC_REQUIRE(graph.adj_weights[e] >= S(0), DomainError,
                  "negative adjacency weight at (", v, ",", graph.adj_cols[e], ")");
      deg += graph.adj_weights[e];
    }
    tm.degree[v] = deg;
    tm.isolated[v] = deg == S(0);
    for (int e = graph.adj_offsets[v]; e < graph.adj_offsets[v + 1]; ++e)
      tm.probs[e] = tm.isolated[v] ? S(0) : graph.adj_weights[e] / deg;
  }
  return tm;
}

// Vose alias construction per row. Sampling with the alias tables uses a
// different draw protocol than the linear scan, so seeds are not
// interchangeable between the two samplers.
template <typename S>
void build_alias_tables(TransitionMatrix<S>& tm) {
  const int nnz = static_cast<int>(tm.cols.size());
  tm.alias_partner.assign(nnz, -1);
  tm.alias_threshold.assign(nnz, S(1));
  std::vector<int> small, large;
  for (int v = 0; v < tm.vertex_count; ++v) {
    const int begin = tm.row_offsets[v], len = tm.row_size(v);
    if (len == 0) continue;
    small.clear();
    large.clear();
    std::vector<S> scaled(len);
    for (int i = 0; i < len; ++i) {
      scaled[i] = tm.probs[begin + i] * S(len);
      (scaled[i] < S(1) ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const int s = small.back(), l = large.back();
      small.pop_back();
      tm.alias_threshold[begin + s] = scaled[s];
      tm.alias_partner[begin + s] = l;
      scaled[l] -= S(1) - scaled[s];
      if (scaled[l] < S(1)) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are within rounding of 1; their alias is never taken.
    for (int i : large) tm.alias_threshold[begin + i] = S(1);
    for (int i : small) tm.alias_threshold[begin + i] = S(1);
  }
}

enum class SamplerKind { kLinearScan, kAlias };

namespace detail {

// One categorical draw from row v of Pi. The linear scan consumes exactly
// one uniform; the alias sampler consumes one below() and one uniform.
template <typename S>
int sample_step(const TransitionMatrix<S>& tm, int v, Rng& rng, SamplerKind kind) {
  const int begin = tm.row_offsets[v], len = tm.row_size(v);
  if (kind == SamplerKind::kLinearScan) {
    const S u = static_cast<S>(rng.uniform());
    S acc = S(0);
    for (int i = 0; i < len; ++i) {
      acc += tm.probs[begin + i];
      if (u < acc) return tm.cols[begin + i];
    }
    return tm.cols[begin + len - 1];  // rounding leftover
  }
  WSC_REQUIRE(tm.has_alias(), ConfigError, "alias sampler requested but tables not built");
  const int i = static_cast<int>(rng.below(static_cast<std::uint32_t>(len)));
  const S u = static_cast<S>(rng.uniform());
  if (u < tm.alias_threshold[begin + i] || tm.alias_partner[begin + i] < 0)
    return tm.cols[begin + i];
  return tm.cols[begin + tm.alias_partner[begin + i]];
}

}  // namespace detail

// A length-t walk from root: t+1 vertices, each step drawn from the current
// row of Pi; isolated vertices absorb the remainder of the walk.
template <typename S>
std::vector<int> sample_walk(const TransitionMatrix<S>& tm, int root, int t, Rng& rng,
                             SamplerKind kind = SamplerKind::kLinearScan) {
  WSC_REQUIRE(root >= 0 && root < tm.vertex_count, DomainError,
              "walk root ", root, " out of range [0,", tm.vertex_count, ")");
  WSC_REQUIRE(t >= 1, DomainError, "walk length t must be >= 1, got ", t);
  std::vector<int> path(t + 1);
  path[0] = root;
  for (int step = 1; step <= t; ++step)
    path[step] = tm.isolated[path[step - 1]] ? path[step - 1]
                                             : detail::sample_step(tm, path[step - 1], rng, kind);
  return path;
}

// K sampled paths of a single scale t rooted at one vertex, plus the
// concatenated attributes of the t non-root path vertices (K x t*d). The
// root's own attribute enters the layer separately, which keeps the encoded
// feature dimension at (2td+1)C.
template <typename S>
struct WalkField {
  int root = -1;
  int scale = 0;
  std::vector<std::vector<int>> paths;
  RowMat<S> path_attributes;
};

inline std::vector<int> scales_for(int max_scale) {
  WSC_REQUIRE(max_scale >= 2, ConfigError, "walk scale T must be >= 2, got ", max_scale);
  std::vector<int> scales(max_scale - 1);
  std::iota(scales.begin(), scales.end(), 2);
  return scales;
}

// All walk fields of one graph: fields[v][si] holds scale scales[si] at
// vertex v. Streams are derived per (seed, graph, vertex, scale, nonce), so
// fields are reproducible and independent of evaluation order; the nonce
// varies per epoch during training and is pinned for evaluation.
template <typename S>
struct WalkFieldSet {
  std::vector<int> scales;
  std::vector<std::vector<WalkField<S>>> fields;
};

template <typename S>
WalkFieldSet<S> build_walk_fields(const TransitionMatrix<S>& tm, const Graph<S>& graph,
                                  const std::vector<int>& scales, int paths_per_field,
                                  std::uint64_t seed, std::uint64_t graph_id, std::uint64_t nonce,
                                  SamplerKind kind = SamplerKind::kLinearScan) {
  WSC_REQUIRE(paths_per_field >= 1, ConfigError, "K must be >= 1, got ", paths_per_field);
  WSC_REQUIRE(!scales.empty(), ConfigError, "need at least one walk scale");
  const int d = static_cast<int>(graph.attributes.cols());
  WSC_REQUIRE(d >= 1, ConfigError, "graph attributes must be initialized before sampling");

  WalkFieldSet<S> set;
  set.scales = scales;
  set.fields.resize(graph.vertex_count);
  for (int v = 0; v < graph.vertex_count; ++v) {
    set.fields[v].reserve(scales.size());
    for (int t : scales) {
      WSC_REQUIRE(t >= 2, ConfigError, "walk scales start at 2, got ", t);
      Rng rng = Rng::from_key(seed, {graph_id, static_cast<std::uint64_t>(v),
                                     static_cast<std::uint64_t>(t), nonce});
      WalkField<S> field;
      field.root = v;
      field.scale = t;
      field.paths.reserve(paths_per_field);
      field.path_attributes.resize(paths_per_field, t * d);
      for (int k = 0; k < paths_per_field; ++k) {
        std::vector<int> path = sample_walk(tm, v, t, rng, kind);
        for (int step = 1; step <= t; ++step)
          field.path_attributes.row(k).segment((step - 1) * d, d) =
              graph.attributes.row(path[step]);
        field.paths.push_back(std::move(path));
      }
      set.fields[v].push_back(std::move(field));
    }
  }
  return set;
}

}  // namespace wsc
