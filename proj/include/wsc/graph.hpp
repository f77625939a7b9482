#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "wsc/error.hpp"

namespace wsc {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// A single attributed graph. Adjacency is CSR; A(i,j) != 0 iff the edge
// (v_i, v_j) is present. Immutable after construction.
template <typename S>
struct Graph {
  int vertex_count = 0;
  std::vector<int> adj_offsets;  // vertex_count + 1
  std::vector<int> adj_cols;
  std::vector<S> adj_weights;    // strictly nonzero
  RowMat<S> attributes;          // vertex_count x d (0 cols before init)
  std::optional<int> label;
  std::vector<int> node_labels;  // raw per-vertex labels; empty when absent
  bool undirected = true;

  int edge_slots() const { return static_cast<int>(adj_cols.size()); }

  int out_degree(int v) const { return adj_offsets[v + 1] - adj_offsets[v]; }

  S weighted_degree(int v) const {
    S s = S(0);
    for (int e = adj_offsets[v]; e < adj_offsets[v + 1]; ++e) s += adj_weights[e];
    return s;
  }

  S edge_weight(int u, int v) const {
    for (int e = adj_offsets[u]; e < adj_offsets[u + 1]; ++e)
      if (adj_cols[e] == v) return adj_weights[e];
    return S(0);
  }

  bool has_edge(int u, int v) const { return edge_weight(u, v) != S(0); }

  // Builds CSR from directed (u, v, w) triples; duplicate pairs accumulate.
  // Zero-weight entries are dropped so the nonzero pattern is the edge set.
  static Graph from_edges(int m, const std::vector<std::tuple<int, int, S>>& edges,
                          bool undirected_flag = true) {
    Graph g;
    g.vertex_count = m;
    g.undirected = undirected_flag;
    std::map<std::pair<int, int>, S> acc;
    for (const auto& [u, v, w] : edges) {
      WSC_REQUIRE(u >= 0 && u < m && v >= 0 && v < m, DomainError,
                  "edge (", u, ",", v, ") out of range for ", m, " vertices");
      acc[{u, v}] += w;
    }
    g.adj_offsets.assign(m + 1, 0);
    for (const auto& [key, w] : acc)
      if (w != S(0)) ++g.adj_offsets[key.first + 1];
    for (int i = 0; i < m; ++i) g.adj_offsets[i + 1] += g.adj_offsets[i];
    g.adj_cols.resize(g.adj_offsets[m]);
    g.adj_weights.resize(g.adj_offsets[m]);
    std::vector<int> cursor(g.adj_offsets.begin(), g.adj_offsets.end() - 1);
    for (const auto& [key, w] : acc) {
      if (w == S(0)) continue;
      int pos = cursor[key.first]++;
      g.adj_cols[pos] = key.second;
      g.adj_weights[pos] = w;
    }
    g.attributes.resize(m, 0);
    return g;
  }

  bool is_symmetric() const {
    for (int u = 0; u < vertex_count; ++u)
      for (int e = adj_offsets[u]; e < adj_offsets[u + 1]; ++e)
        if (edge_weight(adj_cols[e], u) != adj_weights[e]) return false;
    return true;
  }

  template <typename T>
  Graph<T> cast() const {
    Graph<T> out;
    out.vertex_count = vertex_count;
    out.adj_offsets = adj_offsets;
    out.adj_cols = adj_cols;
    out.adj_weights.assign(adj_weights.begin(), adj_weights.end());
    out.attributes = attributes.template cast<T>();
    out.label = label;
    out.node_labels = node_labels;
    out.undirected = undirected;
    return out;
  }
};

enum class AttributeMode { kLabelOnehot, kDegreeScalar, kLabelAndDegree };

inline const char* to_string(AttributeMode m) {
  switch (m) {
    case AttributeMode::kLabelOnehot: return "label";
    case AttributeMode::kDegreeScalar: return "degree";
    case AttributeMode::kLabelAndDegree: return "label_and_degree";
  }
  return "?";
}

inline AttributeMode attribute_mode_from_string(const std::string& s) {
  if (s == "label" || s == "label_onehot") return AttributeMode::kLabelOnehot;
  if (s == "degree" || s == "degree_scalar") return AttributeMode::kDegreeScalar;
  if (s == "label_and_degree") return AttributeMode::kLabelAndDegree;
  throw ConfigError("unknown attribute mode: " + s);
}

// A labelled benchmark: the unit of ingestion and cross-validation.
template <typename S>
struct Dataset {
  std::vector<Graph<S>> graphs;
  int class_count = 0;
  std::string name;
  std::optional<AttributeMode> attribute_mode;

  bool has_node_labels() const {
    return !graphs.empty() && !graphs.front().node_labels.empty();
  }

  int attribute_dim() const {
    return graphs.empty() ? 0 : static_cast<int>(graphs.front().attributes.cols());
  }

  // Distinct node label values across the whole dataset, ascending.
  std::vector<int> distinct_node_labels() const {
    std::set<int> vals;
    for (const auto& g : graphs) vals.insert(g.node_labels.begin(), g.node_labels.end());
    return {vals.begin(), vals.end()};
  }

  template <typename T>
  Dataset<T> cast() const {
    Dataset<T> out;
    out.graphs.reserve(graphs.size());
    for (const auto& g : graphs) out.graphs.push_back(g.template cast<T>());
    out.class_count = class_count;
    out.name = name;
    out.attribute_mode = attribute_mode;
    return out;
  }
};

// Vertex attribute initialization. Degrees are counts of incident edges in
// the binary adjacency (weights ignored); label one-hots span the distinct
// label values of the whole dataset so d is identical across graphs.
template <typename S>
Dataset<S> initialize_attributes(const Dataset<S>& dataset, AttributeMode mode) {
  const bool needs_labels = mode != AttributeMode::kDegreeScalar;
  if (needs_labels && !dataset.has_node_labels())
    throw ConfigError("attribute mode '" + std::string(to_string(mode)) +
                      "' requires node labels, but dataset '" + dataset.name +
                      "' has none");

  std::vector<int> labels = dataset.distinct_node_labels();
  std::map<int, int> label_index;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) label_index[labels[i]] = i;

  const int label_dim = needs_labels ? static_cast<int>(labels.size()) : 0;
  const int degree_dim = mode == AttributeMode::kLabelOnehot ? 0 : 1;
  const int d = label_dim + degree_dim;

  Dataset<S> out = dataset;
  out.attribute_mode = mode;
  for (auto& g : out.graphs) {
    g.attributes = RowMat<S>::Zero(g.vertex_count, d);
    for (int v = 0; v < g.vertex_count; ++v) {
      if (label_dim > 0) g.attributes(v, label_index.at(g.node_labels[v])) = S(1);
      if (degree_dim > 0) g.attributes(v, d - 1) = static_cast<S>(g.out_degree(v));
    }
  }
  return out;
}

}  // namespace wsc
