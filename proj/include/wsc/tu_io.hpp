#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"

namespace wsc {
namespace detail {

// One whitespace/comma tolerant text line, keeping its 1-based position.
struct TuLine {
  std::string text;
  long number;
};

inline std::vector<TuLine> read_tu_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("missing required file: " + path.string());
  std::vector<TuLine> lines;
  std::string raw;
  long number = 0;
  while (std::getline(in, raw)) {
    ++number;
    for (char& c : raw)
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    if (raw.find_first_not_of(' ') == std::string::npos) continue;  // blank
    lines.push_back({raw, number});
  }
  return lines;
}

inline std::vector<long> parse_ints(const TuLine& line, const std::filesystem::path& path,
                                    std::size_t expected) {
  std::istringstream ss(line.text);
  std::vector<long> vals;
  long v;
  while (ss >> v) vals.push_back(v);
  ss.clear();
  std::string tail;
  if (ss >> tail || (expected != 0 && vals.size() != expected))
    throw FormatError(path.filename().string() + ": expected " + std::to_string(expected) +
                          " integer(s), got '" + line.text + "'",
                      line.number);
  return vals;
}

inline std::vector<double> parse_reals(const TuLine& line, const std::filesystem::path& path) {
  std::istringstream ss(line.text);
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  ss.clear();
  std::string tail;
  if (ss >> tail || vals.empty())
    throw FormatError(path.filename().string() + ": expected real values, got '" + line.text + "'",
                      line.number);
  return vals;
}

}  // namespace detail

// Loads a benchmark in the standard multi-file plain-text layout:
// <name>_A.txt (1-indexed edge pairs), <name>_graph_indicator.txt,
// <name>_graph_labels.txt, and optionally <name>_node_labels.txt /
// <name>_node_attributes.txt. Graph labels are remapped to contiguous
// {0..l-1} preserving ascending order of the raw values.
template <typename S = double>
Dataset<S> load_tu_dataset(const std::filesystem::path& root, const std::string& name,
                           bool use_node_attributes = false) {
  namespace fs = std::filesystem;
  const fs::path dir = root / name;
  const fs::path base = fs::exists(dir / (name + "_A.txt")) ? dir : root;
  auto file = [&](const char* suffix) { return base / (name + suffix); };

  // Vertex -> graph memberships. Graph ids must be 1-based and contiguous.
  const auto indicator_lines = detail::read_tu_lines(file("_graph_indicator.txt"));
  const long total_vertices = static_cast<long>(indicator_lines.size());
  std::vector<long> vertex_graph(total_vertices);
  long graph_count = 0;
  for (long i = 0; i < total_vertices; ++i) {
    const long gid = detail::parse_ints(indicator_lines[i], file("_graph_indicator.txt"), 1)[0];
    if (gid < 1)
      throw FormatError(name + "_graph_indicator.txt: graph id " + std::to_string(gid) + " < 1",
                        indicator_lines[i].number);
    vertex_graph[i] = gid - 1;
    graph_count = std::max(graph_count, gid);
  }
  if (total_vertices == 0) throw IngestionError(name + "_graph_indicator.txt is empty");

  // Local vertex index within its graph, in file order.
  std::vector<long> vertex_local(total_vertices);
  std::vector<int> graph_sizes(graph_count, 0);
  for (long i = 0; i < total_vertices; ++i) vertex_local[i] = graph_sizes[vertex_graph[i]]++;

  // Graph labels, remapped to {0..l-1}.
  const auto label_lines = detail::read_tu_lines(file("_graph_labels.txt"));
  if (static_cast<long>(label_lines.size()) != graph_count)
    throw IngestionError(name + "_graph_labels.txt: expected " + std::to_string(graph_count) +
                         " labels, found " + std::to_string(label_lines.size()));
  std::vector<long> raw_labels(graph_count);
  std::map<long, int> label_map;
  for (long g = 0; g < graph_count; ++g) {
    raw_labels[g] = detail::parse_ints(label_lines[g], file("_graph_labels.txt"), 1)[0];
    label_map.emplace(raw_labels[g], 0);
  }
  int next_class = 0;
  for (auto& [raw, idx] : label_map) idx = next_class++;

  // Edges, grouped per graph in local indices.
  std::vector<std::vector<std::tuple<int, int, S>>> edges(graph_count);
  const fs::path a_path = file("_A.txt");
  for (const auto& line : detail::read_tu_lines(a_path)) {
    const auto pair = detail::parse_ints(line, a_path, 2);
    const long u = pair[0] - 1, v = pair[1] - 1;
    if (u < 0 || u >= total_vertices || v < 0 || v >= total_vertices)
      throw FormatError(name + "_A.txt: vertex index out of range in '" + line.text + "'",
                        line.number);
    if (vertex_graph[u] != vertex_graph[v])
      throw FormatError(name + "_A.txt: edge '" + line.text + "' joins two different graphs",
                        line.number);
    edges[vertex_graph[u]].emplace_back(static_cast<int>(vertex_local[u]),
                                        static_cast<int>(vertex_local[v]), S(1));
  }

  // Optional per-vertex labels.
  std::vector<int> node_labels;
  if (fs::exists(file("_node_labels.txt"))) {
    const fs::path nl_path = file("_node_labels.txt");
    const auto nl_lines = detail::read_tu_lines(nl_path);
    if (static_cast<long>(nl_lines.size()) != total_vertices)
      throw IngestionError(name + "_node_labels.txt: expected " + std::to_string(total_vertices) +
                           " lines, found " + std::to_string(nl_lines.size()));
    node_labels.reserve(total_vertices);
    for (const auto& line : nl_lines)
      node_labels.push_back(static_cast<int>(detail::parse_ints(line, nl_path, 0).at(0)));
  }

  // Optional real-valued vertex attributes (off by default).
  std::vector<std::vector<double>> node_attrs;
  if (use_node_attributes && fs::exists(file("_node_attributes.txt"))) {
    const fs::path na_path = file("_node_attributes.txt");
    const auto na_lines = detail::read_tu_lines(na_path);
    if (static_cast<long>(na_lines.size()) != total_vertices)
      throw IngestionError(name + "_node_attributes.txt: expected " +
                           std::to_string(total_vertices) + " lines, found " +
                           std::to_string(na_lines.size()));
    node_attrs.reserve(total_vertices);
    for (const auto& line : na_lines) node_attrs.push_back(detail::parse_reals(line, na_path));
    for (const auto& row : node_attrs)
      if (row.size() != node_attrs.front().size())
        throw IngestionError(name + "_node_attributes.txt: ragged attribute rows");
  }

  Dataset<S> dataset;
  dataset.name = name;
  dataset.class_count = next_class;
  WSC_REQUIRE(dataset.class_count >= 2, IngestionError,
              name, ": need at least 2 classes, found ", dataset.class_count);
  dataset.graphs.reserve(graph_count);
  for (long g = 0; g < graph_count; ++g) {
    Graph<S> graph = Graph<S>::from_edges(graph_sizes[g], edges[g]);
    graph.label = label_map.at(raw_labels[g]);
    dataset.graphs.push_back(std::move(graph));
  }
  if (!node_labels.empty()) {
    for (long i = 0; i < total_vertices; ++i)
      dataset.graphs[vertex_graph[i]].node_labels.resize(graph_sizes[vertex_graph[i]]);
    for (long i = 0; i < total_vertices; ++i)
      dataset.graphs[vertex_graph[i]].node_labels[vertex_local[i]] = node_labels[i];
  }
  if (!node_attrs.empty()) {
    const int d = static_cast<int>(node_attrs.front().size());
    for (auto& graph : dataset.graphs) graph.attributes.resize(graph.vertex_count, d);
    for (long i = 0; i < total_vertices; ++i)
      for (int j = 0; j < d; ++j)
        dataset.graphs[vertex_graph[i]].attributes(vertex_local[i], j) =
            static_cast<S>(node_attrs[i][j]);
  }
  for (auto& graph : dataset.graphs)
    if (!graph.is_symmetric()) graph.undirected = false;
  return dataset;
}

// Serializes a Dataset back to the same layout (adjacency in CSR order,
// 1-indexed global vertices). Reloading reproduces the dataset exactly.
template <typename S>
void write_tu_dataset(const Dataset<S>& dataset, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path dir = root / dataset.name;
  fs::create_directories(dir);
  auto open = [&](const char* suffix) {
    fs::path p = dir / (dataset.name + suffix);
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
  };

  std::vector<long> graph_base(dataset.graphs.size() + 1, 0);
  for (std::size_t g = 0; g < dataset.graphs.size(); ++g)
    graph_base[g + 1] = graph_base[g] + dataset.graphs[g].vertex_count;

  auto a_out = open("_A.txt");
  auto ind_out = open("_graph_indicator.txt");
  auto lab_out = open("_graph_labels.txt");
  for (std::size_t g = 0; g < dataset.graphs.size(); ++g) {
    const auto& graph = dataset.graphs[g];
    WSC_REQUIRE(graph.label.has_value(), IoError, dataset.name, ": graph ", g, " has no label");
    lab_out << *graph.label << "\n";
    for (int v = 0; v < graph.vertex_count; ++v) {
      ind_out << g + 1 << "\n";
      for (int e = graph.adj_offsets[v]; e < graph.adj_offsets[v + 1]; ++e) {
        // Loaded weights are duplicate-line counts; emit one line per unit.
        const long reps = std::lround(static_cast<double>(graph.adj_weights[e]));
        WSC_REQUIRE(reps > 0 && S(reps) == graph.adj_weights[e], IoError,
                    dataset.name, ": non-integer edge weight cannot be serialized");
        for (long r = 0; r < reps; ++r)
          a_out << graph_base[g] + v + 1 << ", " << graph_base[g] + graph.adj_cols[e] + 1 << "\n";
      }
    }
  }

  const bool has_labels =
      std::any_of(dataset.graphs.begin(), dataset.graphs.end(),
                  [](const Graph<S>& g) { return !g.node_labels.empty(); });
  if (has_labels) {
    auto nl_out = open("_node_labels.txt");
    for (const auto& graph : dataset.graphs)
      for (int v = 0; v < graph.vertex_count; ++v) nl_out << graph.node_labels[v] << "\n";
  }
}

}  // namespace wsc
