#include <cmath>
#include <cstring>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "wsc/graph.hpp"
#include "wsc/rng.hpp"
#include "wsc/walk.hpp"
#include "wsc/wsc_layer.hpp"

namespace {

using wsc::Graph;
using wsc::Rng;
using wsc::WalkFieldSet;
using wsc::WscLayerParams;
using Vec = wsc::Vec<double>;
using Mat = wsc::RowMat<double>;

Graph<double> path_graph(int m, int d, Rng& rng) {
  std::vector<std::tuple<int, int, double>> edges;
  for (int v = 0; v + 1 < m; ++v) {
    edges.emplace_back(v, v + 1, 1.0);
    edges.emplace_back(v + 1, v, 1.0);
  }
  auto g = Graph<double>::from_edges(m, edges);
  g.attributes.resize(m, d);
  for (int v = 0; v < m; ++v)
    for (int j = 0; j < d; ++j) g.attributes(v, j) = rng.normal();
  return g;
}

// Refreshes the frozen walks' attribute copies after graph.attributes moved.
void rebind_attributes(WalkFieldSet<double>& fields, const Graph<double>& g) {
  const int d = static_cast<int>(g.attributes.cols());
  for (auto& per_vertex : fields.fields)
    for (auto& f : per_vertex)
      for (std::size_t k = 0; k < f.paths.size(); ++k)
        for (int step = 1; step <= f.scale; ++step)
          f.path_attributes.row(static_cast<Eigen::Index>(k)).segment((step - 1) * d, d) =
              g.attributes.row(f.paths[k][step]);
}

// Nudges every registered parameter off its initialization so finite
// differences never sit exactly on a ReLU kink.
void jitter_params(WscLayerParams<double>& layer, Rng& rng) {
  wsc::ParamRegistry<double> reg;
  layer.register_params(reg, "l");
  for (const auto& view : reg.views())
    for (Eigen::Index i = 0; i < view.size; ++i)
      view.values[i] += 0.1 * (2.0 * rng.uniform() - 1.0);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("layer output shape and zero-map behavior", "[layer]") {
  Rng rng = Rng::from_key(41, {0});
  auto g = path_graph(5, 3, rng);
  const auto tm = wsc::build_transition(g);
  const auto fields = wsc::build_walk_fields(tm, g, wsc::scales_for(3), 4, 7, 0, 1);

  auto layer = WscLayerParams<double>::init(3, 6, 3, 2, rng);
  REQUIRE(layer.mixtures.size() == 2);
  REQUIRE(layer.maps.size() == 2);
  REQUIRE(layer.fusion.in == 3 + 2 * 6);
  REQUIRE(layer.fusion.out == 6);

  SECTION("shape") {
    const Mat out = wsc::wsc_layer_forward(layer, g, fields);
    REQUIRE(out.rows() == 5);
    REQUIRE(out.cols() == 6);
  }

  SECTION("all-zero affine maps silence the layer") {
    for (auto& map : layer.maps) {
      map.w.setZero();
      map.b.setZero();
    }
    layer.fusion.w.setZero();
    layer.fusion.b.setZero();
    const Mat out = wsc::wsc_layer_forward(layer, g, fields);
    REQUIRE(out.cwiseAbs().maxCoeff() == 0.0);  // relu of an all-zero affine
  }
}

TEST_CASE("layer forward is the documented composition", "[layer]") {
  Rng rng = Rng::from_key(42, {0});
  auto g = path_graph(4, 2, rng);
  const auto tm = wsc::build_transition(g);
  const auto fields = wsc::build_walk_fields(tm, g, wsc::scales_for(3), 3, 11, 0, 2);
  auto layer = WscLayerParams<double>::init(2, 4, 3, 2, rng);
  jitter_params(layer, rng);

  const Mat out = wsc::wsc_layer_forward(layer, g, fields);
  for (int v = 0; v < 4; ++v) {
    Vec fused(layer.fusion.in);
    fused.segment(0, 2) = g.attributes.row(v).transpose();
    for (int si = 0; si < 2; ++si) {
      Vec f_t = wsc::gradient_features(layer.mixtures[si], fields.fields[v][si]);
      const double norm = f_t.norm();
      if (norm > 0.0) f_t /= norm;
      fused.segment(2 + si * 4, 4) = layer.maps[si].forward(f_t);
    }
    const Vec want = wsc::relu(Vec(layer.fusion.forward(fused)));
    for (int c = 0; c < 4; ++c) REQUIRE(out(v, c) == want[c]);
  }
}

TEST_CASE("layer gradients match finite differences", "[layer]") {
  Rng rng = Rng::from_key(43, {0});
  auto g = path_graph(4, 2, rng);
  const auto tm = wsc::build_transition(g);
  auto fields = wsc::build_walk_fields(tm, g, wsc::scales_for(2), 3, 13, 0, 5);
  auto layer = WscLayerParams<double>::init(2, 3, 2, 2, rng);
  jitter_params(layer, rng);

  Mat probe(4, 3);
  for (int v = 0; v < 4; ++v)
    for (int c = 0; c < 3; ++c) probe(v, c) = rng.normal();

  wsc::WscLayerCache<double> cache;
  (void)wsc::wsc_layer_forward(layer, g, fields, &cache);
  const Mat dx = wsc::wsc_layer_backward(layer, g, fields, cache, probe);

  auto value = [&]() {
    const Mat out = wsc::wsc_layer_forward(layer, g, fields);
    return (out.array() * probe.array()).sum();
  };

  const double h = 1e-5;
  auto check = [&](double* slot, double analytic, bool rebind) {
    const double keep = *slot;
    *slot = keep + h;
    if (rebind) rebind_attributes(fields, g);
    const double up = value();
    *slot = keep - h;
    if (rebind) rebind_attributes(fields, g);
    const double dn = value();
    *slot = keep;
    if (rebind) rebind_attributes(fields, g);
    const double fd = (up - dn) / (2 * h);
    if (std::abs(fd) < 1e-12 && std::abs(analytic) < 1e-12) return;
    REQUIRE(rel_err(analytic, fd) < 1e-4);
  };

  SECTION("every registered parameter") {
    wsc::ParamRegistry<double> reg;
    layer.register_params(reg, "l");
    REQUIRE(reg.views().size() == 3 + 2 + 2);  // gmm alpha/mu/rho, g2 w/b, f w/b
    reg.clear_grads();
    (void)wsc::wsc_layer_forward(layer, g, fields, &cache);
    (void)wsc::wsc_layer_backward(layer, g, fields, cache, probe);
    for (const auto& view : reg.views())
      for (Eigen::Index i = 0; i < view.size; ++i)
        check(&view.values[i], view.grads[i], false);
  }

  SECTION("input attributes, including walk visits") {
    for (int v = 0; v < 4; ++v)
      for (int j = 0; j < 2; ++j) check(&g.attributes(v, j), dx(v, j), true);
  }
}

TEST_CASE("exactly-zero gradient features pass through the normalization", "[layer]") {
  // One component, two paths at mu +- sigma in every coordinate: the alpha,
  // mu, and sigma blocks all cancel, so the encoded feature is exactly zero.
  Rng rng = Rng::from_key(44, {0});
  auto g = path_graph(2, 1, rng);
  const auto tm = wsc::build_transition(g);
  auto fields = wsc::build_walk_fields(tm, g, {2}, 2, 1, 0, 1);
  auto layer = WscLayerParams<double>::init(1, 2, 2, 1, rng);
  jitter_params(layer, rng);

  for (int v = 0; v < 2; ++v) {
    auto& f = fields.fields[v][0];
    const auto& mix = layer.mixtures[0];
    for (int j = 0; j < 2; ++j) {
      const double sigma = std::exp(mix.rho(0, j));
      f.path_attributes(0, j) = mix.mu(0, j) + sigma;
      f.path_attributes(1, j) = mix.mu(0, j) - sigma;
    }
  }
  REQUIRE(wsc::gradient_features(layer.mixtures[0], fields.fields[0][0]).cwiseAbs().maxCoeff() ==
          0.0);

  wsc::WscLayerCache<double> cache;
  const Mat out = wsc::wsc_layer_forward(layer, g, fields, &cache);
  REQUIRE(out.allFinite());
  Mat probe = Mat::Ones(2, 2);
  const Mat dx = wsc::wsc_layer_backward(layer, g, fields, cache, probe);
  REQUIRE(dx.allFinite());
}

TEST_CASE("layer rejects mismatched inputs", "[layer]") {
  Rng rng = Rng::from_key(45, {0});
  auto g = path_graph(4, 2, rng);
  const auto tm = wsc::build_transition(g);
  const auto fields = wsc::build_walk_fields(tm, g, wsc::scales_for(2), 3, 1, 0, 1);

  SECTION("wrong input width") {
    auto layer = WscLayerParams<double>::init(3, 2, 2, 1, rng);
    REQUIRE_THROWS_AS(wsc::wsc_layer_forward(layer, g, fields), wsc::UsageError);
  }

  SECTION("wrong scale coverage") {
    auto layer = WscLayerParams<double>::init(2, 2, 3, 1, rng);  // wants scales {2,3}
    REQUIRE_THROWS_AS(wsc::wsc_layer_forward(layer, g, fields), wsc::UsageError);
  }

  SECTION("fields from a different graph size") {
    auto layer = WscLayerParams<double>::init(2, 2, 2, 1, rng);
    auto small = path_graph(3, 2, rng);
    const auto small_tm = wsc::build_transition(small);
    const auto small_fields = wsc::build_walk_fields(small_tm, small, {2}, 3, 1, 0, 1);
    REQUIRE_THROWS_AS(wsc::wsc_layer_forward(layer, g, small_fields), wsc::UsageError);
  }

  SECTION("backward needs a forward cache and matching upstream") {
    auto layer = WscLayerParams<double>::init(2, 2, 2, 1, rng);
    wsc::WscLayerCache<double> cache;
    const Mat up_ok = Mat::Zero(4, 2);
    REQUIRE_THROWS_AS(wsc::wsc_layer_backward(layer, g, fields, cache, up_ok),
                      wsc::UsageError);
    (void)wsc::wsc_layer_forward(layer, g, fields, &cache);
    const Mat up_bad = Mat::Zero(4, 3);
    REQUIRE_THROWS_AS(wsc::wsc_layer_backward(layer, g, fields, cache, up_bad),
                      wsc::UsageError);
  }
}

TEST_CASE("layer forward is bitwise deterministic", "[layer]") {
  Rng rng = Rng::from_key(46, {0});
  auto g = path_graph(6, 3, rng);
  const auto tm = wsc::build_transition(g);
  const auto fields = wsc::build_walk_fields(tm, g, wsc::scales_for(3), 4, 3, 0, 9);
  auto layer = WscLayerParams<double>::init(3, 5, 3, 2, rng);
  jitter_params(layer, rng);
  const Mat a = wsc::wsc_layer_forward(layer, g, fields);
  const Mat b = wsc::wsc_layer_forward(layer, g, fields);
  REQUIRE(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("vertex relabeling permutes layer outputs bitwise", "[layer]") {
  Rng rng = Rng::from_key(47, {0});
  for (int rep = 0; rep < 10; ++rep) {
    const int m = 3 + static_cast<int>(rng.below(6));
    const int d = 1 + static_cast<int>(rng.below(3));
    auto g = path_graph(m, d, rng);
    const auto tm = wsc::build_transition(g);
    auto fields = wsc::build_walk_fields(tm, g, wsc::scales_for(2), 3, 17, 0,
                                         static_cast<std::uint64_t>(rep));
    auto layer = WscLayerParams<double>::init(d, 3, 2, 2, rng);
    jitter_params(layer, rng);
    const Mat out = wsc::wsc_layer_forward(layer, g, fields);

    // random permutation perm[old] = new
    std::vector<int> perm(m);
    for (int v = 0; v < m; ++v) perm[v] = v;
    for (int i = m; i > 1; --i)
      std::swap(perm[i - 1], perm[rng.below(static_cast<std::uint32_t>(i))]);

    std::vector<std::tuple<int, int, double>> edges;
    for (int u = 0; u < m; ++u)
      for (int e = g.adj_offsets[u]; e < g.adj_offsets[u + 1]; ++e)
        edges.emplace_back(perm[u], perm[g.adj_cols[e]], g.adj_weights[e]);
    auto pg = Graph<double>::from_edges(m, edges);
    pg.attributes.resize(m, d);
    for (int v = 0; v < m; ++v) pg.attributes.row(perm[v]) = g.attributes.row(v);

    // relabel the frozen fields consistently
    WalkFieldSet<double> pfields;
    pfields.scales = fields.scales;
    pfields.fields.resize(m);
    for (int v = 0; v < m; ++v) {
      pfields.fields[perm[v]] = fields.fields[v];
      for (auto& f : pfields.fields[perm[v]]) {
        f.root = perm[f.root];
        for (auto& path : f.paths)
          for (int& vertex : path) vertex = perm[vertex];
      }
    }

    const Mat pout = wsc::wsc_layer_forward(layer, pg, pfields);
    for (int v = 0; v < m; ++v)
      for (int c = 0; c < 3; ++c) REQUIRE(pout(perm[v], c) == out(v, c));
  }
}
