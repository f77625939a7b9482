#pragma once

#include <string>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/gmm.hpp"
#include "wsc/graph.hpp"
#include "wsc/nn.hpp"
#include "wsc/walk.hpp"

namespace wsc {

// One graph convolution: per scale t, walk fields are encoded against a
// shared Gaussian mixture, unit-normalized, and mapped by an affine g_t;
// the root attribute and all per-scale maps are fused by f and rectified.
// The hidden width of g_t equals the layer's output width. Adjacency passes
// through untouched.
template <typename S>
struct WscLayerParams {
  int input_dim = 0;     // d
  int out_channels = 0;  // layer width and h_g
  int max_scale = 0;     // T; scales are 2..T
  int components = 0;    // C

  std::vector<GmmParameterSet<S>> mixtures;  // per scale
  std::vector<Affine<S>> maps;               // g_t per scale
  Affine<S> fusion;                          // f

  static WscLayerParams init(int input_dim, int out_channels, int max_scale, int components,
                             Rng& rng) {
    WscLayerParams layer;
    layer.input_dim = input_dim;
    layer.out_channels = out_channels;
    layer.max_scale = max_scale;
    layer.components = components;
    for (int t : scales_for(max_scale)) {
      layer.mixtures.push_back(GmmParameterSet<S>::init(t, components, t * input_dim, rng));
      layer.maps.push_back(Affine<S>::init(layer.mixtures.back().feature_dim(), out_channels, rng));
    }
    layer.fusion = Affine<S>::init(input_dim + (max_scale - 1) * out_channels, out_channels, rng);
    return layer;
  }

  void register_params(ParamRegistry<S>& reg, const std::string& prefix) {
    for (std::size_t si = 0; si < mixtures.size(); ++si) {
      auto& mix = mixtures[si];
      const std::string t = std::to_string(mix.scale);
      reg.add(prefix + ".gmm" + t + ".alpha", mix.alpha.data(), mix.grad_alpha.data(),
              mix.alpha.size());
      reg.add(prefix + ".gmm" + t + ".mu", mix.mu.data(), mix.grad_mu.data(), mix.mu.size());
      reg.add(prefix + ".gmm" + t + ".rho", mix.rho.data(), mix.grad_rho.data(), mix.rho.size());
      maps[si].register_params(reg, prefix + ".g" + t);
    }
    fusion.register_params(reg, prefix + ".f");
  }
};

template <typename S>
struct WscLayerCache {
  bool valid = false;
  std::vector<std::vector<GmmEncodeCache<S>>> enc;  // [vertex][scale]
  std::vector<std::vector<Vec<S>>> feat;            // unit-normalized F_t per vertex/scale
  std::vector<std::vector<S>> feat_norm;            // pre-normalization lengths
  RowMat<S> fused_in;                               // m x f-in
  RowMat<S> pre;                                    // m x out, pre-ReLU
};

// Forward over every vertex; per-vertex work only (one GEMV per map), so a
// row permutation of inputs permutes output rows bitwise.
template <typename S>
RowMat<S> wsc_layer_forward(WscLayerParams<S>& layer, const Graph<S>& graph,
                            const WalkFieldSet<S>& fields, WscLayerCache<S>* cache = nullptr) {
  const int m = graph.vertex_count;
  const int d = static_cast<int>(graph.attributes.cols());
  WSC_REQUIRE(d == layer.input_dim, UsageError, "layer expects input width ", layer.input_dim,
              ", graph has ", d);
  WSC_REQUIRE(static_cast<int>(fields.fields.size()) == m, UsageError,
              "walk fields built for ", fields.fields.size(), " vertices, graph has ", m);
  WSC_REQUIRE(fields.scales.size() == layer.mixtures.size(), UsageError,
              "walk fields cover ", fields.scales.size(), " scales, layer has ",
              layer.mixtures.size());
  for (std::size_t si = 0; si < fields.scales.size(); ++si)
    WSC_REQUIRE(fields.scales[si] == layer.mixtures[si].scale, UsageError,
                "scale mismatch between walk fields and layer mixtures");

  if (cache) {
    cache->valid = true;
    cache->enc.assign(m, std::vector<GmmEncodeCache<S>>(layer.mixtures.size()));
    cache->feat.assign(m, std::vector<Vec<S>>(layer.mixtures.size()));
    cache->feat_norm.assign(m, std::vector<S>(layer.mixtures.size(), S(0)));
    cache->fused_in.resize(m, layer.fusion.in);
    cache->pre.resize(m, layer.out_channels);
  }

  RowMat<S> out(m, layer.out_channels);
  Vec<S> fused(layer.fusion.in);
  for (int v = 0; v < m; ++v) {
    fused.segment(0, d) = graph.attributes.row(v).transpose();
    for (std::size_t si = 0; si < layer.mixtures.size(); ++si) {
      GmmEncodeCache<S> enc;
      Vec<S> f_t = gradient_features(layer.mixtures[si], fields.fields[v][si], &enc);
      // Unit-normalize each scale's feature vector before mapping, as is
      // standard for Fisher-style encodings. Raw magnitudes grow with K and
      // get squared by every stacked layer; without this rescaling momentum
      // SGD at the configured learning rate blows up within a few batches.
      const S norm = f_t.norm();
      if (norm > S(0)) f_t /= norm;
      fused.segment(d + static_cast<Eigen::Index>(si) * layer.out_channels,
                    layer.out_channels) = layer.maps[si].forward(f_t);
      if (cache) {
        cache->enc[v][si] = std::move(enc);
        cache->feat[v][si] = f_t;
        cache->feat_norm[v][si] = norm;
      }
    }
    const Vec<S> pre = layer.fusion.forward(fused);
    out.row(v) = relu(pre).transpose();
    if (cache) {
      cache->fused_in.row(v) = fused.transpose();
      cache->pre.row(v) = pre.transpose();
    }
  }
  return out;
}

// Reverse-mode pass: accumulates every layer parameter gradient and returns
// d(loss)/dX, including the scatter of path-attribute gradients back onto
// the input rows each walk visited.
template <typename S>
RowMat<S> wsc_layer_backward(WscLayerParams<S>& layer, const Graph<S>& graph,
                             const WalkFieldSet<S>& fields, const WscLayerCache<S>& cache,
                             const RowMat<S>& upstream) {
  const int m = graph.vertex_count;
  const int d = layer.input_dim;
  WSC_REQUIRE(cache.valid, UsageError, "layer backward called without a forward cache");
  WSC_REQUIRE(static_cast<int>(cache.fused_in.rows()) == m &&
                  static_cast<int>(fields.fields.size()) == m,
              UsageError, "layer cache does not match this graph");
  WSC_REQUIRE(static_cast<int>(upstream.rows()) == m &&
                  static_cast<int>(upstream.cols()) == layer.out_channels,
              UsageError, "upstream shape mismatch in layer backward");

  RowMat<S> dx = RowMat<S>::Zero(m, d);
  for (int v = 0; v < m; ++v) {
    const Vec<S> d_pre =
        relu_backward(Vec<S>(cache.pre.row(v).transpose()), Vec<S>(upstream.row(v).transpose()));
    const Vec<S> d_fused =
        layer.fusion.backward(Vec<S>(cache.fused_in.row(v).transpose()), d_pre);
    dx.row(v) += d_fused.segment(0, d).transpose();
    for (std::size_t si = 0; si < layer.mixtures.size(); ++si) {
      Vec<S> d_ft = layer.maps[si].backward(
          cache.feat[v][si],
          Vec<S>(d_fused.segment(d + static_cast<Eigen::Index>(si) * layer.out_channels,
                                 layer.out_channels)));
      // Chain through the unit normalization: for y = x/|x| the
      // vector-Jacobian product is (g - (g.y)y)/|x|; identity when x was 0.
      const S norm = cache.feat_norm[v][si];
      if (norm > S(0)) {
        const Vec<S>& unit = cache.feat[v][si];
        d_ft = (d_ft - unit.dot(d_ft) * unit) / norm;
      }
      const WalkField<S>& field = fields.fields[v][si];
      const RowMat<S> d_paths = encoder_backward(layer.mixtures[si], field, cache.enc[v][si], d_ft);
      const int t = field.scale;
      for (std::size_t k = 0; k < field.paths.size(); ++k)
        for (int step = 1; step <= t; ++step)
          dx.row(field.paths[k][step]) += d_paths.row(static_cast<Eigen::Index>(k))
                                              .segment((step - 1) * d, d);
    }
  }
  return dx;
}

}  // namespace wsc
