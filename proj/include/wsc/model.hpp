#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "wsc/coarsen.hpp"
#include "wsc/error.hpp"
#include "wsc/gmm.hpp"
#include "wsc/graph.hpp"
#include "wsc/nn.hpp"
#include "wsc/walk.hpp"
#include "wsc/wsc_layer.hpp"

namespace wsc {

struct LayerDesc {
  enum class Kind { kConv, kPool, kFc };
  Kind kind;
  int width = 0;      // channels (C, FC)
  double ratio = 0.0; // coarsening ratio (P); 0.0 pools to one vertex
};

// Dash-separated C(channels), P(ratio), FC(width): convolutions and
// coarsenings alternate, exactly one trailing FC, and the pooling before FC
// (when any layer precedes FC) must be P(0.0) so the FC input width is fixed.
struct ArchitectureSpec {
  std::string text;
  std::vector<LayerDesc> layers;

  int conv_count() const {
    int n = 0;
    for (const auto& l : layers)
      if (l.kind == LayerDesc::Kind::kConv) ++n;
    return n;
  }

  int fc_width() const { return layers.back().width; }
};

inline ArchitectureSpec parse_architecture(const std::string& text) {
  auto fail = [&](std::size_t pos, const std::string& why) {
    throw ConfigError("architecture '" + text + "': " + why + " at position " +
                      std::to_string(pos));
  };

  ArchitectureSpec spec;
  spec.text = text;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t tok_start = pos;
    LayerDesc desc;
    if (text.compare(pos, 3, "FC(") == 0) {
      desc.kind = LayerDesc::Kind::kFc;
      pos += 3;
    } else if (text.compare(pos, 2, "C(") == 0) {
      desc.kind = LayerDesc::Kind::kConv;
      pos += 2;
    } else if (text.compare(pos, 2, "P(") == 0) {
      desc.kind = LayerDesc::Kind::kPool;
      pos += 2;
    } else {
      fail(tok_start, "expected C(, P( or FC(");
    }
    const std::size_t close = text.find(')', pos);
    if (close == std::string::npos) fail(tok_start, "missing ')'");
    const std::string arg = text.substr(pos, close - pos);
    try {
      std::size_t used = 0;
      if (desc.kind == LayerDesc::Kind::kPool) {
        desc.ratio = std::stod(arg, &used);
      } else {
        desc.width = std::stoi(arg, &used);
      }
      if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      fail(pos, "malformed argument '" + arg + "'");
    }
    if (desc.kind == LayerDesc::Kind::kPool && (desc.ratio < 0.0 || desc.ratio >= 1.0))
      fail(pos, "coarsening ratio must be in [0,1)");
    if (desc.kind != LayerDesc::Kind::kPool && desc.width <= 0)
      fail(pos, "width must be a positive integer");
    spec.layers.push_back(desc);
    pos = close + 1;
    if (pos < text.size()) {
      if (text[pos] != '-') fail(pos, "expected '-' between layers");
      ++pos;
      if (pos == text.size()) fail(pos, "trailing '-'");
    }
  }

  if (spec.layers.empty()) throw ConfigError("architecture '" + text + "': empty");
  if (spec.layers.back().kind != LayerDesc::Kind::kFc)
    throw ConfigError("architecture '" + text + "': must end with one FC layer");
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    const auto kind = spec.layers[i].kind;
    if (kind == LayerDesc::Kind::kFc)
      throw ConfigError("architecture '" + text + "': FC must be the last layer");
    const auto expect = i % 2 == 0 ? LayerDesc::Kind::kConv : LayerDesc::Kind::kPool;
    if (kind != expect)
      throw ConfigError("architecture '" + text +
                        "': convolution and coarsening layers must alternate starting with C");
  }
  if (spec.layers.size() > 1) {
    const auto& last_pool = spec.layers[spec.layers.size() - 2];
    if (last_pool.kind != LayerDesc::Kind::kPool || last_pool.ratio != 0.0)
      throw ConfigError("architecture '" + text +
                        "': the coarsening before FC must be P(0.0) so the FC input is one vertex");
  }
  return spec;
}

// Everything a model needs beyond the dataset: architecture, walk/mixture
// hyperparameters, and the seed all parameter initialization and walk
// sampling streams derive from.
struct ModelConfig {
  ArchitectureSpec arch;
  int max_scale = 3;   // T
  int components = 3;  // C
  int samples = 8;     // K
  double dropout = 0.5;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::kLinearScan;
};

// Per-graph forward state kept alive for the backward pass.
template <typename S>
struct ModelCache {
  bool valid = false;
  std::uint64_t graph_id = 0;
  bool training = false;
  std::vector<Graph<S>> stages;            // graph entering each arch layer
  std::vector<WalkFieldSet<S>> fields;     // per conv layer
  std::vector<WscLayerCache<S>> conv;      // per conv layer
  std::vector<WeightCache<S>> phi;         // per pool layer
  std::vector<Vec<S>> gamma;               // per pool layer
  std::vector<CoarseningPlan<S>> plans;    // per pool layer
  std::vector<int> global_winners;         // FC-only global max-pool
  Vec<S> flat, fc_pre, mask, head_in;
};

// The assembled network: stacked convolution/coarsening layers per the
// architecture string, the FC layer (ReLU + dropout per the training
// protocol), and a linear head to class logits.
template <typename S>
class Model {
 public:
  Model(ModelConfig config, int input_dim, int class_count)
      : config_(std::move(config)), input_dim_(input_dim), class_count_(class_count) {
    WSC_REQUIRE(input_dim >= 1, ConfigError, "model input width must be >= 1");
    WSC_REQUIRE(class_count >= 2, ConfigError, "model needs >= 2 classes");
    Rng rng = Rng::from_key(config_.seed, {0x6d6f64656cull});  // parameter stream
    int width = input_dim;
    int conv_idx = 0, pool_idx = 0;
    for (const auto& desc : config_.arch.layers) {
      switch (desc.kind) {
        case LayerDesc::Kind::kConv:
          convs_.push_back(WscLayerParams<S>::init(width, desc.width, config_.max_scale,
                                                   config_.components, rng));
          convs_.back().register_params(registry_, "conv" + std::to_string(conv_idx++));
          width = desc.width;
          break;
        case LayerDesc::Kind::kPool:
          pools_.push_back(CoarseningParams<S>::init(width, kPhiHidden, rng));
          pools_.back().register_params(registry_, "pool" + std::to_string(pool_idx++));
          ratios_.push_back(desc.ratio);
          break;
        case LayerDesc::Kind::kFc:
          fc_ = Affine<S>::init(width, desc.width, rng);
          fc_.register_params(registry_, "fc");
          head_ = Affine<S>::init(desc.width, class_count, rng);
          head_.register_params(registry_, "head");
          break;
      }
    }
  }

  const ModelConfig& config() const { return config_; }
  ParamRegistry<S>& registry() { return registry_; }
  int class_count() const { return class_count_; }

  // Forward one graph to logits. Walk streams derive from (seed, graph_id,
  // vertex, scale, nonce): pass the epoch as nonce during training so fields
  // are resampled every epoch, and a pinned nonce for evaluation.
  Vec<S> forward(const Graph<S>& graph, std::uint64_t graph_id, bool training,
                 std::uint64_t walk_nonce, ModelCache<S>& cache) {
    WSC_REQUIRE(static_cast<int>(graph.attributes.cols()) == input_dim_, UsageError,
                "graph attribute width ", graph.attributes.cols(), " != model input width ",
                input_dim_);
    cache = ModelCache<S>{};
    cache.valid = true;
    cache.graph_id = graph_id;
    cache.training = training;

    Graph<S> cur = graph;
    int conv_idx = 0, pool_idx = 0;
    for (const auto& desc : config_.arch.layers) {
      if (desc.kind == LayerDesc::Kind::kFc) break;
      cache.stages.push_back(cur);
      if (desc.kind == LayerDesc::Kind::kConv) {
        const TransitionMatrix<S> tm = build_transition(cur);
        cache.fields.push_back(build_walk_fields(tm, cur, scales_for(config_.max_scale),
                                                 config_.samples, config_.seed,
                                                 graph_id * kGraphStride + conv_idx, walk_nonce,
                                                 config_.sampler));
        cache.conv.emplace_back();
        cur.attributes =
            wsc_layer_forward(convs_[conv_idx], cur, cache.fields.back(), &cache.conv.back());
        ++conv_idx;
      } else {
        cache.phi.emplace_back();
        cache.gamma.push_back(
            compute_weights(pools_[pool_idx], cur.attributes, &cache.phi.back()));
        const int n = coarse_size(ratios_[pool_idx], cur.vertex_count);
        // Score-scaled pooling in evaluation too: the vertex-importance gate
        // is part of the learned function, and dropping it only at eval time
        // shifts every downstream activation off the scale training saw.
        cache.plans.push_back(cluster(cache.gamma.back(), cur, n, /*training=*/true));
        cur = cache.plans.back().coarse;
        ++pool_idx;
      }
    }
    cache.stages.push_back(cur);

    // FC input: the single coarse vertex's attributes, or a global column
    // max when the architecture is a bare FC head.
    if (config_.arch.layers.size() == 1) {
      cache.global_winners.assign(input_dim_, 0);
      cache.flat.resize(input_dim_);
      for (int ch = 0; ch < input_dim_; ++ch) {
        int best = 0;
        for (int v = 1; v < cur.vertex_count; ++v)
          if (cur.attributes(v, ch) > cur.attributes(best, ch)) best = v;
        cache.global_winners[ch] = best;
        cache.flat[ch] = cur.attributes(best, ch);
      }
    } else {
      WSC_REQUIRE(cur.vertex_count == 1, UsageError,
                  "FC layer reached with ", cur.vertex_count, " vertices; architecture must "
                  "pool to one vertex first");
      cache.flat = cur.attributes.row(0).transpose();
    }

    cache.fc_pre = fc_.forward(cache.flat);
    Rng drop_rng = Rng::from_key(config_.seed, {0x64726f70ull, graph_id, walk_nonce});
    cache.mask = dropout_mask<S>(cache.fc_pre.size(), static_cast<S>(config_.dropout), training,
                                 drop_rng);
    cache.head_in = relu(cache.fc_pre).cwiseProduct(cache.mask);
    return head_.forward(cache.head_in);
  }

  // Accumulates every parameter gradient for one graph given d(loss)/d(logits).
  void backward(const ModelCache<S>& cache, const Vec<S>& d_logits) {
    WSC_REQUIRE(cache.valid, UsageError, "model backward called without a forward cache");
    const Vec<S> d_head_in = head_.backward(cache.head_in, d_logits);
    const Vec<S> d_fc_pre = relu_backward(cache.fc_pre, Vec<S>(d_head_in.cwiseProduct(cache.mask)));
    const Vec<S> d_flat = fc_.backward(cache.flat, d_fc_pre);

    const Graph<S>& last = cache.stages.back();
    RowMat<S> d_attr = RowMat<S>::Zero(last.vertex_count, last.attributes.cols());
    if (config_.arch.layers.size() == 1) {
      for (int ch = 0; ch < input_dim_; ++ch) d_attr(cache.global_winners[ch], ch) += d_flat[ch];
    } else {
      d_attr.row(0) = d_flat.transpose();
    }

    int conv_idx = static_cast<int>(convs_.size());
    int pool_idx = static_cast<int>(pools_.size());
    for (auto it = config_.arch.layers.rbegin(); it != config_.arch.layers.rend(); ++it) {
      if (it->kind == LayerDesc::Kind::kFc) continue;
      const Graph<S>& stage = cache.stages[conv_idx + pool_idx - 1];
      if (it->kind == LayerDesc::Kind::kPool) {
        --pool_idx;
        auto back = pool_backward(cache.plans[pool_idx], stage, d_attr);
        d_attr = std::move(back.d_input);
        d_attr += weights_backward(pools_[pool_idx], cache.phi[pool_idx], back.d_gamma);
      } else {
        --conv_idx;
        d_attr = wsc_layer_backward(convs_[conv_idx], stage, cache.fields[conv_idx],
                                    cache.conv[conv_idx], d_attr);
      }
    }
  }

  WscLayerParams<S>& conv_layer(int i) { return convs_.at(i); }
  CoarseningParams<S>& pool_params(int i) { return pools_.at(i); }
  Affine<S>& fc() { return fc_; }
  Affine<S>& head() { return head_; }

  static constexpr int kPhiHidden = 16;
  // Distinct walk-stream id per (graph, conv layer); supports deep nets.
  static constexpr std::uint64_t kGraphStride = 64;

 private:
  ModelConfig config_;
  int input_dim_ = 0;
  int class_count_ = 0;
  std::vector<WscLayerParams<S>> convs_;
  std::vector<CoarseningParams<S>> pools_;
  std::vector<double> ratios_;
  Affine<S> fc_;
  Affine<S> head_;
  ParamRegistry<S> registry_;
};

}  // namespace wsc
