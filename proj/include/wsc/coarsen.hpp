#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/nn.hpp"
#include "wsc/walk.hpp"

namespace wsc {

namespace detail {

// Stable softplus and its derivative; keeps cluster attractiveness positive
// whatever sign the learned vertex weights drift to.
template <typename S>
inline S softplus(S x) {
  return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename S>
inline S sigmoid(S x) {
  return x > S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

}  // namespace detail

// The per-vertex weight map phi: a small MLP d -> hidden -> 1 whose scalar
// output gamma_i marks the importance of vertex v_i.
template <typename S>
struct CoarseningParams {
  Affine<S> hidden;
  Affine<S> output;

  static CoarseningParams init(int dim, int hidden_width, Rng& rng) {
    CoarseningParams p;
    p.hidden = Affine<S>::init(dim, hidden_width, rng);
    p.output = Affine<S>::init(hidden_width, 1, rng);
    return p;
  }

  void register_params(ParamRegistry<S>& reg, const std::string& prefix) {
    hidden.register_params(reg, prefix + ".hidden");
    output.register_params(reg, prefix + ".output");
  }
};

template <typename S>
struct WeightCache {
  bool valid = false;
  RowMat<S> x;    // m x d inputs
  RowMat<S> pre;  // m x h hidden pre-activations
};

// gamma_i = phi(X_{v_i}) for every vertex, differentiable in phi and X.
template <typename S>
Vec<S> compute_weights(const CoarseningParams<S>& params, const RowMat<S>& x,
                       WeightCache<S>* cache = nullptr) {
  WSC_REQUIRE(static_cast<int>(x.cols()) == params.hidden.in, UsageError,
              "weight map expects width ", params.hidden.in, ", got ", x.cols());
  const int m = static_cast<int>(x.rows());
  Vec<S> gamma(m);
  RowMat<S> pre(m, params.hidden.out);
  for (int v = 0; v < m; ++v) {
    pre.row(v) = params.hidden.forward(x.row(v).transpose()).transpose();
    gamma[v] = params.output.forward(relu(Vec<S>(pre.row(v).transpose())))[0];
  }
  if (cache) {
    cache->valid = true;
    cache->x = x;
    cache->pre = pre;
  }
  return gamma;
}

// Accumulates phi gradients for upstream d(loss)/d(gamma); returns d(loss)/dX.
template <typename S>
RowMat<S> weights_backward(CoarseningParams<S>& params, const WeightCache<S>& cache,
                           const Vec<S>& d_gamma) {
  WSC_REQUIRE(cache.valid, UsageError, "weights_backward called without a forward cache");
  WSC_REQUIRE(d_gamma.size() == cache.x.rows(), UsageError, "d_gamma size mismatch");
  RowMat<S> dx = RowMat<S>::Zero(cache.x.rows(), cache.x.cols());
  Vec<S> dy(1);
  for (int v = 0; v < static_cast<int>(cache.x.rows()); ++v) {
    dy[0] = d_gamma[v];
    const Vec<S> pre = cache.pre.row(v).transpose();
    const Vec<S> d_hidden = params.output.backward(relu(pre), dy);
    dx.row(v) =
        params.hidden.backward(cache.x.row(v).transpose(), relu_backward(pre, d_hidden))
            .transpose();
  }
  return dx;
}

// Result of clustering one graph: the binary assignment (one cluster per
// vertex), the soft score path used for training-mode gradients, and the
// induced coarse graph (A1 = P^T A P, X1 = per-cluster feature max).
template <typename S>
struct CoarseningPlan {
  int source_count = 0;
  int cluster_count = 0;
  int channels = 0;
  bool training_mode = false;
  std::vector<int> seeds;       // n seed vertices, descending weight
  std::vector<int> assignment;  // m, cluster index per vertex
  RowMat<S> scores;             // m x n row-softmax scores
  RowMat<S> affinity;           // m x n, delta + one- and two-step reach
  Vec<S> seed_gates;            // n, d softplus(gamma_seed) / d gamma_seed
  std::vector<int> winners;     // n*channels, arg-max source vertex
  Graph<S> coarse;
};

inline int coarse_size(double ratio, int m) {
  WSC_REQUIRE(ratio >= 0.0 && ratio <= 1.0, ConfigError, "coarsening ratio must be in [0,1]");
  if (ratio == 0.0) return 1;  // the to-one layer
  return std::max(1, static_cast<int>(std::lround(ratio * m)));
}

// The clustering function psi(Gamma; A): n seeds are the top-n vertices by
// weight; each vertex scores against cluster p by its one- and two-step
// transition probability of reaching seed p, scaled by softplus of the
// seed's weight, softmax over clusters, argmax to binarize. Two propagation
// steps keep the assignment topology-aware for vertices with no seed in
// their immediate neighborhood; the softplus keeps more transition mass
// meaning more affinity even when the learned weights go negative.
// Deterministic; ties go to the lowest index.
template <typename S>
CoarseningPlan<S> cluster(const Vec<S>& gamma, const Graph<S>& graph, int n,
                          bool training = false) {
  const int m = graph.vertex_count;
  WSC_REQUIRE(n >= 1 && n <= m, DomainError, "cluster count ", n, " outside [1,", m, "]");
  WSC_REQUIRE(static_cast<int>(gamma.size()) == m, DomainError,
              "weight vector size ", gamma.size(), " != vertex count ", m);
  const int d = static_cast<int>(graph.attributes.cols());

  CoarseningPlan<S> plan;
  plan.source_count = m;
  plan.cluster_count = n;
  plan.channels = d;
  plan.training_mode = training;

  // Seeds: top-n by weight, stable on index.
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return gamma[a] > gamma[b]; });
  plan.seeds.assign(order.begin(), order.begin() + n);

  // Scores: Z[v][p] = (delta_{v,seed_p} + Pi[v][seed_p] + Pi^2[v][seed_p])
  //                   * softplus(gamma_{seed_p}).
  const TransitionMatrix<S> tm = build_transition(graph);
  plan.affinity = RowMat<S>::Zero(m, n);
  std::vector<int> seed_slot(m, -1);
  for (int p = 0; p < n; ++p) seed_slot[plan.seeds[p]] = p;
  for (int v = 0; v < m; ++v) {
    if (seed_slot[v] >= 0) plan.affinity(v, seed_slot[v]) += S(1);
    for (int e = tm.row_offsets[v]; e < tm.row_offsets[v + 1]; ++e) {
      const int u = tm.cols[e];
      if (seed_slot[u] >= 0) plan.affinity(v, seed_slot[u]) += tm.probs[e];
      for (int e2 = tm.row_offsets[u]; e2 < tm.row_offsets[u + 1]; ++e2)
        if (seed_slot[tm.cols[e2]] >= 0)
          plan.affinity(v, seed_slot[tm.cols[e2]]) += tm.probs[e] * tm.probs[e2];
    }
  }
  Vec<S> seed_pull(n);
  plan.seed_gates.resize(n);
  for (int p = 0; p < n; ++p) {
    seed_pull[p] = detail::softplus(gamma[plan.seeds[p]]);
    plan.seed_gates[p] = detail::sigmoid(gamma[plan.seeds[p]]);
  }
  plan.scores.resize(m, n);
  for (int v = 0; v < m; ++v) {
    Eigen::Array<S, 1, Eigen::Dynamic> z(n);
    for (int p = 0; p < n; ++p) z[p] = plan.affinity(v, p) * seed_pull[p];
    const S mx = z.maxCoeff();
    const auto ez = (z - mx).exp();
    plan.scores.row(v) = ez / ez.sum();
  }

  // Binarize: per-row argmax, lowest index on ties.
  plan.assignment.resize(m);
  std::vector<int> members(n, 0);
  for (int v = 0; v < m; ++v) {
    int best = 0;
    for (int p = 1; p < n; ++p)
      if (plan.scores(v, p) > plan.scores(v, best)) best = p;
    plan.assignment[v] = best;
    ++members[best];
  }

  // Repair: an empty cluster claims the highest-margin vertex, preferring
  // its seed's neighborhood, from donors that keep every cluster non-empty.
  for (int p = 0; p < n; ++p) {
    if (members[p] > 0) continue;
    auto pick = [&](bool adjacent_only) {
      int best = -1;
      S best_margin = S(0);
      for (int v = 0; v < m; ++v) {
        if (members[plan.assignment[v]] < 2) continue;
        if (adjacent_only && v != plan.seeds[p] && !graph.has_edge(plan.seeds[p], v)) continue;
        const S margin = plan.scores(v, p) - plan.scores(v, plan.assignment[v]);
        if (best < 0 || margin > best_margin) {
          best = v;
          best_margin = margin;
        }
      }
      return best;
    };
    int v = pick(true);
    if (v < 0) v = pick(false);
    WSC_REQUIRE(v >= 0, DomainError, "cannot repair empty cluster ", p);
    --members[plan.assignment[v]];
    plan.assignment[v] = p;
    ++members[p];
  }

  // Coarse adjacency A1[p][q] = sum of A[i][j] over i in p, j in q. For
  // undirected graphs only p <= q pairs are accumulated and then mirrored,
  // which makes A1 bitwise symmetric.
  std::map<std::pair<int, int>, S> acc;
  for (int u = 0; u < m; ++u) {
    const int p = plan.assignment[u];
    for (int e = graph.adj_offsets[u]; e < graph.adj_offsets[u + 1]; ++e) {
      const int q = plan.assignment[graph.adj_cols[e]];
      if (graph.undirected && p > q) continue;
      acc[{p, q}] += graph.adj_weights[e];
    }
  }
  std::vector<std::tuple<int, int, S>> coarse_edges;
  for (const auto& [key, w] : acc) {
    coarse_edges.emplace_back(key.first, key.second, w);
    if (graph.undirected && key.first != key.second)
      coarse_edges.emplace_back(key.second, key.first, w);
  }
  plan.coarse = Graph<S>::from_edges(n, coarse_edges, graph.undirected);
  plan.coarse.label = graph.label;

  // Coarse attributes: per-cluster, per-channel max (winner = lowest index).
  // Training mode multiplies each pooled value by the winner's soft score
  // toward its cluster, which is the differentiable path back to phi.
  plan.winners.assign(static_cast<std::size_t>(n) * d, -1);
  plan.coarse.attributes = RowMat<S>::Zero(n, d);
  for (int v = 0; v < m; ++v) {
    const int p = plan.assignment[v];
    for (int ch = 0; ch < d; ++ch) {
      int& w = plan.winners[static_cast<std::size_t>(p) * d + ch];
      if (w < 0 || graph.attributes(v, ch) > graph.attributes(w, ch)) w = v;
    }
  }
  for (int p = 0; p < n; ++p)
    for (int ch = 0; ch < d; ++ch) {
      const int w = plan.winners[static_cast<std::size_t>(p) * d + ch];
      const S scale = training ? plan.scores(w, p) : S(1);
      plan.coarse.attributes(p, ch) = scale * graph.attributes(w, ch);
    }
  return plan;
}

template <typename S>
struct PoolBackwardResult {
  RowMat<S> d_input;  // m x d
  Vec<S> d_gamma;     // m (nonzero only at seeds; zero in hard mode)
};

// Routes upstream coarse-attribute gradients back to the winning vertices;
// in training mode also differentiates the soft score factor through the
// row softmax into the seed weights (assignments stay frozen).
template <typename S>
PoolBackwardResult<S> pool_backward(const CoarseningPlan<S>& plan, const Graph<S>& graph,
                                    const RowMat<S>& upstream) {
  WSC_REQUIRE(plan.source_count == graph.vertex_count &&
                  plan.channels == static_cast<int>(graph.attributes.cols()),
              UsageError, "coarsening plan does not match this graph");
  WSC_REQUIRE(static_cast<int>(upstream.rows()) == plan.cluster_count &&
                  static_cast<int>(upstream.cols()) == plan.channels,
              UsageError, "upstream shape does not match the coarse attributes");

  const int m = plan.source_count, n = plan.cluster_count, d = plan.channels;
  PoolBackwardResult<S> res;
  res.d_input = RowMat<S>::Zero(m, d);
  res.d_gamma = Vec<S>::Zero(m);

  RowMat<S> d_scores = RowMat<S>::Zero(m, n);
  for (int p = 0; p < n; ++p)
    for (int ch = 0; ch < d; ++ch) {
      const int w = plan.winners[static_cast<std::size_t>(p) * d + ch];
      const S up = upstream(p, ch);
      if (plan.training_mode) {
        res.d_input(w, ch) += up * plan.scores(w, p);
        d_scores(w, p) += up * graph.attributes(w, ch);
      } else {
        res.d_input(w, ch) += up;
      }
    }

  if (plan.training_mode) {
    // Row softmax backward, then through Z[v][p] = affinity *
    // softplus(gamma_seed); seed_gates holds the softplus derivative.
    for (int v = 0; v < m; ++v) {
      const auto s = plan.scores.row(v).array();
      const auto ds = d_scores.row(v).array();
      const S dot = (ds * s).sum();
      const auto dz = s * (ds - dot);
      for (int p = 0; p < n; ++p)
        res.d_gamma[plan.seeds[p]] += dz[p] * plan.affinity(v, p) * plan.seed_gates[p];
    }
  }
  return res;
}

}  // namespace wsc
