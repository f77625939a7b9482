#pragma once

#include <cmath>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/rng.hpp"
#include "wsc/walk.hpp"

namespace wsc {

// Diagonal Gaussian mixture over one walk scale, shared across vertices.
// Mixture weights are softmax(alpha); sigma = exp(rho) keeps every 1/sigma
// power in the gradient features finite under unconstrained SGD. Gradient
// buffers accumulate across vertices until explicitly cleared.
template <typename S>
struct GmmParameterSet {
  int scale = 0;       // t
  int components = 0;  // C
  int dim = 0;         // t*d
  Vec<S> alpha;        // C
  RowMat<S> mu;        // C x dim
  RowMat<S> rho;       // C x dim

  Vec<S> grad_alpha;
  RowMat<S> grad_mu;
  RowMat<S> grad_rho;

  // alpha = 0 (uniform weights), mu ~ N(0, 0.1^2), rho = 0 (sigma = 1).
  static GmmParameterSet init(int scale, int components, int dim, Rng& rng) {
    WSC_REQUIRE(components >= 1 && dim >= 1, ConfigError,
                "mixture needs components >= 1 and dim >= 1");
    GmmParameterSet p;
    p.scale = scale;
    p.components = components;
    p.dim = dim;
    p.alpha = Vec<S>::Zero(components);
    p.mu.resize(components, dim);
    for (int c = 0; c < components; ++c)
      for (int j = 0; j < dim; ++j) p.mu(c, j) = static_cast<S>(0.1 * rng.normal());
    p.rho = RowMat<S>::Zero(components, dim);
    p.clear_grads();
    return p;
  }

  void clear_grads() {
    grad_alpha = Vec<S>::Zero(components);
    grad_mu = RowMat<S>::Zero(components, dim);
    grad_rho = RowMat<S>::Zero(components, dim);
  }

  Vec<S> weights() const {
    const S m = alpha.maxCoeff();
    Vec<S> w = (alpha.array() - m).exp();
    return w / w.sum();
  }

  RowMat<S> sigma() const { return rho.array().exp(); }

  int feature_dim() const { return (2 * dim + 1) * components; }
};

// Values cached by encode() that backward() reuses: responsibilities and the
// derived weight/scale tensors of the forward pass.
template <typename S>
struct GmmEncodeCache {
  bool valid = false;
  Vec<S> w;            // C
  RowMat<S> sigma;     // C x dim
  RowMat<S> q;         // K x C responsibilities
};

namespace detail {

template <typename S>
void check_field_shape(const GmmParameterSet<S>& params, const WalkField<S>& field) {
  WSC_REQUIRE(field.scale == params.scale, DomainError, "walk field scale ", field.scale,
              " does not match mixture scale ", params.scale);
  WSC_REQUIRE(static_cast<int>(field.path_attributes.cols()) == params.dim, DomainError,
              "path attribute dim ", field.path_attributes.cols(), " != mixture dim ",
              params.dim);
}

// Per-path, per-component log joint: log w_c + log N(x_k; mu_c, diag sigma_c^2).
template <typename S>
RowMat<S> log_joint(const GmmParameterSet<S>& params, const RowMat<S>& x) {
  const int K = static_cast<int>(x.rows()), C = params.components, q = params.dim;
  const S m = params.alpha.maxCoeff();
  Vec<S> shifted = (params.alpha.array() - m).exp();
  const S log_z = std::log(shifted.sum()) + m;
  const S half_log_2pi = S(0.5) * std::log(S(2) * S(EIGEN_PI));

  RowMat<S> out(K, C);
  for (int c = 0; c < C; ++c) {
    const S log_wc = params.alpha[c] - log_z;
    const S log_det_half = params.rho.row(c).sum();  // sum_j log sigma_cj
    const auto inv_sigma = (-params.rho.row(c)).array().exp();
    const S base = log_wc - log_det_half - S(q) * half_log_2pi;
    for (int k = 0; k < K; ++k) {
      const auto z = (x.row(k) - params.mu.row(c)).array() * inv_sigma;
      out(k, c) = base - S(0.5) * (z * z).sum();
    }
  }
  return out;
}

}  // namespace detail

// Log-likelihood of one walk field: sum_k log sum_c w_c N_kc,
// computed via max-shifted log-sum-exp.
template <typename S>
S log_likelihood(const GmmParameterSet<S>& params, const WalkField<S>& field) {
  detail::check_field_shape(params, field);
  const RowMat<S> lj = detail::log_joint(params, field.path_attributes);
  S total = S(0);
  for (int k = 0; k < static_cast<int>(lj.rows()); ++k) {
    const S m = lj.row(k).maxCoeff();
    total += m + std::log((lj.row(k).array() - m).exp().sum());
  }
  return total;
}

// Responsibilities Q[k][c] = w_c N_kc / sum_j w_j N_kj via max-shifted
// softmax; rows sum to 1 regardless of density underflow.
template <typename S>
RowMat<S> posteriors(const GmmParameterSet<S>& params, const WalkField<S>& field) {
  detail::check_field_shape(params, field);
  RowMat<S> q = detail::log_joint(params, field.path_attributes);
  for (int k = 0; k < static_cast<int>(q.rows()); ++k) {
    const S m = q.row(k).maxCoeff();
    q.row(k) = (q.row(k).array() - m).exp();
    q.row(k) /= q.row(k).sum();
  }
  return q;
}

// Gradient features of the log-likelihood w.r.t. (alpha, mu, sigma), laid
// out [all alpha | all mu | all sigma], component-major inside each block:
//   d/dalpha_c = sum_k (Q_kc - w_c)
//   d/dmu_c    = sum_k Q_kc (x_k - mu_c) / sigma_c^2
//   d/dsigma_c = sum_k (Q_kc (x_k - mu_c)^2 / sigma_c^3 - Q_kc / sigma_c)
// Sums run in fixed k order so equal inputs give bitwise-equal features.
template <typename S>
Vec<S> gradient_features(const GmmParameterSet<S>& params, const WalkField<S>& field,
                         GmmEncodeCache<S>* cache = nullptr) {
  detail::check_field_shape(params, field);
  const RowMat<S>& x = field.path_attributes;
  const int K = static_cast<int>(x.rows()), C = params.components, q = params.dim;

  const Vec<S> w = params.weights();
  const RowMat<S> sigma = params.sigma();
  const RowMat<S> post = posteriors(params, field);

  Vec<S> out = Vec<S>::Zero(params.feature_dim());
  auto alpha_block = out.segment(0, C);
  auto mu_block = out.segment(C, C * q);
  auto sigma_block = out.segment(C + C * q, C * q);

  for (int c = 0; c < C; ++c) {
    const auto inv_s = sigma.row(c).array().inverse();
    const auto inv_s2 = inv_s * inv_s;
    auto mu_c = mu_block.segment(c * q, q);
    auto sigma_c = sigma_block.segment(c * q, q);
    for (int k = 0; k < K; ++k) {
      const auto diff = (x.row(k) - params.mu.row(c)).array();
      alpha_block[c] += post(k, c) - w[c];
      mu_c.array() += post(k, c) * (diff * inv_s2).transpose();
      sigma_c.array() += post(k, c) * (diff * diff * inv_s2 * inv_s - inv_s).transpose();
    }
  }

  if (cache) {
    cache->valid = true;
    cache->w = w;
    cache->sigma = sigma;
    cache->q = post;
  }
  return out;
}

// Vector-Jacobian product of gradient_features: given upstream d(loss)/d(feature),
// accumulates d(loss)/d(alpha, mu, rho) into the parameter grad buffers and
// returns d(loss)/d(path_attributes). Differentiates through the softmax
// inside Q and through sigma = exp(rho).
template <typename S>
RowMat<S> encoder_backward(GmmParameterSet<S>& params, const WalkField<S>& field,
                           const GmmEncodeCache<S>& cache, const Vec<S>& upstream) {
  detail::check_field_shape(params, field);
  WSC_REQUIRE(cache.valid, UsageError, "encoder_backward called without a forward cache");
  WSC_REQUIRE(static_cast<int>(upstream.size()) == params.feature_dim(), DomainError,
              "upstream size ", upstream.size(), " != feature dim ", params.feature_dim());

  const RowMat<S>& x = field.path_attributes;
  const int K = static_cast<int>(x.rows()), C = params.components, q = params.dim;
  const Vec<S>& w = cache.w;
  const RowMat<S>& sigma = cache.sigma;
  const RowMat<S>& post = cache.q;

  const auto ga = upstream.segment(0, C);                 // alpha block
  auto gm = [&](int c) { return upstream.segment(C + c * q, q); };
  auto gs = [&](int c) { return upstream.segment(C + C * q + c * q, q); };

  // Per-(k,c) inner products B_kc = ga_c + <gm_c, D_kc> + <gs_c, E_kc> where
  // D = (x-mu)/sigma^2, E = (x-mu)^2/sigma^3 - 1/sigma are the feature kernels.
  RowMat<S> b(K, C);
  for (int c = 0; c < C; ++c) {
    const auto inv_s = sigma.row(c).array().inverse();
    const auto inv_s2 = inv_s * inv_s;
    for (int k = 0; k < K; ++k) {
      const auto diff = (x.row(k) - params.mu.row(c)).array();
      const auto d_kc = diff * inv_s2;
      const auto e_kc = diff * diff * inv_s2 * inv_s - inv_s;
      b(k, c) = ga[c] + (gm(c).transpose().array() * d_kc).sum() +
                (gs(c).transpose().array() * e_kc).sum();
    }
  }
  const Vec<S> b_bar = (post.array() * b.array()).rowwise().sum();  // K
  const RowMat<S> r = post.array() * (b.array().colwise() - b_bar.array());

  // alpha: softmax coupling of Q plus the -K*w_c term of the alpha features.
  const S ga_dot_w = (ga.array() * w.array()).sum();
  for (int c = 0; c < C; ++c)
    params.grad_alpha[c] += r.col(c).sum() - S(K) * w[c] * (ga[c] - ga_dot_w);

  RowMat<S> dx = RowMat<S>::Zero(K, q);
  for (int c = 0; c < C; ++c) {
    const auto inv_s = sigma.row(c).array().inverse();
    const auto inv_s2 = inv_s * inv_s;
    const auto inv_s3 = inv_s2 * inv_s;
    const auto gm_c = gm(c).transpose().array();
    const auto gs_c = gs(c).transpose().array();
    Eigen::Array<S, 1, Eigen::Dynamic> dmu(q), dsig(q);
    dmu.setZero();
    dsig.setZero();
    for (int k = 0; k < K; ++k) {
      const auto diff = (x.row(k) - params.mu.row(c)).array();
      const auto d_kc = diff * inv_s2;
      const auto e_kc = diff * diff * inv_s3 - inv_s;
      dmu += r(k, c) * d_kc - post(k, c) * (gm_c * inv_s2 + S(2) * gs_c * diff * inv_s3);
      dsig += r(k, c) * e_kc -
              post(k, c) * (S(2) * gm_c * diff * inv_s3 +
                            gs_c * (S(3) * diff * diff * inv_s2 * inv_s2 - inv_s2));
      dx.row(k).array() +=
          -r(k, c) * d_kc + post(k, c) * (gm_c * inv_s2 + S(2) * gs_c * diff * inv_s3);
    }
    params.grad_mu.row(c).array() += dmu;
    params.grad_rho.row(c).array() += dsig * sigma.row(c).array();  // chain sigma = exp(rho)
  }
  return dx;
}

}  // namespace wsc
