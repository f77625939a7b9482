#pragma once

#include <cstdint>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/model.hpp"
#include "wsc/nn.hpp"
#include "wsc/rng.hpp"

namespace wsc {

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.95;
  int epochs = 400;
  int batch_size = 100;
  double dropout = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    WSC_REQUIRE(learning_rate > 0.0, ConfigError, "learning rate must be > 0");
    WSC_REQUIRE(dropout >= 0.0 && dropout < 1.0, ConfigError, "dropout must be in [0,1)");
    WSC_REQUIRE(epochs >= 1 && batch_size >= 1, ConfigError,
                "epochs and batch size must be >= 1");
  }
};

// Training epochs use walk nonces 1..epochs; evaluation draws its own fixed
// nonces from a disjoint range. Predictions average the logits of several
// walk realizations: a single draw leaves borderline graphs at the mercy of
// sampling luck, and the average is just as deterministic.
inline constexpr std::uint64_t kEvalNonce = std::uint64_t(1) << 32;
inline constexpr int kEvalSamples = 8;

struct TrainStats {
  std::vector<double> epoch_losses;  // mean NLL over the training set
};

// Minibatch SGD over graphs: per epoch, a seeded shuffle of the training
// indices, one optimizer step per batch of graphs (variable-size graphs are
// run one by one and their logits stacked; no padding). Walk fields are
// resampled every epoch through the epoch nonce.
template <typename S>
TrainStats train_model(Model<S>& model, const Dataset<S>& data, const std::vector<int>& train_idx,
                       const TrainConfig& cfg) {
  cfg.validate();
  WSC_REQUIRE(!train_idx.empty(), UsageError, "empty training set");
  Sgd<S> opt(static_cast<S>(cfg.learning_rate), static_cast<S>(cfg.momentum));

  TrainStats stats;
  std::vector<int> order(train_idx);
  std::vector<ModelCache<S>> caches;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::from_key(cfg.seed, {0x73687566ull, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(static_cast<std::uint32_t>(i))]);

    double epoch_nll = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const int n = static_cast<int>(end - start);
      caches.assign(n, ModelCache<S>{});
      RowMat<S> logits(n, model.class_count());
      std::vector<int> labels(n);
      for (int b = 0; b < n; ++b) {
        const int gi = order[start + b];
        const Graph<S>& g = data.graphs[gi];
        WSC_REQUIRE(g.label.has_value(), UsageError, "training graph ", gi, " has no label");
        labels[b] = *g.label;
        logits.row(b) = model.forward(g, static_cast<std::uint64_t>(gi), true,
                                      static_cast<std::uint64_t>(epoch), caches[b])
                            .transpose();
      }
      const auto ce = softmax_cross_entropy(logits, labels);
      for (int b = 0; b < n; ++b) model.backward(caches[b], Vec<S>(ce.grad.row(b).transpose()));
      opt.step(model.registry().views());
      epoch_nll += static_cast<double>(ce.loss) * n;
    }
    stats.epoch_losses.push_back(epoch_nll / static_cast<double>(order.size()));
  }
  return stats;
}

// Deterministic evaluation: pinned walk nonces, no dropout; prediction is
// the arg-max of logits summed over kEvalSamples walk realizations (lowest
// index on ties).
template <typename S>
double evaluate(Model<S>& model, const Dataset<S>& data, const std::vector<int>& idx) {
  WSC_REQUIRE(!idx.empty(), UsageError, "empty evaluation set");
  int correct = 0;
  ModelCache<S> cache;
  for (int gi : idx) {
    const Graph<S>& g = data.graphs[gi];
    WSC_REQUIRE(g.label.has_value(), UsageError, "evaluation graph ", gi, " has no label");
    Vec<S> logits = Vec<S>::Zero(model.class_count());
    for (int j = 0; j < kEvalSamples; ++j)
      logits += model.forward(g, static_cast<std::uint64_t>(gi), false,
                              kEvalNonce + static_cast<std::uint64_t>(j), cache);
    int pred = 0;
    for (int c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[pred]) pred = c;
    if (pred == *g.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace wsc
