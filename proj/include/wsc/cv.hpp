#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/model.hpp"
#include "wsc/train.hpp"

namespace wsc {

// Everything one experiment needs; the unit the CLI, config files, sweeps
// and reports all share.
struct ExperimentConfig {
  std::string dataset;
  std::string data_dir = "data";
  std::string arch = "C(64)-P(0.25)-C(128)-P(0.0)-FC(256)";
  int max_scale = 3;   // T
  int components = 3;  // C
  int samples = 8;     // K
  TrainConfig train;
  int folds = 10;
  int repeats = 10;
  std::uint64_t seed = 1;
  std::string out_dir = "results";
  std::string attributes = "auto";  // auto | label | degree | label_and_degree
  std::string precision = "float64";

  void validate() const {
    train.validate();
    WSC_REQUIRE(folds >= 2, ConfigError, "folds must be >= 2");
    WSC_REQUIRE(repeats >= 1, ConfigError, "repeats must be >= 1");
    WSC_REQUIRE(max_scale >= 2 && components >= 1 && samples >= 1, ConfigError,
                "need T >= 2, C >= 1, K >= 1");
    WSC_REQUIRE(precision == "float32" || precision == "float64", ConfigError,
                "precision must be float32 or float64");
  }
};

struct FoldResult {
  int repeat = 0;
  int fold = 0;
  double accuracy = 0.0;
  double first_loss = 0.0;  // epoch-1 mean training loss
  double final_loss = 0.0;
  int epochs = 0;
  double seconds = 0.0;
};

struct CvSummary {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;          // population std over all repeat x fold accuracies
  double std_repeat_means = 0.0;      // population std over per-repeat mean accuracies
  std::vector<double> repeat_means;
  double mean_final_loss = 0.0;
};

struct CvOutcome {
  std::vector<FoldResult> results;
  CvSummary summary;
  std::vector<std::vector<int>> folds;
  std::vector<std::string> warnings;
  double total_seconds = 0.0;
};

namespace detail {

inline double population_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace detail

// Seeded stratified split: per class, a seeded shuffle dealt round-robin
// across folds, so per-class fold counts differ by at most one. Folds do
// not depend on the repeat index. If some training complement misses a
// class entirely, the split is warned about and redrawn.
template <typename S>
std::vector<std::vector<int>> make_stratified_folds(const Dataset<S>& data, int fold_count,
                                                    std::uint64_t seed,
                                                    std::vector<std::string>* warnings = nullptr) {
  WSC_REQUIRE(fold_count >= 2, ConfigError, "folds must be >= 2");
  WSC_REQUIRE(static_cast<int>(data.graphs.size()) >= fold_count, ConfigError,
              "dataset has fewer graphs than folds");
  for (int attempt = 0; attempt < 5; ++attempt) {
    std::vector<std::vector<int>> folds(fold_count);
    for (int cls = 0; cls < data.class_count; ++cls) {
      std::vector<int> members;
      for (int i = 0; i < static_cast<int>(data.graphs.size()); ++i)
        if (data.graphs[i].label && *data.graphs[i].label == cls) members.push_back(i);
      Rng rng = Rng::from_key(seed, {0x666f6c64ull, static_cast<std::uint64_t>(cls),
                                     static_cast<std::uint64_t>(attempt)});
      for (std::size_t i = members.size(); i > 1; --i)
        std::swap(members[i - 1], members[rng.below(static_cast<std::uint32_t>(i))]);
      for (std::size_t i = 0; i < members.size(); ++i)
        folds[i % fold_count].push_back(members[i]);
    }

    bool ok = true;
    for (int f = 0; f < fold_count && ok; ++f) {
      std::vector<int> train_classes(data.class_count, 0);
      for (int g = 0; g < fold_count; ++g) {
        if (g == f) continue;
        for (int i : folds[g]) ++train_classes[*data.graphs[i].label];
      }
      for (int cls = 0; cls < data.class_count; ++cls)
        if (train_classes[cls] == 0) ok = false;
    }
    if (ok) return folds;
    const std::string msg = "stratification attempt " + std::to_string(attempt) +
                            " left a class out of some training split; re-splitting";
    if (warnings) warnings->push_back(msg);
    std::cerr << "warning: " << msg << "\n";
  }
  throw ConfigError("cannot stratify " + data.name + " into " + std::to_string(fold_count) +
                    " folds with every class in every training split");
}

// Repeated k-fold cross-validation: folds fixed across repeats, per-repeat
// model/walk seeds varied, per-(repeat, fold) training from scratch and one
// deterministic evaluation.
template <typename S>
CvOutcome run_cross_validation(const Dataset<S>& data, const ExperimentConfig& cfg,
                               bool verbose = false) {
  cfg.validate();
  WSC_REQUIRE(!data.graphs.empty(), UsageError, "empty dataset");
  const int input_dim = data.attribute_dim();
  WSC_REQUIRE(input_dim >= 1, UsageError, "dataset attributes must be initialized");

  const auto wall_start = std::chrono::steady_clock::now();
  CvOutcome out;
  out.folds = make_stratified_folds(data, cfg.folds, cfg.seed, &out.warnings);

  const ArchitectureSpec arch = parse_architecture(cfg.arch);
  for (int r = 0; r < cfg.repeats; ++r) {
    for (int f = 0; f < cfg.folds; ++f) {
      const auto fold_start = std::chrono::steady_clock::now();
      std::vector<int> train_idx;
      for (int g = 0; g < cfg.folds; ++g)
        if (g != f) train_idx.insert(train_idx.end(), out.folds[g].begin(), out.folds[g].end());

      ModelConfig mc;
      mc.arch = arch;
      mc.max_scale = cfg.max_scale;
      mc.components = cfg.components;
      mc.samples = cfg.samples;
      mc.dropout = cfg.train.dropout;
      mc.seed = derive_seed(cfg.seed, {0x72756e00ull, static_cast<std::uint64_t>(r),
                                       static_cast<std::uint64_t>(f)});
      Model<S> model(mc, input_dim, data.class_count);

      TrainConfig tc = cfg.train;
      tc.seed = mc.seed;
      const TrainStats stats = train_model(model, data, train_idx, tc);
      const double acc = evaluate(model, data, out.folds[f]);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - fold_start).count();
      out.results.push_back({r, f, acc, stats.epoch_losses.front(), stats.epoch_losses.back(),
                             cfg.train.epochs, secs});
      if (verbose)
        std::cerr << "repeat " << r << " fold " << f << ": accuracy " << acc << ", final loss "
                  << stats.epoch_losses.back() << " (" << secs << "s)\n";
    }
  }

  std::vector<double> accs;
  double loss_sum = 0.0;
  for (const auto& fr : out.results) {
    accs.push_back(fr.accuracy);
    loss_sum += fr.final_loss;
  }
  double mean = 0.0;
  for (double a : accs) mean += a;
  mean /= static_cast<double>(accs.size());
  out.summary.mean_accuracy = mean;
  out.summary.std_accuracy = detail::population_std(accs, mean);
  for (int r = 0; r < cfg.repeats; ++r) {
    double rm = 0.0;
    for (const auto& fr : out.results)
      if (fr.repeat == r) rm += fr.accuracy;
    out.summary.repeat_means.push_back(rm / static_cast<double>(cfg.folds));
  }
  double mrm = 0.0;
  for (double v : out.summary.repeat_means) mrm += v;
  mrm /= static_cast<double>(out.summary.repeat_means.size());
  out.summary.std_repeat_means = detail::population_std(out.summary.repeat_means, mrm);
  out.summary.mean_final_loss = loss_sum / static_cast<double>(out.results.size());
  out.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return out;
}

// Attribute-mode resolution shared by the CLI and tests: explicit modes pass
// through; "auto" follows the protocol (labels plus degree when the dataset
// has node labels, plain degree otherwise).
template <typename S>
Dataset<S> prepare_attributes(const Dataset<S>& data, const std::string& mode) {
  if (mode == "auto")
    return initialize_attributes(data, data.has_node_labels() ? AttributeMode::kLabelAndDegree
                                                              : AttributeMode::kDegreeScalar);
  return initialize_attributes(data, attribute_mode_from_string(mode));
}

}  // namespace wsc
