#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "json.hpp"
#include "wsc/cv.hpp"
#include "wsc/error.hpp"
#include "wsc/nn.hpp"

namespace wsc {

using ordered_json = nlohmann::ordered_json;

inline ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["dataset"] = cfg.dataset;
  j["data_dir"] = cfg.data_dir;
  j["arch"] = cfg.arch;
  j["walk_scale"] = cfg.max_scale;
  j["components"] = cfg.components;
  j["samples"] = cfg.samples;
  j["epochs"] = cfg.train.epochs;
  j["lr"] = cfg.train.learning_rate;
  j["momentum"] = cfg.train.momentum;
  j["batch_size"] = cfg.train.batch_size;
  j["dropout"] = cfg.train.dropout;
  j["folds"] = cfg.folds;
  j["repeats"] = cfg.repeats;
  j["seed"] = cfg.seed;
  j["attributes"] = cfg.attributes;
  j["precision"] = cfg.precision;
  return j;
}

inline std::string config_hash_hex(const ExperimentConfig& cfg) {
  std::ostringstream hex;
  hex << "0x" << std::hex << std::setfill('0') << std::setw(16)
      << fnv1a(config_to_json(cfg).dump());
  return hex.str();
}

inline ordered_json summary_to_json(const ExperimentConfig& cfg, const CvOutcome& outcome) {
  WSC_REQUIRE(!outcome.results.empty(), UsageError, "refusing to report empty results");
  ordered_json j;
  j["config"] = config_to_json(cfg);
  j["config_hash"] = config_hash_hex(cfg);
  j["results"] = ordered_json::array();
  for (const auto& fr : outcome.results) {
    ordered_json row;
    row["repeat"] = fr.repeat;
    row["fold"] = fr.fold;
    row["accuracy"] = fr.accuracy;
    row["first_loss"] = fr.first_loss;
    row["final_loss"] = fr.final_loss;
    row["epochs"] = fr.epochs;
    j["results"].push_back(row);
  }
  j["aggregate"]["mean_accuracy"] = outcome.summary.mean_accuracy;
  j["aggregate"]["std_accuracy_all_folds"] = outcome.summary.std_accuracy;
  j["aggregate"]["std_accuracy_repeat_means"] = outcome.summary.std_repeat_means;
  j["aggregate"]["repeat_means"] = outcome.summary.repeat_means;
  j["aggregate"]["mean_final_loss"] = outcome.summary.mean_final_loss;
  j["warnings"] = outcome.warnings;
  // Wall-clock data lives only under "timing" so everything else is
  // byte-stable across replays of the same seed and config.
  auto& timing = j["timing"];
  const std::time_t now = std::time(nullptr);
  std::ostringstream stamp;
  stamp << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  timing["written_at"] = stamp.str();
  timing["total_seconds"] = outcome.total_seconds;
  timing["fold_seconds"] = ordered_json::array();
  for (const auto& fr : outcome.results) timing["fold_seconds"].push_back(fr.seconds);
  return j;
}

// Writes summary.json and summary.csv under out_dir.
inline void emit_report(const ExperimentConfig& cfg, const CvOutcome& outcome,
                        const std::filesystem::path& out_dir) {
  WSC_REQUIRE(!outcome.results.empty(), UsageError, "refusing to report empty results");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string());

  {
    std::ofstream out(out_dir / "summary.json");
    if (!out) throw IoError("cannot write " + (out_dir / "summary.json").string());
    out << summary_to_json(cfg, outcome).dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir / "summary.csv");
    if (!out) throw IoError("cannot write " + (out_dir / "summary.csv").string());
    out << "repeat,fold,accuracy,final_loss,epochs,seconds\n";
    out << std::setprecision(17);
    for (const auto& fr : outcome.results)
      out << fr.repeat << ',' << fr.fold << ',' << fr.accuracy << ',' << fr.final_loss << ','
          << fr.epochs << ',' << fr.seconds << "\n";
  }
}

}  // namespace wsc
