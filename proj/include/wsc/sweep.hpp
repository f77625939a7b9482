#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsc/cv.hpp"
#include "wsc/error.hpp"
#include "wsc/model.hpp"
#include "wsc/report.hpp"

namespace wsc {

struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::string label;  // e.g. "T=5" or "N=7"
  bool skipped = false;
  std::string skip_reason;
  ExperimentConfig config;
  CvSummary summary;
};

// The layer-count ablation compares fixed named networks.
inline std::string arch_for_layer_count(int n) {
  switch (n) {
    case 1: return "FC(256)";
    case 3: return "C(64)-P(0.0)-FC(256)";
    case 5: return "C(64)-P(0.25)-C(128)-P(0.0)-FC(256)";
    case 7: return "C(64)-P(0.25)-C(128)-P(0.25)-C(256)-P(0.0)-FC(256)";
    default:
      throw ConfigError("N sweep supports layer counts {1,3,5,7}, got " + std::to_string(n));
  }
}

// Average-size bookkeeping: walking the architecture over the dataset's
// mean vertex count, every convolution needs at least 2 vertices left.
// Deep nets on tiny graphs are reported as skipped, not run.
template <typename S>
std::string depth_skip_reason(const ArchitectureSpec& arch, const Dataset<S>& data) {
  double m = 0.0;
  for (const auto& g : data.graphs) m += g.vertex_count;
  m /= static_cast<double>(data.graphs.size());
  for (const auto& layer : arch.layers) {
    if (layer.kind == LayerDesc::Kind::kConv && m < 2.0)
      return "average graph size " + std::to_string(m) +
             " leaves fewer than 2 vertices for a convolution at this depth";
    if (layer.kind == LayerDesc::Kind::kPool)
      m = static_cast<double>(coarse_size(layer.ratio, static_cast<int>(std::lround(m))));
  }
  return {};
}

// One cross-validation per axis value. Axis T moves the walk-field scale,
// C the Gaussian components, K the walks per field, N swaps whole
// architectures. Invalid depth/size combinations become skipped rows.
template <typename S>
std::vector<SweepRow> run_sweep(const Dataset<S>& data, const ExperimentConfig& base,
                                const std::string& axis, const std::vector<double>& values,
                                bool verbose = false) {
  WSC_REQUIRE(axis == "T" || axis == "C" || axis == "K" || axis == "N", ConfigError,
              "sweep axis must be one of T, C, K, N; got '", axis, "'");
  WSC_REQUIRE(!values.empty(), ConfigError, "sweep needs at least one value");

  std::vector<SweepRow> rows;
  for (double value : values) {
    SweepRow row;
    row.axis = axis;
    row.value = value;
    row.config = base;
    const int iv = static_cast<int>(std::lround(value));
    WSC_REQUIRE(static_cast<double>(iv) == value, ConfigError, "sweep value ", value,
                " must be an integer for axis ", axis);
    if (axis == "T") {
      row.config.max_scale = iv;
    } else if (axis == "C") {
      row.config.components = iv;
    } else if (axis == "K") {
      row.config.samples = iv;
    } else {
      row.config.arch = arch_for_layer_count(iv);
    }
    row.label = axis + "=" + std::to_string(iv);

    const ArchitectureSpec arch = parse_architecture(row.config.arch);
    row.skip_reason = depth_skip_reason(arch, data);
    row.skipped = !row.skip_reason.empty();
    if (!row.skipped) {
      if (verbose) std::cerr << "sweep " << row.label << "\n";
      row.summary = run_cross_validation(data, row.config, verbose).summary;
    } else if (verbose) {
      std::cerr << "sweep " << row.label << " skipped: " << row.skip_reason << "\n";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Emits sweep_<axis>.csv and sweep_<axis>.json (plot-ready rows).
inline void emit_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir) {
  WSC_REQUIRE(!rows.empty(), UsageError, "refusing to report an empty sweep");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string());
  const std::string axis = rows.front().axis;

  {
    std::ofstream out(out_dir / ("sweep_" + axis + ".csv"));
    if (!out) throw IoError("cannot write sweep CSV under " + out_dir.string());
    out << "axis,value,mean_accuracy,std_accuracy,skipped,reason\n";
    out << std::setprecision(17);
    for (const auto& row : rows) {
      out << row.axis << ',' << row.value << ',';
      if (row.skipped)
        out << ",,1," << row.skip_reason;
      else
        out << row.summary.mean_accuracy << ',' << row.summary.std_accuracy << ",0,";
      out << "\n";
    }
  }
  {
    ordered_json j = ordered_json::array();
    for (const auto& row : rows) {
      ordered_json r;
      r["axis"] = row.axis;
      r["value"] = row.value;
      r["label"] = row.label;
      r["skipped"] = row.skipped;
      if (row.skipped) {
        r["reason"] = row.skip_reason;
      } else {
        r["mean_accuracy"] = row.summary.mean_accuracy;
        r["std_accuracy_all_folds"] = row.summary.std_accuracy;
        r["std_accuracy_repeat_means"] = row.summary.std_repeat_means;
      }
      r["arch"] = row.config.arch;
      j.push_back(r);
    }
    std::ofstream out(out_dir / ("sweep_" + axis + ".json"));
    if (!out) throw IoError("cannot write sweep JSON under " + out_dir.string());
    out << j.dump(2) << "\n";
  }
}

}  // namespace wsc
