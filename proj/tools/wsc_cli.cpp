// Command-line front end: train / cv / sweep / report.
//
// Every experiment knob is a flag; the same keys can come from a key=value
// config file (--config), with flags taking precedence over file values.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wsc/wsc.hpp"

namespace {

// Key=value config file support. Loaded before flag parsing so that any
// flag given on the command line overrides the file's value. Keys are the
// long option names without dashes prefix, e.g. `epochs=400`.
struct ConfigKeys {
  wsc::ExperimentConfig* cfg = nullptr;
  std::string* axis = nullptr;
  std::vector<double>* values = nullptr;
};

void apply_config_entry(const ConfigKeys& keys, const std::string& key, const std::string& value,
                        int line) {
  auto& cfg = *keys.cfg;
  try {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "data-dir") cfg.data_dir = value;
    else if (key == "arch") cfg.arch = value;
    else if (key == "walk-scale") cfg.max_scale = std::stoi(value);
    else if (key == "components") cfg.components = std::stoi(value);
    else if (key == "samples") cfg.samples = std::stoi(value);
    else if (key == "epochs") cfg.train.epochs = std::stoi(value);
    else if (key == "lr") cfg.train.learning_rate = std::stod(value);
    else if (key == "momentum") cfg.train.momentum = std::stod(value);
    else if (key == "batch-size") cfg.train.batch_size = std::stoi(value);
    else if (key == "dropout") cfg.train.dropout = std::stod(value);
    else if (key == "folds") cfg.folds = std::stoi(value);
    else if (key == "repeats") cfg.repeats = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "attributes") cfg.attributes = value;
    else if (key == "precision") cfg.precision = value;
    else if (key == "axis" && keys.axis) *keys.axis = value;
    else if (key == "values" && keys.values) {
      keys.values->clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) keys.values->push_back(std::stod(item));
    } else {
      throw wsc::ConfigError("config line " + std::to_string(line) + ": unknown key '" + key +
                             "'");
    }
  } catch (const std::invalid_argument&) {
    throw wsc::ConfigError("config line " + std::to_string(line) + ": bad value '" + value +
                           "' for key '" + key + "'");
  } catch (const std::out_of_range&) {
    throw wsc::ConfigError("config line " + std::to_string(line) + ": value '" + value +
                           "' out of range for key '" + key + "'");
  }
}

void load_config_file(const std::string& path, const ConfigKeys& keys) {
  std::ifstream in(path);
  if (!in) throw wsc::IoError("cannot open config file " + path);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (auto hash = s.find('#'); hash != std::string::npos) s.erase(hash);
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = s.find_last_not_of(" \t\r");
    s = s.substr(first, last - first + 1);
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw wsc::ConfigError("config line " + std::to_string(line) + ": expected key=value, got '" +
                             s + "'");
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = v.find_last_not_of(" \t");
      return v.substr(b, e - b + 1);
    };
    apply_config_entry(keys, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line);
  }
}

// Finds `--config <path>` / `--config=<path>` ahead of the real parse so the
// file's values become the defaults the flags then override.
std::string peek_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

// Registers the shared experiment flags on one subcommand, bound to cfg.
void add_experiment_options(CLI::App& cmd, wsc::ExperimentConfig& cfg, std::string& config_path) {
  cmd.add_option("--dataset", cfg.dataset, "Dataset name (TU layout directory)");
  cmd.add_option("--data-dir", cfg.data_dir, "Directory holding the dataset")
      ->capture_default_str();
  cmd.add_option("--arch", cfg.arch, "Architecture string, e.g. C(64)-P(0.25)-C(128)-P(0.0)-FC(256)")
      ->capture_default_str();
  cmd.add_option("--walk-scale", cfg.max_scale, "Largest walk scale T (fields cover 2..T)")
      ->capture_default_str();
  cmd.add_option("--components", cfg.components, "Gaussian components C per scale")
      ->capture_default_str();
  cmd.add_option("--samples", cfg.samples, "Walks K sampled per vertex and scale")
      ->capture_default_str();
  cmd.add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str();
  cmd.add_option("--lr", cfg.train.learning_rate, "SGD learning rate")->capture_default_str();
  cmd.add_option("--momentum", cfg.train.momentum, "SGD momentum")->capture_default_str();
  cmd.add_option("--batch-size", cfg.train.batch_size, "Graphs per optimizer step")
      ->capture_default_str();
  cmd.add_option("--dropout", cfg.train.dropout, "Dropout rate after the FC layer")
      ->capture_default_str();
  cmd.add_option("--folds", cfg.folds, "Cross-validation folds")->capture_default_str();
  cmd.add_option("--repeats", cfg.repeats, "Cross-validation repeats")->capture_default_str();
  cmd.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  cmd.add_option("--out", cfg.out_dir, "Output directory for reports")->capture_default_str();
  cmd.add_option("--attributes", cfg.attributes,
                 "Vertex attributes: auto, label, degree or label_and_degree")
      ->capture_default_str();
  cmd.add_option("--precision", cfg.precision, "Numeric precision: float32 or float64")
      ->capture_default_str();
  cmd.add_option("--config", config_path, "Key=value config file; flags override file values");
}

template <typename S>
wsc::Dataset<S> load_prepared(const wsc::ExperimentConfig& cfg) {
  auto data = wsc::load_tu_dataset<S>(cfg.data_dir, cfg.dataset);
  return wsc::prepare_attributes(data, cfg.attributes);
}

template <typename S>
int run_train(const wsc::ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = load_prepared<S>(cfg);
  wsc::ModelConfig mc;
  mc.arch = wsc::parse_architecture(cfg.arch);
  mc.max_scale = cfg.max_scale;
  mc.components = cfg.components;
  mc.samples = cfg.samples;
  mc.dropout = cfg.train.dropout;
  mc.seed = cfg.seed;
  wsc::Model<S> model(mc, data.attribute_dim(), data.class_count);

  std::vector<int> all(data.graphs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  wsc::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const wsc::TrainStats stats = wsc::train_model(model, data, all, tc);
  const double train_acc = wsc::evaluate(model, data, all);

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw wsc::IoError("cannot create output directory " + cfg.out_dir);
  const std::string ckpt = (std::filesystem::path(cfg.out_dir) / "model.ckpt").string();
  wsc::save_checkpoint(ckpt, wsc::fnv1a(wsc::config_to_json(cfg).dump()),
                       model.registry().views());

  std::cout << "dataset            " << data.name << " (" << data.graphs.size() << " graphs, "
            << data.class_count << " classes)\n"
            << "epoch 1 mean loss  " << stats.epoch_losses.front() << "\n"
            << "final mean loss    " << stats.epoch_losses.back() << "\n"
            << "training accuracy  " << train_acc << "\n"
            << "checkpoint         " << ckpt << "\n";
  return 0;
}

template <typename S>
int run_cv(const wsc::ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = load_prepared<S>(cfg);
  const wsc::CvOutcome outcome = wsc::run_cross_validation(data, cfg, /*verbose=*/true);
  wsc::emit_report(cfg, outcome, cfg.out_dir);
  std::cout << "mean accuracy      " << outcome.summary.mean_accuracy << "\n"
            << "std (all folds)    " << outcome.summary.std_accuracy << "\n"
            << "std (repeat means) " << outcome.summary.std_repeat_means << "\n"
            << "mean final loss    " << outcome.summary.mean_final_loss << "\n"
            << "total seconds      " << outcome.total_seconds << "\n"
            << "report             " << (std::filesystem::path(cfg.out_dir) / "summary.json").string()
            << "\n";
  return 0;
}

template <typename S>
int run_sweep_cmd(const wsc::ExperimentConfig& cfg, const std::string& axis,
                  const std::vector<double>& values) {
  cfg.validate();
  const auto data = load_prepared<S>(cfg);
  const auto rows = wsc::run_sweep(data, cfg, axis, values, /*verbose=*/true);
  wsc::emit_sweep(rows, cfg.out_dir);
  for (const auto& row : rows) {
    std::cout << row.label << ": ";
    if (row.skipped)
      std::cout << "skipped (" << row.skip_reason << ")\n";
    else
      std::cout << row.summary.mean_accuracy << " +- " << row.summary.std_accuracy << "\n";
  }
  std::cout << "report             "
            << (std::filesystem::path(cfg.out_dir) / ("sweep_" + axis + ".csv")).string() << "\n";
  return 0;
}

int run_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw wsc::IoError("cannot open " + path);
  nlohmann::json j;
  in >> j;
  const auto& agg = j.at("aggregate");
  std::cout << "config hash        " << j.at("config_hash").get<std::string>() << "\n"
            << "dataset            " << j.at("config").at("dataset").get<std::string>() << "\n"
            << "arch               " << j.at("config").at("arch").get<std::string>() << "\n"
            << "fold results       " << j.at("results").size() << "\n"
            << "mean accuracy      " << agg.at("mean_accuracy").get<double>() << "\n"
            << "std (all folds)    " << agg.at("std_accuracy_all_folds").get<double>() << "\n"
            << "std (repeat means) " << agg.at("std_accuracy_repeat_means").get<double>() << "\n"
            << "mean final loss    " << agg.at("mean_final_loss").get<double>() << "\n";
  for (const auto& w : j.value("warnings", nlohmann::json::array()))
    std::cout << "warning            " << w.get<std::string>() << "\n";
  return 0;
}

template <typename Fn32, typename Fn64>
int dispatch_precision(const std::string& precision, Fn32&& f32, Fn64&& f64) {
  if (precision == "float32") return f32();
  if (precision == "float64") return f64();
  throw wsc::ConfigError("precision must be float32 or float64, got '" + precision + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Walk-steered graph classification"};
  app.require_subcommand(1);

  wsc::ExperimentConfig cfg;
  std::string axis = "K";
  std::vector<double> values;
  std::string report_path;
  std::string config_path;

  try {
    const std::string pre = peek_config_path(argc, argv);
    if (!pre.empty()) load_config_file(pre, {&cfg, &axis, &values});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App* train = app.add_subcommand("train", "Train one model on the full dataset");
  add_experiment_options(*train, cfg, config_path);

  CLI::App* cv = app.add_subcommand("cv", "Repeated stratified k-fold cross-validation");
  add_experiment_options(*cv, cfg, config_path);

  CLI::App* sweep = app.add_subcommand("sweep", "Cross-validate along one parameter axis");
  add_experiment_options(*sweep, cfg, config_path);
  sweep->add_option("--axis", axis, "Sweep axis: T, C, K or N")->capture_default_str();
  sweep->add_option("--values", values, "Axis values, comma separated")->delimiter(',');

  CLI::App* report = app.add_subcommand("report", "Print a digest of an emitted summary.json");
  report->add_option("--out", cfg.out_dir, "Directory holding summary.json")
      ->capture_default_str();
  report->add_option("--file", report_path, "Explicit path to a summary.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!report->parsed()) {
      if (cfg.dataset.empty())
        throw wsc::ConfigError("no dataset given; set --dataset or dataset= in a config file");
      if (sweep->parsed() && values.empty())
        throw wsc::ConfigError("no sweep values given; set --values or values= in a config file");
    }
    if (train->parsed())
      return dispatch_precision(
          cfg.precision, [&] { return run_train<float>(cfg); },
          [&] { return run_train<double>(cfg); });
    if (cv->parsed())
      return dispatch_precision(
          cfg.precision, [&] { return run_cv<float>(cfg); },
          [&] { return run_cv<double>(cfg); });
    if (sweep->parsed())
      return dispatch_precision(
          cfg.precision, [&] { return run_sweep_cmd<float>(cfg, axis, values); },
          [&] { return run_sweep_cmd<double>(cfg, axis, values); });
    if (report->parsed()) {
      if (report_path.empty())
        report_path = (std::filesystem::path(cfg.out_dir) / "summary.json").string();
      return run_report(report_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
