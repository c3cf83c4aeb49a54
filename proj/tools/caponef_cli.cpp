// caponef: dataset generation, feature extraction, statistics, training and
// explanation from the command line. See README.md for usage.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "caponef/classify.hpp"
#include "caponef/dataset.hpp"
#include "caponef/error.hpp"
#include "caponef/experiment.hpp"
#include "caponef/explain.hpp"
#include "caponef/io.hpp"
#include "caponef/model_io.hpp"
#include "caponef/signal_pipeline.hpp"
#include "caponef/stats.hpp"

namespace fs = std::filesystem;
using namespace caponef;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitEmpty = 3;
constexpr int kExitConfig = 4;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyDataset:
    case ErrorKind::kEmptyInput:
      return kExitEmpty;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kRowOutOfRange:
    case ErrorKind::kTooFewSamples:
      return kExitConfig;
    case ErrorKind::kIoError:
    case ErrorKind::kParseError:
    case ErrorKind::kSyncNotFound:
    case ErrorKind::kNonFiniteInput:
    case ErrorKind::kSingleClass:
    case ErrorKind::kNotBinary:
    case ErrorKind::kLengthMismatch:
    case ErrorKind::kInsufficientSamples:
    case ErrorKind::kUntrainedModel:
      return kExitInput;
    default:
      return kExitInternal;
  }
}

struct Common {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool no_timestamp = false;
};

void write_run_info(const Common& c, const std::string& command) {
  std::string text = "command," + command + "\nseed," + std::to_string(c.seed) + "\n";
  if (!c.no_timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    text += std::string("timestamp,") + buf + "\n";
  }
  io::write_file_atomic(fs::path(c.out_dir) / "run_info.txt", text);
}

/// "2,8,9" -> {"P2", "P8", "P9"}; names are accepted too.
std::vector<std::string> parse_feature_mask(const std::string& mask, const LabeledFeatureSet& set) {
  std::vector<std::string> names;
  for (auto tok : io::split(mask, ',')) {
    if (tok.empty()) fail(ErrorKind::kInvalidArgument, "empty entry in --features");
    std::string name(tok);
    if (std::all_of(name.begin(), name.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      const auto k = io::parse_integer(name);
      if (k < 1 || static_cast<std::size_t>(k) > set.features()) {
        fail(ErrorKind::kInvalidArgument, "--features index " + name + " outside 1.." + std::to_string(set.features()));
      }
      name = set.feature_names()[static_cast<std::size_t>(k - 1)];
    }
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      fail(ErrorKind::kInvalidArgument, "duplicate feature " + name);
    }
    names.push_back(name);
  }
  if (names.empty()) fail(ErrorKind::kInvalidArgument, "--features is empty");
  return names;
}

std::optional<std::size_t> parse_depth(const std::string& text) {
  if (text.empty() || text == "unlimited") return std::nullopt;
  const auto v = io::parse_integer(text);
  if (v < 0) fail(ErrorKind::kInvalidArgument, "--max-depth must be >= 0");
  return static_cast<std::size_t>(v);
}

std::string depth_text(const std::optional<std::size_t>& d) { return d ? std::to_string(*d) : "unlimited"; }

// ---------------------------------------------------------------------------

struct GenOptions {
  std::size_t frames = 15000;
  std::size_t devices = 2;
  double snr_db = 20.0;
  std::size_t frame_len = kDefaultFrameLength;
};

int cmd_gen_dataset(const Common& c, const GenOptions& o) {
  const auto devices = experiment::builtin_devices(o.devices, o.snr_db);
  const auto etalon = make_transnoise_etalon(o.frame_len);
  const fs::path dir(c.out_dir);
  experiment::CaptureConfig capture;
  capture.frames = o.frames;
  io::write_iq_file(dir / "etalon.iq", etalon.samples());
  std::string manifest = "label,profile,frames,iq_file\n";
  for (std::size_t d = 0; d < devices.size(); ++d) {
    const auto stream = experiment::simulate_capture(etalon, devices[d], capture, derive_seed(c.seed, d));
    const std::string file = "device_" + std::to_string(devices[d].label) + ".iq";
    io::write_iq_file(dir / file, stream);
    manifest += std::to_string(devices[d].label) + "," + devices[d].name + "," + std::to_string(o.frames) + "," +
                file + "\n";
  }
  io::write_file_atomic(dir / "manifest.csv", manifest);
  write_run_info(c, "gen-dataset");
  return kExitOk;
}

struct ManifestEntry {
  int label = 0;
  std::string iq_file;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const auto text = io::read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "label,profile,frames,iq_file") {
    fail(ErrorKind::kParseError, path.string() + ": bad manifest header");
  }
  std::vector<ManifestEntry> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = io::split(line, ',');
    if (cols.size() != 4) fail(ErrorKind::kParseError, path.string() + ":" + std::to_string(lineno));
    out.push_back({static_cast<int>(io::parse_integer(cols[0])), std::string(cols[3])});
  }
  if (out.empty()) fail(ErrorKind::kEmptyInput, path.string() + ": no devices");
  return out;
}

int cmd_extract(const Common& c, const std::string& input, const std::string& etalon_path, std::size_t frame_len) {
  const fs::path manifest_path(input);
  const auto entries = read_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  const fs::path etalon_file = etalon_path.empty() ? base / "etalon.iq" : fs::path(etalon_path);
  const EtalonSignal etalon(io::read_etalon_file(etalon_file, frame_len));
  LabeledFeatureSet set;
  for (const auto& e : entries) {
    const fs::path iq = fs::path(e.iq_file).is_absolute() ? fs::path(e.iq_file) : base / e.iq_file;
    const auto stream = io::read_iq_file(iq);
    const auto report = experiment::extract_stream(stream, etalon, e.label, set);
    std::cerr << "label " << e.label << ": " << report.frames << " frames, " << report.extracted << " extracted, "
              << report.skipped << " skipped\n";
  }
  if (set.empty()) {
    std::cerr << "error: no frame produced a feature row\n";
    return kExitEmpty;
  }
  io::write_file_atomic(fs::path(c.out_dir) / "features.csv", io::format_feature_csv(set));
  write_run_info(c, "extract");
  return kExitOk;
}

int cmd_stats(const Common& c, const std::string& input, std::size_t bins) {
  const auto set = io::read_feature_csv(input);
  if (set.empty()) fail(ErrorKind::kEmptyDataset, input);
  const fs::path dir(c.out_dir);
  io::write_file_atomic(dir / "significance.csv", stats::format_significance_csv(stats::significance_report(set)));
  io::write_file_atomic(dir / "pearson.csv", stats::format_correlation_csv(stats::pearson_matrix(set)));
  for (std::size_t f = 0; f < set.features(); ++f) {
    const auto col = set.column(f);
    io::write_file_atomic(dir / ("hist_" + set.feature_names()[f] + ".csv"),
                          stats::format_histogram_csv(stats::histogram(col, bins)));
  }
  write_run_info(c, "stats");
  return kExitOk;
}

struct TrainOptions {
  std::string input;
  std::size_t folds = 4;
  std::string classifiers = "random_forest,decision_tree,majority";
  std::size_t trees = 100;
  std::string max_depth = "unlimited";
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = 0;  // 0: ceil(sqrt(F))
  std::string features;
  bool search = false;
  std::size_t iterations = 40;
  std::size_t knn_k = 5;
};

std::string format_search_csv(const classify::SearchResult& s) {
  std::string out = "candidate,n_trees,max_depth,min_samples_split,features_per_split,mean_accuracy,best\n";
  for (std::size_t i = 0; i < s.candidates.size(); ++i) {
    const auto& p = s.candidates[i];
    out += std::to_string(i) + "," + std::to_string(p.n_trees) + "," + depth_text(p.max_depth) + "," +
           std::to_string(p.min_samples_split) + "," + std::to_string(p.features_per_split.value_or(0)) + "," +
           io::format_double(s.results[i].mean_accuracy) + "," + (i == s.best ? "1" : "0") + "\n";
  }
  return out;
}

int cmd_train_eval(const Common& c, const TrainOptions& o) {
  auto set = io::read_feature_csv(o.input);
  if (set.empty()) fail(ErrorKind::kEmptyDataset, o.input);
  if (!o.features.empty()) {
    const auto names = parse_feature_mask(o.features, set);
    set = set.select_features(set.column_indices(names));
  }
  std::vector<classify::ClassifierKind> kinds;
  for (auto tok : io::split(o.classifiers, ',')) {
    const auto k = classify::parse_classifier(tok);
    if (!k) fail(ErrorKind::kInvalidArgument, "unknown classifier '" + std::string(tok) + "'");
    if (std::find(kinds.begin(), kinds.end(), *k) == kinds.end()) kinds.push_back(*k);
  }
  if (o.trees == 0) fail(ErrorKind::kInvalidArgument, "--trees must be >= 1");
  if (o.min_samples_split < 2) fail(ErrorKind::kInvalidArgument, "--min-samples-split must be >= 2");
  if (o.features_per_split > set.features()) fail(ErrorKind::kInvalidArgument, "--features-per-split exceeds F");

  classify::ModelSpec base;
  base.forest.n_trees = o.trees;
  base.forest.max_depth = parse_depth(o.max_depth);
  base.forest.min_samples_split = o.min_samples_split;
  if (o.features_per_split > 0) base.forest.features_per_split = o.features_per_split;
  base.tree.max_depth = base.forest.max_depth;
  base.tree.min_samples_split = o.min_samples_split;
  base.knn_k = o.knn_k;

  const fs::path dir(c.out_dir);
  std::optional<classify::SearchResult> search;
  if (o.search) {
    classify::HyperparamGrid grid;
    grid.iterations = o.iterations;
    grid.features_per_split.erase(
        std::remove_if(grid.features_per_split.begin(), grid.features_per_split.end(),
                       [&](std::size_t m) { return m > set.features(); }),
        grid.features_per_split.end());
    if (grid.features_per_split.empty()) grid.features_per_split = {set.features()};
    search = classify::random_grid_search(set, grid, o.folds, c.seed);
    base.forest = search->best_params();
    io::write_file_atomic(dir / "search.csv", format_search_csv(*search));
  }

  std::string metrics = "classifier,fold,accuracy\n";
  std::string confusion = "classifier,true_label,predicted_label,count\n";
  for (auto kind : kinds) {
    classify::ModelSpec spec = base;
    spec.kind = kind;
    const auto name = std::string(classify::classifier_name(kind));
    const auto res = (kind == classify::ClassifierKind::kRandomForest && search)
                         ? search->best_result()
                         : classify::evaluate(set, spec, o.folds, c.seed);
    for (std::size_t f = 0; f < res.fold_accuracies.size(); ++f) {
      metrics += name + "," + std::to_string(f) + "," + io::format_double(res.fold_accuracies[f]) + "\n";
    }
    metrics += name + ",mean," + io::format_double(res.mean_accuracy) + "\n";
    for (std::size_t t = 0; t < res.classes.size(); ++t) {
      for (std::size_t p = 0; p < res.classes.size(); ++p) {
        confusion += name + "," + std::to_string(res.classes[t]) + "," + std::to_string(res.classes[p]) + "," +
                     std::to_string(res.confusion_at(t, p)) + "\n";
      }
    }
    std::cout << name << " mean accuracy " << io::format_double(res.mean_accuracy) << "\n";
  }
  io::write_file_atomic(dir / "metrics.csv", metrics);
  io::write_file_atomic(dir / "confusion.csv", confusion);

  // Final forest on all rows, for explanation and importances.
  if (std::find(kinds.begin(), kinds.end(), classify::ClassifierKind::kRandomForest) != kinds.end()) {
    const auto model = classify::train_forest(set, base.forest, c.seed);
    io::write_file_atomic(dir / "model.txt", classify::serialize_forest(model));
    const auto& imp = model.feature_importances();
    std::vector<std::size_t> order(imp.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
    std::string text = "feature,importance\n";
    for (auto i : order) text += set.feature_names()[i] + "," + io::format_double(imp[i]) + "\n";
    io::write_file_atomic(dir / "importances.csv", text);
  }
  write_run_info(c, "train-eval");
  return kExitOk;
}

struct ExplainOptions {
  std::string model;
  std::string input;
  long long row = -1;
  std::size_t perturbations = 5000;
  double kernel_width = 0.0;  // 0: default
};

int cmd_explain(const Common& c, const ExplainOptions& o) {
  const auto model = classify::parse_forest(io::read_text_file(o.model));
  const auto full = io::read_feature_csv(o.input);
  if (full.empty()) fail(ErrorKind::kEmptyDataset, o.input);
  if (o.row < 0 || static_cast<std::size_t>(o.row) >= full.rows()) {
    fail(ErrorKind::kRowOutOfRange, "row " + std::to_string(o.row) + " of " + std::to_string(full.rows()));
  }
  const auto set = full.select_features(full.column_indices(model.feature_names()));
  explain::ExplainConfig config;
  config.n_perturbations = o.perturbations;
  if (o.kernel_width != 0.0) config.kernel_width = o.kernel_width;
  config.seed = c.seed;
  const auto stats = explain::TrainingStats::from(set);
  const auto e = explain::explain_instance(model, set.row(static_cast<std::size_t>(o.row)), config, stats,
                                           set.feature_names());
  const fs::path dir(c.out_dir);
  io::write_file_atomic(dir / "explanation.csv", explain::format_explanation_csv(e));
  io::write_file_atomic(dir / "explanation_summary.csv", explain::format_explanation_summary(e));
  write_run_info(c, "explain");
  return kExitOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  sub->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  sub->add_flag("--no-timestamp", c.no_timestamp, "Omit the timestamp from run_info.txt");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAPoNeF radiometric identification toolkit"};
  app.require_subcommand(1);
  Common common;

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "Simulate device captures of the trans-noise etalon");
  add_common(gen_cmd, common);
  gen_cmd->add_option("--frames", gen.frames, "Frames per device")->capture_default_str();
  gen_cmd->add_option("--devices", gen.devices, "Number of built-in devices (2-4)")->capture_default_str();
  gen_cmd->add_option("--snr-db", gen.snr_db, "Receiver SNR in dB")->capture_default_str();
  gen_cmd->add_option("--frame-len", gen.frame_len, "Etalon length L")->capture_default_str();

  std::string ex_input;
  std::string ex_etalon;
  std::size_t ex_len = kDefaultFrameLength;
  auto* ex_cmd = app.add_subcommand("extract", "Synchronize captures and write P1..P10 per frame");
  add_common(ex_cmd, common);
  ex_cmd->add_option("--input", ex_input, "Manifest CSV")->required();
  ex_cmd->add_option("--etalon", ex_etalon, "Etalon IQ file (default: etalon.iq beside the manifest)");
  ex_cmd->add_option("--frame-len", ex_len, "Etalon length L")->capture_default_str();

  std::string st_input;
  std::size_t st_bins = 50;
  auto* st_cmd = app.add_subcommand("stats", "Significance, correlation and histogram reports");
  add_common(st_cmd, common);
  st_cmd->add_option("--input", st_input, "Feature CSV")->required();
  st_cmd->add_option("--bins", st_bins, "Histogram bins")->capture_default_str();

  TrainOptions tr;
  auto* tr_cmd = app.add_subcommand("train-eval", "Cross-validate classifiers and save a forest model");
  add_common(tr_cmd, common);
  tr_cmd->add_option("--input", tr.input, "Feature CSV")->required();
  tr_cmd->add_option("--folds", tr.folds, "Cross-validation folds")->capture_default_str();
  tr_cmd->add_option("--classifiers", tr.classifiers,
                     "Comma list of random_forest, decision_tree, knn, logistic, majority")
      ->capture_default_str();
  tr_cmd->add_option("--trees", tr.trees, "Forest size")->capture_default_str();
  tr_cmd->add_option("--max-depth", tr.max_depth, "Maximum tree depth or 'unlimited'")->capture_default_str();
  tr_cmd->add_option("--min-samples-split", tr.min_samples_split, "Smallest node that may split")
      ->capture_default_str();
  tr_cmd->add_option("--features-per-split", tr.features_per_split, "Features tried per split (0: ceil(sqrt(F)))")
      ->capture_default_str();
  tr_cmd->add_option("--features", tr.features, "Feature subset, e.g. 2,8,9");
  tr_cmd->add_flag("--search", tr.search, "Random hyperparameter search for the forest");
  tr_cmd->add_option("--iterations", tr.iterations, "Search iterations")->capture_default_str();
  tr_cmd->add_option("--knn-k", tr.knn_k, "Neighbours for knn")->capture_default_str();

  ExplainOptions xo;
  auto* xp_cmd = app.add_subcommand("explain", "Local surrogate explanation of one prediction");
  add_common(xp_cmd, common);
  xp_cmd->add_option("--model", xo.model, "Model file from train-eval")->required();
  xp_cmd->add_option("--input", xo.input, "Feature CSV")->required();
  xp_cmd->add_option("--row", xo.row, "0-based row index")->required();
  xp_cmd->add_option("--perturbations", xo.perturbations, "Perturbed samples")->capture_default_str();
  xp_cmd->add_option("--kernel-width", xo.kernel_width, "Kernel width (0: 0.75*sqrt(F))");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen_dataset(common, gen);
    if (*ex_cmd) return cmd_extract(common, ex_input, ex_etalon, ex_len);
    if (*st_cmd) return cmd_stats(common, st_input, st_bins);
    if (*tr_cmd) return cmd_train_eval(common, tr);
    if (*xp_cmd) return cmd_explain(common, xo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
