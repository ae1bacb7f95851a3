#pragma once

// Declarative experiment grid: data preparation, parallel training, evaluation
// and reporting over variant x case x seed.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dasad/data.hpp"
#include "dasad/evaluation.hpp"
#include "dasad/training.hpp"

namespace dasad {

/// Optional overrides on top of TrainConfig::defaults(variant).
struct TrainOverrides {
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<double> lambda_dom;
  std::optional<int> batch_size;
  std::optional<int> latent_dim;
  std::optional<int> hidden_units;
  std::optional<double> prior_kappa;
  std::optional<bool> clamp;
  std::optional<std::string> activation;

  void apply(TrainConfig& c) const;
};

struct ExperimentConfig {
  std::filesystem::path mnist_dir = "data/mnist";
  /// File name -> expected SHA-256 (hex). Files without an entry are not checked.
  std::map<std::string, std::string> checksums;
  std::uint64_t data_seed = 0;
  CaseOptions case_options;
  std::vector<int> cases{1, 2, 3};
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainOverrides train;
  std::map<Variant, TrainOverrides> variant_train;
  std::filesystem::path output_root = "dasad-out";
  int workers = 0;  // 0: hardware concurrency

  static ExperimentConfig defaults();
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Relative paths in the file are resolved against its directory. The
  /// DASAD_OUTPUT_ROOT environment variable overrides output_root.
  static ExperimentConfig load(const std::filesystem::path& path);

  TrainConfig train_config(Variant v, std::uint64_t seed) const;
};

/// Environment variable that overrides ExperimentConfig::output_root.
inline constexpr const char* kOutputRootEnv = "DASAD_OUTPUT_ROOT";

// ---- layout ------------------------------------------------------------------------------

std::filesystem::path cache_stem(const ExperimentConfig& cfg, int case_id);
std::filesystem::path run_dir(const ExperimentConfig& cfg, Variant v, int case_id, std::uint64_t seed);
std::filesystem::path report_dir(const ExperimentConfig& cfg);

/// Writes config.json, losses.csv, checkpoint.{bin,json}, metadata.json.
void write_run_directory(const std::filesystem::path& dir, const RunRecord& rec, int case_id);
std::string losses_csv(const RunRecord& rec);
nlohmann::json train_config_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// ---- commands ----------------------------------------------------------------------------

struct PrepareReport {
  std::vector<int> built;
  std::vector<int> reused;
};

/// Verifies IDX checksums and writes one cache per case; reuses caches whose
/// sidecar matches the current inputs and options.
PrepareReport cmd_prepare(const ExperimentConfig& cfg, std::ostream& log);

struct GridReport {
  std::size_t trained = 0;
  std::size_t skipped = 0;
  std::vector<std::string> failures;  // "<run dir>: <message>"
  bool ok() const { return failures.empty(); }
};

/// Runs the variant x case x seed grid on a worker pool. Runs with a DONE
/// marker are skipped; a failing run leaves error.txt in its directory.
GridReport cmd_train(const ExperimentConfig& cfg, std::ostream& log);

/// Scores every completed run on its case's test set: scores.csv and eval.json.
GridReport cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log);

struct ReportOutput {
  ResultTable table;
  std::vector<std::string> warnings;
};

/// results.json, results.md and per-run score histograms (SVG) under report/.
ReportOutput cmd_report(const ExperimentConfig& cfg, std::ostream& log);

/// prepare -> train -> evaluate -> report.
ReportOutput cmd_reproduce(const ExperimentConfig& cfg, std::ostream& log);

/// Collects eval.json files under output_root into a table.
ResultTable collect_results(const ExperimentConfig& cfg, std::vector<std::string>* warnings = nullptr);

/// Histogram of normal / seen / unseen scores as a standalone SVG document.
std::string score_histogram_svg(const std::vector<ScoreRecord>& scores, ScoreType type, const std::string& title);

}  // namespace dasad
