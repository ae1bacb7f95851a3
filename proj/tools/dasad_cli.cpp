// dasad: prepare / train / evaluate / report / verify / reproduce.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dasad/experiment.hpp"
#include "dasad/verify.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<int> cases;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  std::optional<int> epochs;
  std::optional<int> workers;
  std::string output_root;
  bool print_config = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--cases", c.cases, "restrict to these cases")->check(CLI::Range(1, 3));
  app->add_option("--variants", c.variants, "restrict to these variant ids");
  app->add_option("--seeds", c.seeds, "restrict to these seeds");
  app->add_option("--epochs", c.epochs, "override epochs for every variant")->check(CLI::PositiveNumber);
  app->add_option("--workers", c.workers, "parallel training runs (0: all cores)")->check(CLI::NonNegativeNumber);
  app->add_option("-o,--output-root", c.output_root, "output directory");
  app->add_flag("--print-config", c.print_config, "print the effective config and exit");
}

dasad::ExperimentConfig resolve(const Common& c) {
  dasad::ExperimentConfig cfg =
      c.config.empty() ? dasad::ExperimentConfig::defaults() : dasad::ExperimentConfig::load(c.config);
  if (!c.cases.empty()) cfg.cases = c.cases;
  if (!c.variants.empty()) {
    cfg.variants.clear();
    for (const auto& v : c.variants) cfg.variants.push_back(dasad::variant_from_id(v));
  }
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (c.epochs) {
    cfg.train.epochs = *c.epochs;
    for (auto& [v, o] : cfg.variant_train) o.epochs = *c.epochs;
  }
  if (c.workers) cfg.workers = *c.workers;
  if (!c.output_root.empty()) cfg.output_root = c.output_root;
  return cfg;
}

int grid_exit(const dasad::GridReport& r, const char* what) {
  std::cerr << what << ": " << r.trained << " done, " << r.skipped << " skipped, " << r.failures.size()
            << " failed\n";
  for (const auto& f : r.failures) std::cerr << "  " << f << "\n";
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adapted two-prior vMF-VAE anomaly detection"};
  app.require_subcommand(1);

  Common common;
  auto* prepare = app.add_subcommand("prepare", "verify MNIST files and build per-case datasets");
  auto* train = app.add_subcommand("train", "train the variant x case x seed grid");
  auto* evaluate = app.add_subcommand("evaluate", "score test sets with trained checkpoints");
  auto* report = app.add_subcommand("report", "aggregate AUC tables and score histograms");
  auto* reproduce = app.add_subcommand("reproduce", "prepare, train, evaluate and report");
  for (auto* sub : {prepare, train, evaluate, report, reproduce}) add_common(sub, common);

  auto* verify = app.add_subcommand("verify", "run the numerical self-check suite");
  std::uint64_t verify_seed = 0;
  std::string verify_json;
  verify->add_option("--seed", verify_seed, "random seed");
  verify->add_option("--json", verify_json, "also write a JSON summary here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      dasad::VerifyOptions opts;
      opts.seed = verify_seed;
      const auto checks = dasad::run_verify_suite(opts);
      const bool ok = dasad::print_checks(checks, std::cout);
      if (!verify_json.empty()) {
        std::ofstream os(verify_json);
        os << dasad::checks_json(checks) << "\n";
        if (!os) throw std::runtime_error("cannot write " + verify_json);
      }
      std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
      return ok ? 0 : 1;
    }

    const dasad::ExperimentConfig cfg = resolve(common);
    if (common.print_config) {
      std::cout << cfg.to_json().dump(2) << "\n";
      return 0;
    }
    if (prepare->parsed()) {
      const auto r = dasad::cmd_prepare(cfg, std::cerr);
      std::cerr << "prepare: " << r.built.size() << " built, " << r.reused.size() << " reused\n";
      return 0;
    }
    if (train->parsed()) return grid_exit(dasad::cmd_train(cfg, std::cerr), "train");
    if (evaluate->parsed()) return grid_exit(dasad::cmd_evaluate(cfg, std::cerr), "evaluate");
    if (report->parsed()) {
      dasad::cmd_report(cfg, std::cout);
      return 0;
    }
    if (reproduce->parsed()) {
      dasad::cmd_reproduce(cfg, std::cout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
