#include "dasad/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dasad/checkpoint.hpp"

#ifndef DASAD_GIT_HASH
#define DASAD_GIT_HASH "unknown"
#endif

namespace dasad {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc | std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot open " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }
Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

json overrides_json(const TrainOverrides& o) {
  json j = json::object();
  if (o.epochs) j["epochs"] = *o.epochs;
  if (o.learning_rate) j["learning_rate"] = *o.learning_rate;
  if (o.lambda_dom) j["lambda_dom"] = *o.lambda_dom;
  if (o.batch_size) j["batch_size"] = *o.batch_size;
  if (o.latent_dim) j["latent_dim"] = *o.latent_dim;
  if (o.hidden_units) j["hidden_units"] = *o.hidden_units;
  if (o.prior_kappa) j["prior_kappa"] = *o.prior_kappa;
  if (o.clamp) j["clamp"] = *o.clamp;
  if (o.activation) j["activation"] = *o.activation;
  return j;
}

TrainOverrides overrides_from(const json& j) {
  static const std::set<std::string> known{"epochs",       "learning_rate", "lambda_dom", "batch_size", "latent_dim",
                                           "hidden_units", "prior_kappa",   "clamp",      "activation"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw std::invalid_argument("unknown training override '" + k + "'");
  }
  TrainOverrides o;
  if (j.contains("epochs")) o.epochs = j.at("epochs").get<int>();
  if (j.contains("learning_rate")) o.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("lambda_dom")) o.lambda_dom = j.at("lambda_dom").get<double>();
  if (j.contains("batch_size")) o.batch_size = j.at("batch_size").get<int>();
  if (j.contains("latent_dim")) o.latent_dim = j.at("latent_dim").get<int>();
  if (j.contains("hidden_units")) o.hidden_units = j.at("hidden_units").get<int>();
  if (j.contains("prior_kappa")) o.prior_kappa = j.at("prior_kappa").get<double>();
  if (j.contains("clamp")) o.clamp = j.at("clamp").get<bool>();
  if (j.contains("activation")) o.activation = j.at("activation").get<std::string>();
  return o;
}

std::string platform_string() {
  std::string s;
#if defined(__linux__)
  s = "linux";
#elif defined(__APPLE__)
  s = "macos";
#elif defined(_WIN32)
  s = "windows";
#else
  s = "unknown";
#endif
#if defined(__x86_64__)
  s += "-x86_64";
#elif defined(__aarch64__)
  s += "-aarch64";
#endif
#if defined(__clang__)
  s += " clang " __clang_version__;
#elif defined(__GNUC__)
  s += " gcc " __VERSION__;
#endif
  return s;
}

struct Job {
  Variant variant;
  int case_id;
  std::uint64_t seed;
};

std::vector<Job> grid(const ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  for (Variant v : cfg.variants) {
    for (int c : cfg.cases) {
      for (std::uint64_t s : cfg.seeds) jobs.push_back({v, c, s});
    }
  }
  return jobs;
}

template <typename Fn>
void run_pool(std::size_t n_jobs, int workers, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_workers =
      std::min<std::size_t>(n_jobs, static_cast<std::size_t>(workers > 0 ? workers : static_cast<int>(hw)));
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n_jobs; i = next++) fn(i);
    });
  }
}

std::string source_checksum(const ExperimentConfig& cfg) {
  const MnistFiles files = MnistFiles::in_directory(cfg.mnist_dir);
  std::string combined;
  for (const fs::path* p : files.all()) {
    if (!fs::exists(*p)) throw std::runtime_error("missing MNIST file: " + p->string());
    const std::string digest = sha256_file(*p);
    const auto it = cfg.checksums.find(p->filename().string());
    if (it != cfg.checksums.end() && it->second != digest) {
      throw std::runtime_error("checksum mismatch for " + p->string() + ": expected " + it->second + ", got " +
                               digest + ". Re-download the file or update data.checksums in the config.");
    }
    combined += p->filename().string() + ":" + digest + ";";
  }
  return combined;
}

bool options_equal(const CaseOptions& a, const CaseOptions& b) {
  return a.rotation_degrees == b.rotation_degrees && a.train_cap_per_stratum == b.train_cap_per_stratum &&
         a.test_cap_per_role == b.test_cap_per_role;
}

std::string scores_csv(const std::vector<ScoreRecord>& scores) {
  std::string out = "sample_id,role,rl,kl,elbo\n";
  for (const auto& s : scores) {
    out += std::to_string(s.id) + "," + std::string(to_string(s.role)) + "," + g17(s.rl) + "," + g17(s.kl) + "," +
           g17(s.elbo) + "\n";
  }
  return out;
}

std::vector<ScoreRecord> parse_scores_csv(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot open " + p.string());
  std::vector<ScoreRecord> out;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, role, rl, kl, elbo;
    std::getline(ss, id, ',');
    std::getline(ss, role, ',');
    std::getline(ss, rl, ',');
    std::getline(ss, kl, ',');
    std::getline(ss, elbo, ',');
    out.push_back({std::stoull(id), role_from_string(role), std::stod(rl), std::stod(kl), std::stod(elbo)});
  }
  return out;
}

}  // namespace

void TrainOverrides::apply(TrainConfig& c) const {
  if (epochs) c.epochs = *epochs;
  if (learning_rate) c.learning_rate = *learning_rate;
  if (lambda_dom) c.lambda_dom = *lambda_dom;
  if (batch_size) c.batch_size = *batch_size;
  if (latent_dim) c.latent_dim = *latent_dim;
  if (hidden_units) c.hidden_units = *hidden_units;
  if (prior_kappa) c.prior_kappa = *prior_kappa;
  if (clamp) c.clamp = *clamp;
  if (activation) c.activation = activation_from(*activation);
}

ExperimentConfig ExperimentConfig::defaults() { return {}; }

json ExperimentConfig::to_json() const {
  json variants_j = json::array();
  for (Variant v : variants) variants_j.push_back(std::string(variant_id(v)));
  json per_variant = json::object();
  for (const auto& [v, o] : variant_train) per_variant[std::string(variant_id(v))] = overrides_json(o);
  return {
      {"data",
       {{"mnist_dir", mnist_dir.string()},
        {"checksums", checksums},
        {"seed", data_seed},
        {"rotation_degrees", case_options.rotation_degrees},
        {"train_cap_per_stratum", case_options.train_cap_per_stratum},
        {"test_cap_per_role", case_options.test_cap_per_role}}},
      {"cases", cases},
      {"variants", variants_j},
      {"seeds", seeds},
      {"train", overrides_json(train)},
      {"variant_train", per_variant},
      {"output_root", output_root.string()},
      {"workers", workers},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("data")) {
    const auto& d = j.at("data");
    c.mnist_dir = d.value("mnist_dir", c.mnist_dir.string());
    if (d.contains("checksums")) c.checksums = d.at("checksums").get<std::map<std::string, std::string>>();
    c.data_seed = d.value("seed", c.data_seed);
    c.case_options.rotation_degrees = d.value("rotation_degrees", c.case_options.rotation_degrees);
    c.case_options.train_cap_per_stratum = d.value("train_cap_per_stratum", c.case_options.train_cap_per_stratum);
    c.case_options.test_cap_per_role = d.value("test_cap_per_role", c.case_options.test_cap_per_role);
  }
  if (j.contains("cases")) c.cases = j.at("cases").get<std::vector<int>>();
  for (int id : c.cases) CaseSplit::for_case(id);
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_id(v.get<std::string>()));
  }
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("train")) c.train = overrides_from(j.at("train"));
  if (j.contains("variant_train")) {
    for (const auto& [k, v] : j.at("variant_train").items()) c.variant_train[variant_from_id(k)] = overrides_from(v);
  }
  c.output_root = j.value("output_root", c.output_root.string());
  c.workers = j.value("workers", c.workers);
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  ExperimentConfig c = from_json(read_json(path));
  const fs::path base = path.parent_path();
  if (c.mnist_dir.is_relative()) c.mnist_dir = base / c.mnist_dir;
  if (c.output_root.is_relative()) c.output_root = base / c.output_root;
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') c.output_root = env;
  return c;
}

TrainConfig ExperimentConfig::train_config(Variant v, std::uint64_t seed) const {
  TrainConfig t = TrainConfig::defaults(v);
  train.apply(t);
  if (const auto it = variant_train.find(v); it != variant_train.end()) it->second.apply(t);
  t.seed = seed;
  return t;
}

fs::path cache_stem(const ExperimentConfig& cfg, int case_id) {
  return cfg.output_root / "cache" / ("case" + std::to_string(case_id));
}

fs::path run_dir(const ExperimentConfig& cfg, Variant v, int case_id, std::uint64_t seed) {
  return cfg.output_root / "runs" / std::string(variant_id(v)) / ("case" + std::to_string(case_id)) /
         ("seed" + std::to_string(seed));
}

fs::path report_dir(const ExperimentConfig& cfg) { return cfg.output_root / "report"; }

json train_config_json(const TrainConfig& c) {
  return {{"variant", std::string(variant_id(c.variant))},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"lambda_dom", c.lambda_dom},
          {"batch_size", c.batch_size},
          {"latent_dim", c.latent_dim},
          {"hidden_units", c.hidden_units},
          {"prior_kappa", c.prior_kappa},
          {"seed", c.seed},
          {"clamp", c.clamp},
          {"force_zero_weights", c.force_zero_weights},
          {"activation", activation_name(c.activation)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c = TrainConfig::defaults(variant_from_id(j.at("variant").get<std::string>()));
  c.epochs = j.at("epochs");
  c.learning_rate = j.at("learning_rate");
  c.lambda_dom = j.at("lambda_dom");
  c.batch_size = j.at("batch_size");
  c.latent_dim = j.at("latent_dim");
  c.hidden_units = j.at("hidden_units");
  c.prior_kappa = j.at("prior_kappa");
  c.seed = j.at("seed");
  c.clamp = j.at("clamp");
  c.force_zero_weights = j.value("force_zero_weights", false);
  c.activation = activation_from(j.at("activation"));
  return c;
}

std::string losses_csv(const RunRecord& rec) {
  std::string out = "epoch,recon,kl,domain,w_vae_mean,w_dom_mean,total,clamped_fraction\n";
  for (const auto& e : rec.epochs) {
    const auto& l = e.loss;
    out += std::to_string(e.epoch) + "," + g17(l.recon) + "," + g17(l.kl) + "," + g17(l.domain) + "," +
           g17(l.w_vae_mean) + "," + g17(l.w_dom_mean) + "," + g17(l.total) + "," + g17(l.clamped_fraction) + "\n";
  }
  return out;
}

void write_run_directory(const fs::path& dir, const RunRecord& rec, int case_id) {
  fs::create_directories(dir);
  json cfg = train_config_json(rec.config);
  cfg["case_id"] = case_id;
  cfg["class_priors"] = {{"p_normal", rec.class_priors.p_normal}, {"p_anomaly", rec.class_priors.p_anomaly}};
  write_text(dir / "config.json", cfg.dump(2) + "\n");
  write_text(dir / "losses.csv", losses_csv(rec));
  save_checkpoint(rec.model, dir / "checkpoint", rec.seeds.init);
  const json meta = {
      {"git_hash", DASAD_GIT_HASH},
      {"platform", platform_string()},
      {"wall_clock_seconds", rec.wall_clock_seconds},
      {"seeds",
       {{"root", rec.seeds.root}, {"init", rec.seeds.init}, {"batches", rec.seeds.batches}, {"noise", rec.seeds.noise}}},
  };
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

PrepareReport cmd_prepare(const ExperimentConfig& cfg, std::ostream& log) {
  const std::string src = source_checksum(cfg);
  PrepareReport report;
  std::optional<MnistData> mnist;
  for (int case_id : cfg.cases) {
    const fs::path stem = cache_stem(cfg, case_id);
    const auto manifest = read_cache_manifest(stem);
    fs::path bin = stem;
    bin += ".bin";
    if (manifest && manifest->source_checksum == src && manifest->seed == cfg.data_seed &&
        manifest->case_id == case_id && options_equal(manifest->options, cfg.case_options) && fs::exists(bin) &&
        sha256_file(bin) == manifest->data_checksum) {
      log << "prepare: case " << case_id << " cache is current, skipping\n";
      report.reused.push_back(case_id);
      continue;
    }
    if (!mnist) mnist = load_mnist(MnistFiles::in_directory(cfg.mnist_dir));
    const CaseData data = build_case(case_id, *mnist, cfg.data_seed, cfg.case_options);
    fs::create_directories(stem.parent_path());
    save_case_cache(data, stem, src, cfg.case_options);
    log << "prepare: case " << case_id << " -> " << data.train.size() << " train / " << data.test.size()
        << " test samples\n";
    report.built.push_back(case_id);
  }
  return report;
}

GridReport cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  std::map<int, CaseData> data;
  for (int c : cfg.cases) {
    const fs::path stem = cache_stem(cfg, c);
    if (!read_cache_manifest(stem)) {
      throw std::runtime_error("no prepared dataset at " + stem.string() + ".json; run `dasad prepare` first");
    }
    data.emplace(c, load_case_cache(stem));
  }
  const auto jobs = grid(cfg);
  GridReport report;
  std::mutex mu;
  run_pool(jobs.size(), cfg.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const fs::path dir = run_dir(cfg, job.variant, job.case_id, job.seed);
    if (fs::exists(dir / "DONE")) {
      std::lock_guard lock(mu);
      ++report.skipped;
      log << "train: " << dir.string() << " already complete\n";
      return;
    }
    try {
      fs::create_directories(dir);
      fs::remove(dir / "error.txt");
      const TrainConfig tc = cfg.train_config(job.variant, job.seed);
      const RunRecord rec = train(data.at(job.case_id).train, tc);
      write_run_directory(dir, rec, job.case_id);
      write_text(dir / "DONE", "");
      std::lock_guard lock(mu);
      ++report.trained;
      const auto& last = rec.epochs.back().loss;
      log << "train: " << dir.string() << " done in " << rec.wall_clock_seconds << " s (final total " << last.total
          << ")\n";
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      report.failures.push_back(dir.string() + ": " + e.what());
      try {
        write_text(dir / "error.txt", std::string(e.what()) + "\n");
      } catch (...) {
      }
      log << "train: FAILED " << dir.string() << ": " << e.what() << "\n";
    }
  });
  return report;
}

GridReport cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
  std::map<int, CaseData> data;
  GridReport report;
  const auto jobs = grid(cfg);
  for (const Job& job : jobs) {
    const fs::path dir = run_dir(cfg, job.variant, job.case_id, job.seed);
    if (!fs::exists(dir / "DONE")) {
      ++report.skipped;
      continue;
    }
    try {
      if (!data.contains(job.case_id)) data.emplace(job.case_id, load_case_cache(cache_stem(cfg, job.case_id)));
      const TrainConfig tc = train_config_from_json(read_json(dir / "config.json"));
      const LoadedCheckpoint ck = load_checkpoint(dir / "checkpoint");
      const RunEvaluation ev = evaluate_run(ck.model, tc.variant, priors_for(tc), data.at(job.case_id).test);
      write_text(dir / "scores.csv", scores_csv(ev.scores));
      json rows = json::array();
      for (const auto& r : ev.rows) {
        rows.push_back({{"score", std::string(to_string(r.score))}, {"seen_auc", r.seen}, {"unseen_auc", r.unseen}});
      }
      const json out = {{"variant", std::string(variant_id(tc.variant))},
                        {"case_id", job.case_id},
                        {"seed", job.seed},
                        {"rows", rows}};
      write_text(dir / "eval.json", out.dump(2) + "\n");
      ++report.trained;
      log << "evaluate: " << dir.string() << "\n";
    } catch (const std::exception& e) {
      report.failures.push_back(dir.string() + ": " + e.what());
      log << "evaluate: FAILED " << dir.string() << ": " << e.what() << "\n";
    }
  }
  return report;
}

ResultTable collect_results(const ExperimentConfig& cfg, std::vector<std::string>* warnings) {
  ResultTable table;
  for (Variant v : cfg.variants) {
    bool any = false;
    for (int c : cfg.cases) {
      for (std::uint64_t s : cfg.seeds) {
        const fs::path p = run_dir(cfg, v, c, s) / "eval.json";
        if (!fs::exists(p)) continue;
        const json j = read_json(p);
        std::vector<AucRow> rows;
        for (const auto& r : j.at("rows")) {
          const std::string name = r.at("score");
          const ScoreType t = name == "RL" ? ScoreType::RL : (name == "KL" ? ScoreType::KL : ScoreType::ELBO);
          rows.push_back({t, r.at("seen_auc"), r.at("unseen_auc")});
        }
        table.add(v, c, s, rows);
        any = true;
      }
    }
    if (!any && warnings != nullptr) {
      warnings->push_back("no evaluated runs for variant " + std::string(variant_id(v)) + "; column omitted");
    }
  }
  return table;
}

std::string score_histogram_svg(const std::vector<ScoreRecord>& scores, ScoreType type, const std::string& title) {
  constexpr int bins = 40;
  constexpr double width = 640, height = 360, margin = 40;
  double lo = 1e300, hi = -1e300;
  for (const auto& s : scores) {
    lo = std::min(lo, s.get(type));
    hi = std::max(hi, s.get(type));
  }
  if (!(hi > lo)) hi = lo + 1.0;
  std::array<std::array<double, bins>, 3> counts{};
  std::array<double, 3> totals{};
  for (const auto& s : scores) {
    const int b = std::min(bins - 1, static_cast<int>((s.get(type) - lo) / (hi - lo) * bins));
    counts[static_cast<int>(s.role)][static_cast<std::size_t>(b)] += 1.0;
    totals[static_cast<int>(s.role)] += 1.0;
  }
  double peak = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (auto& c : counts[static_cast<std::size_t>(r)]) {
      if (totals[static_cast<std::size_t>(r)] > 0) c /= totals[static_cast<std::size_t>(r)];
      peak = std::max(peak, c);
    }
  }
  if (peak <= 0.0) peak = 1.0;
  static constexpr std::array<const char*, 3> colors{"#1f77b4", "#d62728", "#2ca02c"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << " ("
     << to_string(type) << ")</text>\n";
  const double plot_w = width - 2 * margin;
  const double plot_h = height - 2 * margin;
  for (int r = 0; r < 3; ++r) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[static_cast<std::size_t>(r)] << "\" stroke-width=\"2\" points=\"";
    for (int b = 0; b < bins; ++b) {
      const double x0 = margin + plot_w * b / bins;
      const double x1 = margin + plot_w * (b + 1) / bins;
      const double y = height - margin - plot_h * counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)] / peak;
      os << x0 << ',' << y << ' ' << x1 << ',' << y << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << (width - 170) << "\" y=\"" << (40 + 16 * r) << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
       << colors[static_cast<std::size_t>(r)] << "\">" << to_string(static_cast<Role>(r)) << "</text>\n";
  }
  os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
     << height - margin << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"" << height - 10 << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << g17(lo).substr(0, 8) << "</text>\n";
  os << "<text x=\"" << width - margin - 60 << "\" y=\"" << height - 10
     << "\" font-family=\"sans-serif\" font-size=\"11\">" << g17(hi).substr(0, 8) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

ReportOutput cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
  ReportOutput out;
  out.table = collect_results(cfg, &out.warnings);
  for (const auto& w : out.warnings) log << "report: warning: " << w << "\n";
  if (out.table.variants().empty()) {
    throw std::runtime_error("no evaluated runs under " + (cfg.output_root / "runs").string() +
                             "; run `dasad train` and `dasad evaluate` first");
  }
  const fs::path dir = report_dir(cfg);
  fs::create_directories(dir / "plots");
  write_text(dir / "results.json", out.table.to_json() + "\n");
  const std::string seen = out.table.render_markdown(AnomalyKind::Seen);
  const std::string unseen = out.table.render_markdown(AnomalyKind::Unseen);
  write_text(dir / "results.md", seen + "\n" + unseen);
  for (Variant v : out.table.variants()) {
    const ScoreType main = v == Variant::Vae ? ScoreType::RL : ScoreType::ELBO;
    for (int c : cfg.cases) {
      for (std::uint64_t s : cfg.seeds) {
        const fs::path scores = run_dir(cfg, v, c, s) / "scores.csv";
        if (!fs::exists(scores)) continue;
        const std::string name = std::string(variant_id(v)) + "_case" + std::to_string(c) + "_seed" + std::to_string(s);
        write_text(dir / "plots" / (name + ".svg"),
                   score_histogram_svg(parse_scores_csv(scores), main,
                                       std::string(variant_label(v)) + ", case " + std::to_string(c) + ", seed " +
                                           std::to_string(s)));
      }
    }
  }
  log << seen << "\n" << unseen;
  return out;
}

ReportOutput cmd_reproduce(const ExperimentConfig& cfg, std::ostream& log) {
  cmd_prepare(cfg, log);
  const GridReport tr = cmd_train(cfg, log);
  if (!tr.ok()) throw std::runtime_error(std::to_string(tr.failures.size()) + " training run(s) failed; first: " + tr.failures.front());
  const GridReport ev = cmd_evaluate(cfg, log);
  if (!ev.ok()) throw std::runtime_error(std::to_string(ev.failures.size()) + " evaluation(s) failed; first: " + ev.failures.front());
  return cmd_report(cfg, log);
}

}  // namespace dasad
