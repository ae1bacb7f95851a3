#include "dasad/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

#include "dasad/data.hpp"
#include "dasad/evaluation.hpp"
#include "dasad/losses.hpp"
#include "dasad/networks.hpp"

namespace dasad {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Eigen::VectorXd random_unit(int m, Rng& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v[i] = g(rng);
  return v.normalized();
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = u(rng);
  }
  return a;
}

double rel_err(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Largest relative error over every parameter of `model` (restricted to `players`)
// between analytic gradients and central differences of `f`.
struct FdOutcome {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

template <typename F>
FdOutcome fd_compare(Model& model, const Model& analytic, const std::array<bool, 3>& players, F&& f,
                     const VerifyOptions& opts) {
  FdOutcome out;
  auto params = model.parameters();
  const auto grads = analytic.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!players[static_cast<int>(params[k].player)]) continue;
    for (std::size_t i = 0; i < params[k].values.size(); ++i) {
      double& p = params[k].values[i];
      const double saved = p;
      p = saved + opts.fd_step;
      const double up = f();
      p = saved - opts.fd_step;
      const double down = f();
      p = saved;
      const double numeric = (up - down) / (2.0 * opts.fd_step);
      const double e = rel_err(grads[k].values[i], numeric, opts.fd_floor);
      ++out.checked;
      if (e > out.worst) {
        out.worst = e;
        out.where = params[k].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

CheckResult fd_result(const std::string& name, const FdOutcome& o, const VerifyOptions& opts) {
  return {name, o.worst <= opts.fd_rel_tol, o.worst, opts.fd_rel_tol,
          std::to_string(o.checked) + " entries, worst at " + (o.where.empty() ? "-" : o.where)};
}

Architecture toy_arch(bool conditioned, bool classifier) {
  Architecture a;
  a.input_dim = 6;
  a.latent_dim = 3;
  a.hidden_units = 4;
  a.decoder_conditioned = conditioned;
  a.domain_classifier = classifier;
  a.activation = Activation::Tanh;
  return a;
}

}  // namespace

std::vector<CheckResult> check_vmf_kl_monte_carlo(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  std::uint64_t salt = 0;
  for (int m : {3, 10}) {
    for (double kappa : {1.0, 10.0, 50.0}) {
      Rng rng(opts.seed * 7919 + ++salt);
      const VmfDist q(UnitVector::normalized(random_unit(m, rng)), kappa);
      const VmfDist p(UnitVector::normalized(random_unit(m, rng)), 10.0);
      const auto draws = vmf_sample(q, rng(), opts.kl_mc_draws);
      double sum = 0.0;
      double sq = 0.0;
      for (const auto& z : draws) {
        const double v = vmf_log_pdf(q, z) - vmf_log_pdf(p, z);
        sum += v;
        sq += v * v;
      }
      const double n = static_cast<double>(draws.size());
      const double mean = sum / n;
      const double se = std::sqrt(std::max(0.0, sq / n - mean * mean) / (n - 1.0));
      const double closed = opts.kl(q, p);
      const double z_score = se > 0.0 ? std::abs(closed - mean) / se : std::abs(closed - mean);
      out.push_back({"vmf_kl_mc_m" + std::to_string(m) + "_kappa" + std::to_string(static_cast<int>(kappa)),
                     z_score <= 3.0, z_score, 3.0, fmt("closed %.10g, mc %.10g", closed, mean)});
    }
  }
  return out;
}

std::vector<CheckResult> check_sampler_resultant(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  std::uint64_t salt = 100;
  for (int m : {3, 10}) {
    for (double kappa : {1.0, 10.0, 50.0}) {
      Rng rng(opts.seed * 7919 + ++salt);
      const Eigen::VectorXd mu = random_unit(m, rng);
      const VmfDist d(UnitVector::normalized(mu), kappa);
      const auto draws = vmf_sample(d, rng(), opts.resultant_draws);
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
      double cos_sq = 0.0;
      for (const auto& z : draws) {
        mean += z.coords();
        const double c = z.coords().dot(mu);
        cos_sq += c * c;
      }
      const double n = static_cast<double>(draws.size());
      mean /= n;
      const double a = vmf_mean_resultant(m, kappa);
      const double len = mean.norm();
      const double rel = std::abs(len - a) / a;
      const double direction = mean.dot(mu) / len;
      const double se = std::sqrt(std::max(0.0, cos_sq / n - a * a) / n);
      const std::string name = "sampler_resultant_m" + std::to_string(m) + "_kappa" + std::to_string(static_cast<int>(kappa));
      out.push_back({name, rel <= 0.01, rel, 0.01, fmt("A %.8g, |mean| %.8g", a, len) + fmt(", se/A %.3g", se / a)});
      out.push_back({name + "_direction", 1.0 - direction <= 0.01, 1.0 - direction, 0.01,
                     fmt("cos(mean, mu) %.8g", direction)});
    }
  }
  return out;
}

std::vector<CheckResult> check_network_gradients(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  Rng rng(opts.seed + 31);
  const int b = 3;
  for (bool conditioned : {false, true}) {
    Model model = Model::init(toy_arch(conditioned, true), rng(), 5.0);
    const Eigen::MatrixXd x = random_matrix(6, b, rng, 0.0, 1.0);
    const auto act = model.arch.activation;
    const std::string tag = conditioned ? "_conditioned" : "";

    // Encoder: projection of mu plus a multiple of kappa.
    {
      const Eigen::MatrixXd r = random_matrix(3, b, rng);
      const double rk = 0.7;
      auto f = [&] {
        const EncoderForward fw = encoder_forward(model.enc, x, act);
        return (r.array() * fw.mu.array()).sum() + rk * fw.kappa;
      };
      Model g = model.zeros_like();
      const EncoderForward fw = encoder_forward(model.enc, x, act);
      encoder_backward(model.enc, x, fw, r, rk, act, g.enc);
      if (!conditioned) out.push_back(fd_result("grad_encoder", fd_compare(model, g, {true, false, false}, f, opts), opts));
    }
    // Decoder: projection of the output, both domain codes, plus the latent input.
    for (Domain d : {Domain::Source, Domain::Target}) {
      if (!conditioned && d == Domain::Source) continue;
      Eigen::MatrixXd z = random_matrix(3, b, rng);
      const Eigen::MatrixXd r = random_matrix(6, b, rng);
      auto f = [&] {
        const DecoderForward fw = decoder_forward(model.dec, z, d, act);
        return (r.array() * fw.out.array()).sum();
      };
      Model g = model.zeros_like();
      const DecoderForward fw = decoder_forward(model.dec, z, d, act);
      const Eigen::MatrixXd gz = decoder_backward(model.dec, fw, r, act, g.dec);
      out.push_back(fd_result("grad_decoder" + tag + (conditioned ? (d == Domain::Source ? "_S" : "_T") : ""),
                              fd_compare(model, g, {false, true, false}, f, opts), opts));
      FdOutcome zo;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double saved = z.data()[i];
        z.data()[i] = saved + opts.fd_step;
        const double up = f();
        z.data()[i] = saved - opts.fd_step;
        const double down = f();
        z.data()[i] = saved;
        const double e = rel_err(gz.data()[i], (up - down) / (2.0 * opts.fd_step), opts.fd_floor);
        ++zo.checked;
        if (e > zo.worst) {
          zo.worst = e;
          zo.where = "z[" + std::to_string(i) + "]";
        }
      }
      out.push_back(fd_result("grad_decoder_input" + tag + (conditioned ? (d == Domain::Source ? "_S" : "_T") : ""), zo,
                              opts));
    }
    // Classifier: projection of the logit.
    if (!conditioned) {
      const Eigen::MatrixXd z = random_matrix(3, b, rng);
      const Eigen::RowVectorXd r = random_matrix(1, b, rng);
      auto f = [&] { return classifier_forward(*model.clf, z, act).logit.dot(r); };
      Model g = model.zeros_like();
      const ClassifierForward fw = classifier_forward(*model.clf, z, act);
      classifier_backward(*model.clf, z, fw, r, act, *g.clf);
      out.push_back(fd_result("grad_classifier", fd_compare(model, g, {false, false, true}, f, opts), opts));
    }
  }
  return out;
}

std::vector<CheckResult> check_objective_gradients(const VerifyOptions& opts) {
  struct Case {
    std::string name;
    bool conditioned;
    bool classifier;
    WeightMode weights;
    std::array<double, 4> scale;
  };
  const std::vector<Case> cases{
      {"vae", false, false, WeightMode::None, {0.0, 0.0, 1.0, 0.0}},
      {"two_class", false, false, WeightMode::None, {0.3, 0.2, 0.3, 0.2}},
      {"adversarial", false, true, WeightMode::None, {0.3, 0.2, 0.3, 0.2}},
      {"conditioned_adversarial", true, true, WeightMode::None, {0.3, 0.2, 0.3, 0.2}},
      {"weighted", true, true, WeightMode::Provided, {0.3, 0.2, 0.3, 0.2}},
  };
  std::vector<CheckResult> out;
  Rng rng(opts.seed + 97);
  for (const Case& c : cases) {
    Model model = Model::init(toy_arch(c.conditioned, c.classifier), rng(), 4.0);
    const LatentPriors priors = LatentPriors::antipodal(3, 6.0);
    const ClassPriors cp(0.6, 0.4);
    StratifiedBatch batch;
    for (Stratum s : {Stratum::NS, Stratum::AS, Stratum::NT}) batch[s] = random_matrix(6, 3, rng, 0.0, 1.0);
    batch[Stratum::AT] = Eigen::MatrixXd(6, 0);
    ObjectiveOptions o;
    o.adversarial = c.classifier;
    o.lambda_dom = 0.3;
    o.weights = c.weights;
    o.stratum_scale = c.scale;
    if (c.weights == WeightMode::Provided) {
      o.provided_w_vae = (random_matrix(3, 1, rng, 0.0, 3.0)).col(0);
      o.provided_w_dom = (random_matrix(3, 1, rng, 0.0, 3.0)).col(0);
    }
    Rng noise_rng(rng());
    NoiseBank noise(&noise_rng);
    Model g = model.zeros_like();
    evaluate_objective(batch, model, priors, cp, o, noise, &g);
    noise.rng = nullptr;  // replay only
    auto total = [&] { return evaluate_objective(batch, model, priors, cp, o, noise).total; };
    out.push_back(fd_result("grad_objective_" + c.name + "_encoder_decoder",
                            fd_compare(model, g, {true, true, false}, total, opts), opts));
    if (c.classifier) {
      auto neg_domain = [&] { return -evaluate_objective(batch, model, priors, cp, o, noise).domain; };
      out.push_back(fd_result("grad_objective_" + c.name + "_classifier",
                              fd_compare(model, g, {false, false, true}, neg_domain, opts), opts));
    }
  }
  // KL closed form against its own partials.
  {
    const VmfDist p(UnitVector::basis(10, 1), 10.0);
    Eigen::VectorXd mu = random_unit(10, rng);
    double kappa = 20.0;
    VmfKlGrad kg;
    vmf_kl_raw(mu, kappa, p, &kg);
    FdOutcome o;
    auto f = [&] { return vmf_kl_raw(mu, kappa, p); };
    for (Eigen::Index i = 0; i <= mu.size(); ++i) {
      double& v = i < mu.size() ? mu[i] : kappa;
      const double a = i < mu.size() ? kg.d_mu_q[i] : kg.d_kappa_q;
      const double saved = v;
      v = saved + opts.fd_step;
      const double up = f();
      v = saved - opts.fd_step;
      const double down = f();
      v = saved;
      const double e = rel_err(a, (up - down) / (2.0 * opts.fd_step), opts.fd_floor);
      ++o.checked;
      if (e > o.worst) {
        o.worst = e;
        o.where = i < mu.size() ? "mu[" + std::to_string(i) + "]" : "kappa";
      }
    }
    out.push_back(fd_result("grad_vmf_kl", o, opts));
  }
  return out;
}

std::vector<CheckResult> check_synthetic_oracle(const VerifyOptions& opts) {
  const SyntheticDomains domains(SyntheticSpec::translation(4, 3.0, 1.0));
  const SyntheticData data = gen_synthetic(domains, opts.oracle_samples, opts.seed + 17);
  Architecture arch = toy_arch(true, true);
  arch.input_dim = 4;
  arch.latent_dim = 3;
  arch.hidden_units = 16;
  const Model model = Model::init(arch, opts.seed + 19, 8.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 8.0);
  const ClassPriors cp(domains.spec().p_normal, 1.0 - domains.spec().p_normal);

  auto matrix = [](const Dataset& ds) {
    Eigen::MatrixXd m(ds.front().x.size(), static_cast<Eigen::Index>(ds.size()));
    for (std::size_t j = 0; j < ds.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = ds[j].x;
    return m;
  };
  StratifiedBatch three;
  three[Stratum::NS] = matrix(data.ns);
  three[Stratum::AS] = matrix(data.as);
  three[Stratum::NT] = matrix(data.nt);
  three[Stratum::AT] = Eigen::MatrixXd(4, 0);
  StratifiedBatch four = three;
  four[Stratum::AT] = matrix(data.at_held_out);

  ObjectiveOptions weighted;
  weighted.adversarial = true;
  weighted.lambda_dom = 1.0;
  weighted.weights = WeightMode::Provided;
  weighted.clamp = false;
  weighted.provided_w_vae.resize(three.count(Stratum::AS));
  weighted.provided_w_dom.resize(three.count(Stratum::NT));
  for (std::size_t j = 0; j < data.as.size(); ++j) weighted.provided_w_vae[static_cast<Eigen::Index>(j)] = domains.true_w_vae(data.as[j].x);
  for (std::size_t j = 0; j < data.nt.size(); ++j) weighted.provided_w_dom[static_cast<Eigen::Index>(j)] = domains.true_w_dom(data.nt[j].x);
  ObjectiveOptions ideal = weighted;
  ideal.weights = WeightMode::None;

  Rng rng_w(opts.seed + 23);
  Rng rng_i(opts.seed + 29);
  NoiseBank noise_w(&rng_w);
  NoiseBank noise_i(&rng_i);
  const LossBreakdown lw = evaluate_objective(three, model, priors, cp, weighted, noise_w);
  const LossBreakdown li = evaluate_objective(four, model, priors, cp, ideal, noise_i);

  const double vae_w = lw.vae_objective();
  const double vae_i = li.vae_objective();
  const double rel_vae = std::abs(vae_w - vae_i) / std::abs(vae_i);
  const double rel_dom = std::abs(lw.domain - li.domain) / std::abs(li.domain);
  const std::string n = std::to_string(opts.oracle_samples);
  return {
      {"oracle_weighted_vae_loss", rel_vae <= opts.oracle_rel_tol, rel_vae, opts.oracle_rel_tol,
       fmt("weighted %.8g, ideal %.8g", vae_w, vae_i) + ", n=" + n},
      {"oracle_weighted_domain_loss", rel_dom <= opts.oracle_rel_tol, rel_dom, opts.oracle_rel_tol,
       fmt("weighted %.8g, ideal %.8g", lw.domain, li.domain) + ", n=" + n},
  };
}

double auc_pairwise(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive) {
  double count = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (positive[i] == 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) count += 1.0;
      else if (scores[i] == scores[j]) count += 0.5;
    }
  }
  return count / pairs;
}

std::vector<CheckResult> check_auc_oracle(const VerifyOptions& opts) {
  Rng rng(opts.seed + 5);
  int mismatches = 0;
  double worst = 0.0;
  for (int t = 0; t < opts.auc_instances; ++t) {
    const int n = std::uniform_int_distribution<int>(2, opts.auc_max_n)(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> y(static_cast<std::size_t>(n));
    const bool ties = t % 2 == 0;
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = ties ? std::round(3.0 * g(rng)) : g(rng);
      y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rng() & 1U);
    }
    y[0] = 1;
    y[1] = 0;
    const double a = auc(s, y);
    const double b = auc_pairwise(s, y);
    if (a != b) ++mismatches;
    worst = std::max(worst, std::abs(a - b));
  }
  return {{"auc_rank_vs_pairwise", mismatches == 0, worst, 0.0,
           std::to_string(opts.auc_instances) + " instances, " + std::to_string(mismatches) + " mismatches"}};
}

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opts) {
  std::vector<CheckResult> all;
  for (auto part : {check_vmf_kl_monte_carlo(opts), check_sampler_resultant(opts), check_network_gradients(opts),
                    check_objective_gradients(opts), check_synthetic_oracle(opts),
                    check_auc_oracle(opts)}) {
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

bool print_checks(const std::vector<CheckResult>& checks, std::ostream& os) {
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.pass;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e <= %.3e", c.value, c.tolerance);
    os << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << buf << "  " << c.detail << "\n";
  }
  return ok;
}

std::string checks_json(const std::vector<CheckResult>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.pass;
    arr.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance},
                   {"detail", c.detail}});
  }
  return nlohmann::json{{"all_pass", ok}, {"checks", arr}}.dump(2);
}

}  // namespace dasad
