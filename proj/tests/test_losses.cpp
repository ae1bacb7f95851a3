#include <doctest.h>

#include <cmath>

#include "dasad/data.hpp"
#include "dasad/losses.hpp"
#include "dasad/verify.hpp"

using namespace dasad;
using doctest::Approx;

namespace {

Architecture toy(bool conditioned = true, bool clf = true) {
  Architecture a;
  a.input_dim = 6;
  a.latent_dim = 3;
  a.hidden_units = 4;
  a.decoder_conditioned = conditioned;
  a.domain_classifier = clf;
  return a;
}

StratifiedBatch random_batch(Rng& rng, Eigen::Index per_stratum, int dim = 6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StratifiedBatch b;
  for (Stratum s : {Stratum::NS, Stratum::AS, Stratum::NT}) {
    b[s].resize(dim, per_stratum);
    for (Eigen::Index i = 0; i < b[s].size(); ++i) b[s].data()[i] = u(rng);
  }
  b[Stratum::AT] = Eigen::MatrixXd(dim, 0);
  return b;
}

bool same_parameters(const Model& a, const Model& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!std::equal(pa[i].values.begin(), pa[i].values.end(), pb[i].values.begin())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("clamp_weight is one half of min(w, 2) on a grid") {
  for (int i = 0; i <= 4000; ++i) {
    const double w = i * 0.001 * 1.7;
    CHECK(clamp_weight(w) == 0.5 * std::min(w, 2.0));
  }
  CHECK(clamp_weight(2.0) == 1.0);
  CHECK(clamp_weight(0.5) == 0.25);
  CHECK(clamp_weight(100.0) == 1.0);
  CHECK(clamp_weight(0.0) == 0.0);
  CHECK_THROWS_AS(clamp_weight(-1e-12), std::domain_error);
}

TEST_CASE("w_vae from classifier probabilities") {
  CHECK(w_vae_from_prob(0.5) == 1.0);
  CHECK(w_vae_from_prob(2.0 / 3.0) == Approx(2.0).epsilon(1e-14));
  CHECK(w_vae_from_prob(1.0) == Approx((1.0 - kProbEps) / kProbEps));
  CHECK(w_vae_from_prob(0.0) == Approx(kProbEps / (1.0 - kProbEps)));
  CHECK(std::isfinite(w_vae_from_prob(1.0)));
}

TEST_CASE("w_dom from latent priors") {
  const LatentPriors priors = LatentPriors::antipodal(3, 5.0);
  const ClassPriors half(0.5, 0.5);
  CHECK(w_dom_at(Eigen::Vector3d(0.0, 1.0, 0.0), priors, half) == Approx(1.0).epsilon(1e-14));
  const LatentPriors sharp = LatentPriors::antipodal(3, 30.0);
  CHECK(w_dom_at(Eigen::Vector3d(-1.0, 0.0, 0.0), sharp, half) > 1e20);
  // Direct evaluation: log ratio = kappa (mu_A - mu_N)^T z = -2 kappa z_0.
  const Eigen::Vector3d z = Eigen::Vector3d(0.3, -0.4, std::sqrt(0.75)).normalized();
  CHECK(w_dom_at(z, priors, half) == Approx(std::exp(-10.0 * z[0])).epsilon(1e-13));
  CHECK(w_dom_at(z, priors, ClassPriors(0.8, 0.2)) == Approx(0.25 * std::exp(-10.0 * z[0])).epsilon(1e-13));
  // The log-ratio clip keeps extreme configurations finite.
  const LatentPriors extreme = LatentPriors::antipodal(3, 1e4);
  CHECK(w_dom_at(Eigen::Vector3d(-1.0, 0.0, 0.0), extreme, half) == Approx(std::exp(kLogRatioClip)));
}

TEST_CASE("class priors") {
  CHECK(ClassPriors::from_counts(300, 100).p_normal == 0.75);
  CHECK_THROWS(ClassPriors(0.7, 0.7));
  CHECK_THROWS(ClassPriors(1.0, 0.0));
  CHECK_THROWS(ClassPriors::from_counts(0, 5));
}

TEST_CASE("single-sample VAE and domain terms") {
  Model m = Model::init(toy(), 2, 10.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 10.0);
  // Encoder rigged to output the normal prior: mu = e1, kappa = prior kappa.
  m.enc.head_dir.weight.setZero();
  m.enc.head_dir.bias = Eigen::Vector3d(2.0, 0.0, 0.0);
  const PosteriorNoise exact{1.0, Eigen::Vector3d(0.0, 1.0, 0.0)};
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, 0.1, 0.6);
  const Eigen::VectorXd xr = decode(UnitVector::basis(3, 0), Domain::Target, m.dec);
  CHECK(vae_loss(x, ClassLabel::Normal, Domain::Target, m, priors, exact) ==
        Approx(-0.5 * (x - xr).squaredNorm()).epsilon(1e-12));
  // Against the anomaly prior the KL is 2 kappa A(kappa).
  CHECK(vae_loss(x, ClassLabel::Anomaly, Domain::Target, m, priors, exact) ==
        Approx(-0.5 * (x - xr).squaredNorm() - 20.0 * vmf_mean_resultant(3, 10.0)).epsilon(1e-12));

  SUBCASE("perfect reconstruction gives zero likelihood term") {
    for (auto& p : m.parameters()) {
      if (p.player == Player::Decoder) std::fill(p.values.begin(), p.values.end(), 0.0);
    }
    CHECK(vae_loss(Eigen::VectorXd::Constant(6, 0.5), ClassLabel::Normal, Domain::Source, m, priors, exact) ==
          Approx(0.0).scale(1.0));
  }
  SUBCASE("uninformative classifier") {
    for (auto& p : m.parameters()) {
      if (p.player == Player::Classifier) std::fill(p.values.begin(), p.values.end(), 0.0);
    }
    CHECK(domain_loss(x, Domain::Source, m, exact) == Approx(std::log(0.5)));
    CHECK(compute_w_vae(x, m, exact) == 1.0);
  }
  SUBCASE("w_dom at the posterior draw") {
    CHECK(compute_w_dom(x, m, priors, ClassPriors(0.5, 0.5), exact) == Approx(std::exp(-20.0)).epsilon(1e-12));
  }
}

TEST_CASE("batch objective matches a hand computation") {
  Rng rng(3);
  const Model m = Model::init(toy(), 5, 6.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 6.0);
  const ClassPriors cp(0.6, 0.4);
  const StratifiedBatch b = random_batch(rng, 1);
  ObjectiveOptions o;
  o.weights = WeightMode::Provided;
  o.lambda_dom = 0.05;
  o.provided_w_vae = Eigen::VectorXd::Constant(1, 0.7);
  o.provided_w_dom = Eigen::VectorXd::Constant(1, 3.0);  // clamped to 1
  Rng nr(9);
  NoiseBank noise(&nr);
  const LossBreakdown l = evaluate_objective(b, m, priors, cp, o, noise);

  const auto& dr = noise.draws;
  const Eigen::VectorXd ns = b[Stratum::NS].col(0), as = b[Stratum::AS].col(0), nt = b[Stratum::NT].col(0);
  const double w_sur = 0.35;
  const double w_d = 1.0;
  const double vae = 0.3 * vae_loss(ns, ClassLabel::Normal, Domain::Source, m, priors, dr[0][0]) +
                     0.2 * (vae_loss(as, ClassLabel::Anomaly, Domain::Source, m, priors, dr[1][0]) +
                            w_sur * vae_loss(as, ClassLabel::Anomaly, Domain::Target, m, priors, dr[1][0])) +
                     0.3 * vae_loss(nt, ClassLabel::Normal, Domain::Target, m, priors, dr[2][0]);
  const double dom = 0.3 * domain_loss(ns, Domain::Source, m, dr[0][0]) +
                     0.2 * domain_loss(as, Domain::Source, m, dr[1][0]) +
                     0.3 * (1.0 + w_d) * domain_loss(nt, Domain::Target, m, dr[2][0]);
  CHECK(l.vae_objective() == Approx(vae).epsilon(1e-12));
  CHECK(l.domain == Approx(dom).epsilon(1e-12));
  CHECK(l.total == Approx(-vae + 0.05 * dom).epsilon(1e-12));
  CHECK(std::abs(l.total - (l.recon + l.kl + l.lambda_dom * l.domain)) <= 1e-10);
  CHECK(l.w_vae_mean == Approx(0.35));
  CHECK(l.w_dom_mean == Approx(1.0));
  CHECK(l.clamped_fraction == Approx(0.5));

  NoiseBank replay = noise;
  replay.rng = nullptr;
  CHECK(weighted_vae_objective(b, m, priors, cp, o, replay) == Approx(vae).epsilon(1e-12));
  CHECK(weighted_domain_objective(b, m, priors, cp, o, replay) == Approx(dom).epsilon(1e-12));
}

TEST_CASE("zero weights reproduce the unweighted objective bit for bit") {
  Rng rng(4);
  const Model m = Model::init(toy(), 6, 8.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 8.0);
  const ClassPriors cp(0.5, 0.5);
  const StratifiedBatch b = random_batch(rng, 5);
  ObjectiveOptions none;
  none.weights = WeightMode::None;
  ObjectiveOptions zero = none;
  zero.weights = WeightMode::Zero;
  Rng r1(1), r2(1);
  NoiseBank n1(&r1), n2(&r2);
  Model g1 = m.zeros_like(), g2 = m.zeros_like();
  const LossBreakdown a = evaluate_objective(b, m, priors, cp, none, n1, &g1);
  const LossBreakdown c = evaluate_objective(b, m, priors, cp, zero, n2, &g2);
  CHECK(a.total == c.total);
  CHECK(a.recon == c.recon);
  CHECK(a.kl == c.kl);
  CHECK(a.domain == c.domain);
  CHECK(same_parameters(g1, g2));
}

TEST_CASE("no gradient flows through the importance weights") {
  Rng rng(6);
  const Model m = Model::init(toy(), 8, 8.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 8.0);
  const ClassPriors cp(0.5, 0.5);
  const StratifiedBatch b = random_batch(rng, 4);
  ObjectiveOptions model_w;
  model_w.weights = WeightMode::Model;
  model_w.adversarial = false;
  model_w.clamp = true;
  Rng nr(2);
  NoiseBank noise(&nr);
  Model g_model = m.zeros_like();
  evaluate_objective(b, m, priors, cp, model_w, noise, &g_model);
  noise.rng = nullptr;

  // The same weights supplied as constants give the same encoder/decoder gradient.
  ObjectiveOptions fixed = model_w;
  fixed.weights = WeightMode::Provided;
  fixed.provided_w_vae.resize(4);
  fixed.provided_w_dom.resize(4);
  const EncoderForward fa = encoder_forward(m.enc, b[Stratum::AS], m.arch.activation);
  const EncoderForward fn = encoder_forward(m.enc, b[Stratum::NT], m.arch.activation);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const Eigen::VectorXd za = apply_noise(fa.mu.col(j), noise.draws[1][static_cast<std::size_t>(j)]);
    const Eigen::VectorXd zn = apply_noise(fn.mu.col(j), noise.draws[2][static_cast<std::size_t>(j)]);
    fixed.provided_w_vae[j] = w_vae_from_prob(domain_prob_raw(za, *m.clf, m.arch.activation));
    fixed.provided_w_dom[j] = w_dom_at(zn, priors, cp);
  }
  Model g_fixed = m.zeros_like();
  evaluate_objective(b, m, priors, cp, fixed, noise, &g_fixed);
  CHECK(same_parameters(g_model, g_fixed));
  for (const auto& p : g_model.parameters()) {
    if (p.player == Player::Classifier) {
      for (double v : p.values) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("objective gradients match central differences") {
  for (const auto& c : check_objective_gradients()) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("lambda zero removes the domain term from the total") {
  Rng rng(7);
  const Model m = Model::init(toy(), 9, 8.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 8.0);
  const StratifiedBatch b = random_batch(rng, 3);
  ObjectiveOptions o;
  o.weights = WeightMode::None;
  o.lambda_dom = 0.0;
  Rng nr(3);
  NoiseBank noise(&nr);
  Model g = m.zeros_like();
  const LossBreakdown l = evaluate_objective(b, m, priors, ClassPriors(0.5, 0.5), o, noise, &g);
  CHECK(l.total == -l.vae_objective());
  // With lambda 0 the classifier still learns, but the encoder sees none of its gradient.
  ObjectiveOptions plain = o;
  plain.adversarial = false;
  noise.rng = nullptr;
  Model g2 = m.zeros_like();
  evaluate_objective(b, m, priors, ClassPriors(0.5, 0.5), plain, noise, &g2);
  CHECK(g.enc.hidden.weight == g2.enc.hidden.weight);
  CHECK(g.enc.head_dir.weight == g2.enc.head_dir.weight);
}

TEST_CASE("missing strata and invalid options") {
  Rng rng(8);
  const Model m = Model::init(toy(), 9, 8.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 8.0);
  StratifiedBatch b = random_batch(rng, 3);
  b[Stratum::AS] = Eigen::MatrixXd(6, 0);
  ObjectiveOptions o;
  o.weights = WeightMode::Zero;
  Rng nr(3);
  NoiseBank noise(&nr);
  CHECK_FALSE(evaluate_objective(b, m, priors, ClassPriors(0.5, 0.5), o, noise).complete);
  o.lambda_dom = -1.0;
  CHECK_THROWS(evaluate_objective(b, m, priors, ClassPriors(0.5, 0.5), o, noise));
  const Model plain = Model::init(toy(false, false), 9, 8.0);
  ObjectiveOptions needs_clf;
  CHECK_THROWS(evaluate_objective(random_batch(rng, 2), plain, priors, ClassPriors(0.5, 0.5), needs_clf, noise));
}

TEST_CASE("noise bank replays recorded draws and refuses gaps") {
  Rng r(5);
  NoiseBank bank(&r);
  const Eigen::Vector3d mu(0.0, 0.0, 1.0);
  const PosteriorNoise first = bank.get(Stratum::NS, 0, mu, 10.0);
  bank.rng = nullptr;
  CHECK(bank.get(Stratum::NS, 0, mu, 10.0).tangent == first.tangent);
  CHECK_THROWS_AS(bank.get(Stratum::NS, 1, mu, 10.0), std::logic_error);
  Rng r2(5);
  NoiseBank other(&r2);
  CHECK_THROWS_AS(other.get(Stratum::AS, 2, mu, 10.0), std::logic_error);
  const Eigen::VectorXd z = apply_noise(mu, first);
  CHECK(std::abs(z.norm() - 1.0) < 1e-12);
  CHECK(std::abs(first.tangent.dot(mu)) < 1e-12);
}

TEST_CASE("weighted losses with true weights match the four-stratum oracle") {
  const auto checks = check_synthetic_oracle();
  REQUIRE(checks.size() == 2);
  for (const auto& c : checks) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("the oracle check detects missing weights") {
  // Negative control: without the surrogate terms the three-stratum loss misses the (A,T) share.
  const SyntheticDomains domains(SyntheticSpec::translation(4, 3.0, 1.0));
  const SyntheticData data = gen_synthetic(domains, 2000, 3);
  Architecture a = toy();
  a.input_dim = 4;
  const Model m = Model::init(a, 4, 8.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 8.0);
  auto mat = [](const Dataset& ds) {
    Eigen::MatrixXd x(4, static_cast<Eigen::Index>(ds.size()));
    for (std::size_t j = 0; j < ds.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = ds[j].x;
    return x;
  };
  StratifiedBatch three;
  three[Stratum::NS] = mat(data.ns);
  three[Stratum::AS] = mat(data.as);
  three[Stratum::NT] = mat(data.nt);
  three[Stratum::AT] = Eigen::MatrixXd(4, 0);
  StratifiedBatch four = three;
  four[Stratum::AT] = mat(data.at_held_out);
  ObjectiveOptions o;
  o.weights = WeightMode::None;
  Rng r1(1), r2(2);
  NoiseBank n1(&r1), n2(&r2);
  const double without = evaluate_objective(three, m, priors, ClassPriors(0.5, 0.5), o, n1).vae_objective();
  const double ideal = evaluate_objective(four, m, priors, ClassPriors(0.5, 0.5), o, n2).vae_objective();
  CHECK(std::abs(without - ideal) / std::abs(ideal) > 0.05);
}
