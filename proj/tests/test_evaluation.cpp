#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "dasad/evaluation.hpp"
#include "dasad/verify.hpp"

using namespace dasad;
using doctest::Approx;

namespace {

double auc_of(const std::vector<double>& s, const std::vector<std::uint8_t>& y) { return auc(s, y); }

Model rigged_model() {
  Architecture a;
  a.input_dim = 4;
  a.latent_dim = 3;
  a.hidden_units = 5;
  a.decoder_conditioned = true;
  Model m = Model::init(a, 2, 10.0);
  m.enc.hidden.weight.setZero();
  m.enc.head_dir.weight.setZero();
  m.enc.head_dir.bias << 2.0, 0.0, 0.0;  // mu = e1 for every input
  m.enc.log_kappa = inverse_softplus(10.0);
  return m;
}

Dataset three_roles(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  for (Role r : {Role::Normal, Role::SeenAnomaly, Role::UnseenAnomaly}) {
    for (std::size_t i = 0; i < n; ++i) {
      LabeledSample s;
      s.x = Eigen::VectorXd::NullaryExpr(4, [&] { return u(rng) + (r == Role::Normal ? 0.0 : 0.5); });
      s.role = r;
      s.d = Domain::Target;
      s.c = r == Role::Normal ? ClassLabel::Normal : ClassLabel::Anomaly;
      d.push_back(s);
    }
  }
  return d;
}

}  // namespace

TEST_CASE("auc on small examples") {
  CHECK(auc_of({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75);
  CHECK(auc_of({1, 2, 3, 4}, {0, 0, 1, 1}) == 1.0);
  CHECK(auc_of({1, 2, 3, 4}, {1, 1, 0, 0}) == 0.0);
  CHECK(auc_of({5, 5, 5, 5, 5}, {0, 1, 0, 1, 1}) == 0.5);
  CHECK(auc_of({1, 2, 2, 3}, {0, 0, 1, 1}) == 0.875);
  CHECK_THROWS_AS(auc_of({1, 2}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(auc_of({1, 2}, {0}), std::invalid_argument);
}

TEST_CASE("auc properties on random instances") {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(u(rng) * 199);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 2 == 0 ? std::floor(u(rng) * 10.0) : u(rng);
      y[i] = u(rng) < 0.4;
    }
    y[0] = 0;
    y[1] = 1;
    const double a = auc(s, y);
    CHECK(a == auc_pairwise(s, y));

    std::vector<double> mono(n);
    std::transform(s.begin(), s.end(), mono.begin(), [](double v) { return std::exp(3.0 * v) - 7.0; });
    CHECK(auc(mono, y) == a);

    std::vector<std::uint8_t> flipped(n);
    std::transform(y.begin(), y.end(), flipped.begin(), [](std::uint8_t v) { return std::uint8_t(v == 0); });
    CHECK(auc(s, flipped) == Approx(1.0 - a).epsilon(1e-12));
  }
}

TEST_CASE("random scores give chance-level auc") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(2000);
  std::vector<std::uint8_t> y(2000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = i % 2;
  }
  CHECK(std::abs(100.0 * auc(s, y) - 50.0) < 3.0);
}

TEST_CASE("scores at the posterior mean") {
  const Model m = rigged_model();
  const LatentPriors priors = LatentPriors::antipodal(3, 10.0);
  const Eigen::Vector4d x(0.2, 0.4, 0.6, 0.8);
  const ScoreRecord r = score_sample(x, m, priors, 7, Role::SeenAnomaly);
  CHECK(r.id == 7);
  CHECK(r.role == Role::SeenAnomaly);
  CHECK(r.kl == Approx(0.0).epsilon(1e-9));
  const Eigen::VectorXd xr = decode(UnitVector::normalized(Eigen::Vector3d(1, 0, 0)), Domain::Target, m.dec);
  CHECK(r.rl == Approx(0.5 * (x - xr).squaredNorm()).epsilon(1e-12));
  CHECK(r.elbo == r.rl + r.kl);
  CHECK(r.get(ScoreType::RL) == r.rl);
  CHECK(r.get(ScoreType::ELBO) == r.elbo);
}

TEST_CASE("evaluate_run") {
  const Model m = Model::init(rigged_model().arch, 4, 10.0);
  const LatentPriors priors = LatentPriors::antipodal(3, 10.0);
  Dataset d = three_roles(40, 1);
  const RunEvaluation a = evaluate_run(m, Variant::PropWithWeights, priors, d);
  const RunEvaluation b = evaluate_run(m, Variant::PropWithWeights, priors, d);
  REQUIRE(a.rows.size() == 3);
  CHECK(a.rows[2].score == ScoreType::ELBO);
  CHECK(a.scores.size() == 120);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].seen == b.rows[i].seen);
    CHECK(a.rows[i].unseen == b.rows[i].unseen);
    CHECK(a.rows[i].seen >= 0.0);
    CHECK(a.rows[i].seen <= 100.0);
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    const ScoreRecord one = score_sample(d[i].x, m, priors);
    CHECK(a.scores[i].elbo == Approx(one.elbo).epsilon(1e-12));
    CHECK(a.scores[i].id == i);
  }
  CHECK(evaluate_run(m, Variant::Vae, priors, d).rows.size() == 1);
  std::erase_if(d, [](const LabeledSample& s) { return s.role == Role::UnseenAnomaly; });
  CHECK_THROWS_WITH_AS(evaluate_run(m, Variant::Vae, priors, d), doctest::Contains("unseen_anomaly"),
                       std::invalid_argument);
}

TEST_CASE("result table") {
  ResultTable t;
  for (int c : {1, 2, 3}) {
    for (std::uint64_t seed : {0, 1}) {
      t.add(Variant::PropWithWeights, c, seed,
            {{ScoreType::RL, 60.0 + c, 50.0}, {ScoreType::KL, 70.0, 50.0},
             {ScoreType::ELBO, 80.0 + c + 2.0 * static_cast<double>(seed), 55.0}});
    }
    t.add(Variant::Vae, c, 0, {{ScoreType::RL, 90.0, 91.0}});
  }
  const auto cell = t.cell(Variant::PropWithWeights, 2, ScoreType::ELBO, AnomalyKind::Seen);
  REQUIRE(cell.has_value());
  CHECK(cell->mean == 83.0);
  CHECK(cell->std == Approx(std::sqrt(2.0)));
  CHECK(cell->n == 2);
  CHECK(*t.average(Variant::PropWithWeights, ScoreType::ELBO, AnomalyKind::Seen) == Approx(83.0));
  CHECK(*t.average(Variant::Vae, ScoreType::RL, AnomalyKind::Unseen) == 91.0);
  CHECK_FALSE(t.cell(Variant::Vae, 1, ScoreType::ELBO, AnomalyKind::Seen).has_value());
  CHECK(t.variants() == std::vector<Variant>{Variant::PropWithWeights, Variant::Vae});
  CHECK(t.cases() == std::vector<int>{1, 2, 3});

  const std::string md = t.render_markdown(AnomalyKind::Seen);
  CHECK(md.find("| Case 2 |") != std::string::npos);
  CHECK(md.find("83.0 ± 1.4") != std::string::npos);
  CHECK(md.find("| Avg. |") != std::string::npos);

  const auto j = nlohmann::json::parse(t.to_json());
  CHECK(j["seen"]["prop-w-weights"]["ELBO"]["case_1"]["mean"] == 82.0);
  CHECK(j["unseen"]["vae"]["RL"]["avg"] == 91.0);

  ResultTable single;
  single.add(Variant::Vae, 1, 0, {{ScoreType::RL, 88.24, 70.0}});
  CHECK(single.render_markdown(AnomalyKind::Seen).find("±") == std::string::npos);
  CHECK(single.render_markdown(AnomalyKind::Seen).find("88.2") != std::string::npos);
}
