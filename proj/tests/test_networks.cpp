#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dasad/checkpoint.hpp"
#include "dasad/networks.hpp"
#include "dasad/verify.hpp"

using namespace dasad;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

Architecture small(bool conditioned = true, bool clf = true) {
  Architecture a;
  a.input_dim = 6;
  a.latent_dim = 3;
  a.hidden_units = 4;
  a.decoder_conditioned = conditioned;
  a.domain_classifier = clf;
  return a;
}

void fill(LayerParams& l, double w) {
  l.weight.setConstant(w);
  l.bias.setZero();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dasad_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("encoder toy forward pass") {
  Model m = Model::init(small(), 1, 10.0);
  fill(m.enc.hidden, 0.01);
  fill(m.enc.head_dir, 0.01);
  const VmfDist q = encode(Eigen::VectorXd::Ones(6), m.enc);
  const double s = 1.0 / std::sqrt(3.0);
  CHECK(q.mu.coords()[0] == Approx(s));
  CHECK(q.mu.coords()[2] == Approx(s));
  CHECK(q.kappa == Approx(10.0).epsilon(1e-12));

  m.enc.head_dir.weight(0, 0) = 0.5;
  const double h = std::tanh(0.06);
  Eigen::Vector3d u(0.5 * h + 0.03 * h, 0.04 * h, 0.04 * h);
  const VmfDist q2 = encode(Eigen::VectorXd::Ones(6), m.enc);
  CHECK((q2.mu.coords() - u.normalized()).norm() < 1e-14);
}

TEST_CASE("encoder output is unit norm and deterministic") {
  const Model m = Model::init(small(), 7, 5.0);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x[i] = u(rng);
    const VmfDist a = encode(x, m.enc);
    const VmfDist b = encode(x, m.enc);
    CHECK(std::abs(a.mu.coords().norm() - 1.0) < 1e-9);
    CHECK(a.mu.coords() == b.mu.coords());
  }
}

TEST_CASE("degenerate encoder direction") {
  Model m = Model::init(small(), 1, 10.0);
  m.enc.head_dir.weight.setZero();
  m.enc.head_dir.bias.setZero();
  CHECK_THROWS_WITH_AS(encode(Eigen::VectorXd::Ones(6), m.enc), "encode: degenerate direction", std::domain_error);
  const EncoderForward fw = encoder_forward(m.enc, Eigen::MatrixXd::Ones(6, 2), Activation::Tanh);
  CHECK(fw.mu.allFinite());
}

TEST_CASE("decoder") {
  Model m = Model::init(small(), 3, 10.0);
  const UnitVector z = UnitVector::normalized(Eigen::Vector3d(0.3, -0.2, 0.9));
  const Eigen::VectorXd s = decode(z, Domain::Source, m.dec);
  const Eigen::VectorXd t = decode(z, Domain::Target, m.dec);
  CHECK(s.size() == 6);
  CHECK((s.array() >= 0.0).all());
  CHECK((s.array() <= 1.0).all());
  CHECK((s - t).norm() > 1e-6);

  SUBCASE("zeroed domain columns remove the conditioning") {
    m.dec.hidden.weight.rightCols(2).setZero();
    CHECK(decode(z, Domain::Source, m.dec) == decode(z, Domain::Target, m.dec));
  }
  SUBCASE("zero weights give one half") {
    for (auto& p : m.parameters()) {
      if (p.player == Player::Decoder) std::fill(p.values.begin(), p.values.end(), 0.0);
    }
    CHECK((decode(z, Domain::Target, m.dec).array() == 0.5).all());
  }
  SUBCASE("unconditioned decoder takes the bare latent") {
    const Model u = Model::init(small(false, true), 3, 10.0);
    CHECK(u.dec.hidden.in() == 3);
    CHECK(decode(z, Domain::Source, u.dec) == decode(z, Domain::Target, u.dec));
    CHECK_FALSE(decoder_is_conditioned(u.dec, 3));
    CHECK(decoder_is_conditioned(m.dec, 3));
  }
}

TEST_CASE("domain classifier") {
  Model m = Model::init(small(), 4, 10.0);
  const UnitVector z = UnitVector::normalized(Eigen::Vector3d(1.0, 2.0, 2.0));
  const double p = domain_prob(z, *m.clf);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  // Hand evaluation.
  fill(m.clf->hidden, 0.2);
  fill(m.clf->head, -0.5);
  const double hid = std::tanh(0.2 * (1.0 + 2.0 + 2.0) / 3.0);
  CHECK(domain_prob(z, *m.clf) == Approx(1.0 / (1.0 + std::exp(0.5 * 4.0 * hid))).epsilon(1e-14));
  fill(m.clf->hidden, 0.0);
  fill(m.clf->head, 0.0);
  CHECK(domain_prob(z, *m.clf) == 0.5);
}

TEST_CASE("gradient reversal") {
  const Eigen::Vector3d g(1.0, -2.0, 0.5);
  CHECK(Eigen::Vector3d(grad_reverse(g, 0.0)).isZero());
  CHECK(Eigen::Vector3d(grad_reverse(g, 1.0)) == -g);
  CHECK(Eigen::Vector3d(grad_reverse(g, 0.25)) == -0.25 * g);
}

TEST_CASE("analytic network gradients match central differences") {
  for (const auto& c : check_network_gradients()) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("relu activation") {
  Architecture a = small();
  a.activation = Activation::Relu;
  const Model m = Model::init(a, 9, 3.0);
  const VmfDist q = encode(Eigen::VectorXd::LinSpaced(6, -1.0, 1.0), m.enc, Activation::Relu);
  CHECK(std::abs(q.mu.coords().norm() - 1.0) < 1e-12);
}

TEST_CASE("softplus helpers") {
  for (double y : {1e-3, 0.5, 10.0, 1e3}) CHECK(softplus(inverse_softplus(y)) == Approx(y).epsilon(1e-12));
  CHECK(log_logistic(-800.0) == Approx(-800.0));
  CHECK(log_logistic(800.0) == 0.0);
  CHECK(logistic(0.0) == 0.5);
}

TEST_CASE("parameter views") {
  Model m = Model::init(small(), 5, 10.0);
  std::size_t total = 0;
  for (const auto& p : m.parameters()) total += p.values.size();
  CHECK(total == m.parameter_count());
  CHECK(m.parameter_count() == (6 * 4 + 4) + (4 * 3 + 3) + 1 + (5 * 4 + 4) + (4 * 6 + 6) + (3 * 4 + 4) + (4 + 1));
  const Model z = m.zeros_like();
  for (const auto& p : z.parameters()) {
    for (double v : p.values) CHECK(v == 0.0);
  }
  CHECK(Model::init(small(), 5, 10.0).enc.hidden.weight == m.enc.hidden.weight);
  CHECK(Model::init(small(), 6, 10.0).enc.hidden.weight != m.enc.hidden.weight);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = temp_dir("ckpt");
  const Model m = Model::init(small(), 11, 4.0);
  save_checkpoint(m, dir / "model", 11);
  const LoadedCheckpoint l = load_checkpoint(dir / "model");
  CHECK(l.creation_seed == 11);
  CHECK(l.model.arch == m.arch);
  const auto a = m.parameters();
  const auto b = l.model.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(std::equal(a[i].values.begin(), a[i].values.end(), b[i].values.begin()));
  }

  SUBCASE("truncated archive is rejected") {
    fs::resize_file(dir / "model.bin", 16);
    CHECK_THROWS_AS(load_checkpoint(dir / "model"), std::runtime_error);
  }
  SUBCASE("missing manifest names the file") {
    fs::remove(dir / "model.json");
    try {
      load_checkpoint(dir / "model");
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("model.json") != std::string::npos);
    }
  }
}
