#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "dasad/verify.hpp"

using namespace dasad;

namespace {

VerifyOptions quick() {
  VerifyOptions o;
  o.kl_mc_draws = 50000;
  o.oracle_samples = 2000;
  o.auc_instances = 20;
  return o;
}

}  // namespace

TEST_CASE("every numerical check passes") {
  const auto checks = run_verify_suite();
  std::ostringstream os;
  const bool ok = print_checks(checks, os);
  MESSAGE(os.str());
  CHECK(ok);
  CHECK(checks.size() > 20);
  const auto j = nlohmann::json::parse(checks_json(checks));
  CHECK(j["all_pass"] == true);
  CHECK(j["checks"].size() == checks.size());
}

TEST_CASE("a wrong KL is caught and named") {
  VerifyOptions o = quick();
  o.kl = [](const VmfDist& q, const VmfDist& p) { return -vmf_kl(q, p); };
  const auto checks = check_vmf_kl_monte_carlo(o);
  std::ostringstream os;
  CHECK_FALSE(print_checks(checks, os));
  CHECK(os.str().find("FAIL vmf_kl_mc_m10_kappa50") != std::string::npos);
}

TEST_CASE("a loose finite-difference tolerance cannot hide a wrong step") {
  VerifyOptions o = quick();
  o.fd_step = 1.0;
  bool any_fail = false;
  for (const auto& c : check_network_gradients(o)) any_fail = any_fail || !c.pass;
  CHECK(any_fail);
}

TEST_CASE("verification is repeatable") {
  const auto a = check_sampler_resultant(quick());
  const auto b = check_sampler_resultant(quick());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].value == b[i].value);
  }
  const auto oracle = check_synthetic_oracle(quick());
  REQUIRE(oracle.size() == 2);
  CHECK(oracle[0].name == "oracle_weighted_vae_loss");
}
