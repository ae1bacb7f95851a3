#pragma once

// Numerical self-checks: vMF KL against Monte Carlo, sampler moments, analytic
// gradients against central differences, rank AUC against the pairwise count.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dasad/distributions.hpp"

namespace dasad {

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;      // measured discrepancy
  double tolerance = 0.0;  // allowed discrepancy
  std::string detail;
};

using KlFunction = std::function<double(const VmfDist& q, const VmfDist& p)>;

struct VerifyOptions {
  std::uint64_t seed = 0;
  int kl_mc_draws = 200000;
  int resultant_draws = 100000;
  double fd_step = 1e-5;
  double fd_rel_tol = 1e-4;
  /// Denominator floor for relative gradient errors.
  double fd_floor = 1e-4;
  int auc_instances = 100;
  std::size_t oracle_samples = 10000;  // per stratum
  double oracle_rel_tol = 0.05;
  int auc_max_n = 200;
  KlFunction kl = [](const VmfDist& q, const VmfDist& p) { return vmf_kl(q, p); };
};

std::vector<CheckResult> check_vmf_kl_monte_carlo(const VerifyOptions& opts = {});
std::vector<CheckResult> check_sampler_resultant(const VerifyOptions& opts = {});
std::vector<CheckResult> check_network_gradients(const VerifyOptions& opts = {});
std::vector<CheckResult> check_objective_gradients(const VerifyOptions& opts = {});
/// Weighted three-stratum VAE and domain losses with true density-ratio weights
/// (unclamped) against the four-stratum losses on held-out (A,T) samples.
std::vector<CheckResult> check_synthetic_oracle(const VerifyOptions& opts = {});
std::vector<CheckResult> check_auc_oracle(const VerifyOptions& opts = {});

/// O(n^2) pairwise Mann-Whitney count; ties count one half.
double auc_pairwise(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive);

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opts = {});

/// One `PASS|FAIL name value tol detail` line per check; returns true if all pass.
bool print_checks(const std::vector<CheckResult>& checks, std::ostream& os);
std::string checks_json(const std::vector<CheckResult>& checks);

}  // namespace dasad
