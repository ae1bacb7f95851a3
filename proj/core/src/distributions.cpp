#include "dasad/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace dasad {

namespace {

constexpr double kAsymptoticSwitch = 500.0;

void check_dim(int a, int b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

void check_order(int m, double kappa) {
  if (m < 2) throw std::domain_error("vMF dimension must be >= 2, got " + std::to_string(m));
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw std::domain_error("vMF concentration must be finite and >= 0, got " +
                            std::to_string(kappa));
  }
}

// Large-argument expansion is usable when 4 nu^2 is small against 8 x.
bool use_asymptotic(double nu, double x) {
  return x > kAsymptoticSwitch && 4.0 * nu * nu < 0.25 * x;
}

// sum_k (-1)^k a_k(nu) / x^k of the Hankel expansion of I_nu(x) e^{-x} sqrt(2 pi x).
double hankel_sum(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(next) >= std::abs(term)) break;  // asymptotic series started diverging
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// Ascending series evaluated in log space: I_nu(x) = (x/2)^nu sum_k (x^2/4)^k / (k! Gamma(nu+k+1)).
double log_bessel_series(double nu, double x) {
  const double log_q = 2.0 * std::log(0.5 * x);
  double log_term = -std::lgamma(nu + 1.0);
  double log_sum = log_term;
  for (int k = 0; k < 1'000'000; ++k) {
    log_term += log_q - std::log(k + 1.0) - std::log(nu + k + 1.0);
    const double hi = std::max(log_sum, log_term);
    log_sum = hi + std::log1p(std::exp(-std::abs(log_sum - log_term)));
    if (k + 1 > 0.5 * x && log_term < log_sum - 40.0) break;
  }
  return nu * std::log(0.5 * x) + log_sum;
}

// Gauss continued fraction for I_{nu+1}(x) / I_nu(x), modified Lentz.
double bessel_ratio_cf(double nu, double x) {
  constexpr double tiny = 1e-300;
  double f = tiny;
  double c = f;
  double d = 0.0;
  for (int j = 1; j < 2'000'000; ++j) {
    const double b = 2.0 * (nu + j) / x;
    d = b + d;
    if (std::abs(d) < tiny) d = tiny;
    c = b + 1.0 / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return f;  // b0 = 0: f = 1/(b1 + 1/(b2 + ...)) = I_{nu+1}/I_nu
}

}  // namespace

UnitVector::UnitVector(Eigen::VectorXd coords) : coords_(std::move(coords)) {
  const double n = coords_.norm();
  if (!(std::abs(n - 1.0) <= kUnitNormTolerance)) {
    throw std::domain_error("UnitVector: norm " + std::to_string(n) + " is not 1");
  }
}

UnitVector UnitVector::normalized(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("UnitVector: cannot normalize");
  return UnitVector(v / n, Unchecked{});
}

UnitVector UnitVector::basis(int m, int i) {
  if (i < 0 || i >= m) throw std::out_of_range("UnitVector::basis index");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
  e[i] = 1.0;
  return UnitVector(std::move(e), Unchecked{});
}

double UnitVector::dot(const UnitVector& other) const {
  check_dim(dim(), other.dim(), "UnitVector::dot");
  return coords_.dot(other.coords_);
}

UnitVector UnitVector::operator-() const { return UnitVector(-coords_, Unchecked{}); }

VmfDist::VmfDist(UnitVector mu_, double kappa_) : mu(std::move(mu_)), kappa(kappa_) {
  check_order(mu.dim(), kappa);
}

GaussianDiag::GaussianDiag(Eigen::VectorXd mean_, Eigen::VectorXd log_var_)
    : mean(std::move(mean_)), log_var(std::move(log_var_)) {
  check_dim(static_cast<int>(mean.size()), static_cast<int>(log_var.size()), "GaussianDiag");
  if (!log_var.allFinite()) throw std::domain_error("GaussianDiag: log_var must be finite");
}

double log_bessel_i(double nu, double x) {
  if (nu < 0.0 || x < 0.0) throw std::domain_error("log_bessel_i: requires nu >= 0 and x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (use_asymptotic(nu, x)) {
    return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(hankel_sum(nu, x));
  }
  return log_bessel_series(nu, x);
}

double vmf_log_norm_const(int m, double kappa) {
  check_order(m, kappa);
  const double nu = 0.5 * m - 1.0;
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  if (kappa == 0.0) {
    // Limit kappa -> 0: inverse surface area of S^{m-1}.
    return nu * std::log(2.0) + std::lgamma(nu + 1.0) - 0.5 * m * log_2pi;
  }
  return nu * std::log(kappa) - 0.5 * m * log_2pi - log_bessel_i(nu, kappa);
}

double vmf_mean_resultant(int m, double kappa) {
  check_order(m, kappa);
  if (kappa == 0.0) return 0.0;
  const double nu = 0.5 * m - 1.0;
  if (use_asymptotic(nu + 1.0, kappa)) return hankel_sum(nu + 1.0, kappa) / hankel_sum(nu, kappa);
  if (kappa <= 1e5) return bessel_ratio_cf(nu, kappa);
  return std::exp(log_bessel_i(nu + 1.0, kappa) - log_bessel_i(nu, kappa));
}

double vmf_mean_resultant_derivative(int m, double kappa) {
  check_order(m, kappa);
  if (kappa < 1e-6) return 1.0 / m;
  const double a = vmf_mean_resultant(m, kappa);
  return 1.0 - a * a - (m - 1.0) / kappa * a;
}

double vmf_log_pdf_unchecked(const VmfDist& d, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(d.dim(), static_cast<int>(x.size()), "vmf_log_pdf");
  return vmf_log_norm_const(d.dim(), d.kappa) + d.kappa * d.mu.coords().dot(x);
}

double vmf_log_pdf(const VmfDist& d, const UnitVector& x) {
  return vmf_log_pdf_unchecked(d, x.coords());
}

double vmf_kl_raw(const Eigen::Ref<const Eigen::VectorXd>& mu_q, double kappa_q, const VmfDist& p,
                  VmfKlGrad* grad) {
  const int m = p.dim();
  check_dim(m, static_cast<int>(mu_q.size()), "vmf_kl");
  check_order(m, kappa_q);
  const double a = vmf_mean_resultant(m, kappa_q);
  const double cos = p.mu.coords().dot(mu_q);
  const double kl = (kappa_q - p.kappa * cos) * a + vmf_log_norm_const(m, kappa_q) -
                    vmf_log_norm_const(m, p.kappa);
  if (grad != nullptr) {
    grad->d_mu_q = -p.kappa * a * p.mu.coords();
    grad->d_kappa_q = (kappa_q - p.kappa * cos) * vmf_mean_resultant_derivative(m, kappa_q);
  }
  return kl;
}

double vmf_kl(const VmfDist& q, const VmfDist& p) {
  check_dim(q.dim(), p.dim(), "vmf_kl");
  return std::max(0.0, vmf_kl_raw(q.mu.coords(), q.kappa, p));
}

double vmf_sample_cosine(int m, double kappa, Rng& rng) {
  check_order(m, kappa);
  const double dm1 = m - 1.0;
  // b = (-2k + sqrt(4k^2 + (m-1)^2)) / (m-1), written without cancellation.
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
  std::gamma_distribution<double> gamma(0.5 * dm1, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (;;) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double beta = g1 / (g1 + g2);
    const double w = (1.0 - (1.0 + b) * beta) / (1.0 - (1.0 - b) * beta);
    const double u = uniform(rng);
    if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

Eigen::VectorXd sample_tangent(const Eigen::Ref<const Eigen::VectorXd>& mu, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double mu_sq = mu.squaredNorm();
  for (;;) {
    Eigen::VectorXd g(mu.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
    g -= (g.dot(mu) / mu_sq) * mu;
    const double n = g.norm();
    if (n > 1e-8) return g / n;
  }
}

std::vector<UnitVector> vmf_sample(const VmfDist& d, std::uint64_t rng_seed, int n) {
  if (n < 1) throw std::invalid_argument("vmf_sample: n must be >= 1");
  Rng rng(rng_seed);
  std::vector<UnitVector> out;
  out.reserve(static_cast<std::size_t>(n));
  const Eigen::VectorXd& mu = d.mu.coords();
  for (int i = 0; i < n; ++i) {
    const double w = vmf_sample_cosine(d.dim(), d.kappa, rng);
    const Eigen::VectorXd v = sample_tangent(mu, rng);
    out.push_back(UnitVector::normalized(w * mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * v));
  }
  return out;
}

double gaussian_kl_to_std(const GaussianDiag& g) {
  const Eigen::ArrayXd lv = g.log_var.array();
  return 0.5 * (lv.exp() + g.mean.array().square() - 1.0 - lv).sum();
}

double gaussian_log_pdf(const GaussianDiag& g, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(g.dim(), static_cast<int>(x.size()), "gaussian_log_pdf");
  const Eigen::ArrayXd lv = g.log_var.array();
  const Eigen::ArrayXd diff = x.array() - g.mean.array();
  return -0.5 * (std::log(2.0 * std::numbers::pi) + lv + diff.square() / lv.exp()).sum();
}

}  // namespace dasad
