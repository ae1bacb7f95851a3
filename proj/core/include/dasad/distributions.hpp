#pragma once

// Hyperspherical (von Mises-Fisher) and diagonal-Gaussian latent families:
// normalizers, densities, closed-form KL divergences and an exact sampler.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dasad {

using Rng = std::mt19937_64;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Tolerance on the Euclidean norm of a UnitVector.
inline constexpr double kUnitNormTolerance = 1e-9;

/// A point on the unit hypersphere S^{m-1}.
class UnitVector {
 public:
  /// Throws std::domain_error unless |coords| == 1 within kUnitNormTolerance.
  explicit UnitVector(Eigen::VectorXd coords);

  /// Projects v onto the sphere. Throws std::domain_error for the zero vector.
  static UnitVector normalized(const Eigen::VectorXd& v);
  /// The i-th standard basis vector of R^m.
  static UnitVector basis(int m, int i);

  const Eigen::VectorXd& coords() const { return coords_; }
  int dim() const { return static_cast<int>(coords_.size()); }
  double dot(const UnitVector& other) const;
  UnitVector operator-() const;

 private:
  struct Unchecked {};
  UnitVector(Eigen::VectorXd coords, Unchecked) : coords_(std::move(coords)) {}
  Eigen::VectorXd coords_;
};

/// von Mises-Fisher distribution with mean direction mu and concentration kappa >= 0.
struct VmfDist {
  UnitVector mu;
  double kappa = 0.0;

  VmfDist(UnitVector mu_, double kappa_);
  int dim() const { return mu.dim(); }
};

/// Diagonal Gaussian N(mean, diag(exp(log_var))).
struct GaussianDiag {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_var;

  GaussianDiag(Eigen::VectorXd mean_, Eigen::VectorXd log_var_);
  int dim() const { return static_cast<int>(mean.size()); }
};

/// log I_nu(x) for nu >= 0, x >= 0, stable for x up to ~1e5.
double log_bessel_i(double nu, double x);

/// log C_m(kappa), C_m(k) = k^{m/2-1} / ((2 pi)^{m/2} I_{m/2-1}(k)).
/// Throws std::domain_error if m < 2 or kappa < 0.
double vmf_log_norm_const(int m, double kappa);

/// A_m(kappa) = I_{m/2}(kappa) / I_{m/2-1}(kappa), the mean resultant length.
double vmf_mean_resultant(int m, double kappa);

/// dA_m/dkappa = 1 - A^2 - (m-1)/kappa * A.
double vmf_mean_resultant_derivative(int m, double kappa);

double vmf_log_pdf(const VmfDist& d, const UnitVector& x);

/// Density evaluation for an arbitrary vector x (no unit-norm check); used on
/// latent samples inside the loss, where x lies on the sphere up to rounding.
double vmf_log_pdf_unchecked(const VmfDist& d, const Eigen::Ref<const Eigen::VectorXd>& x);

/// KL[q || p] in closed form. Clamped at 0 against rounding.
double vmf_kl(const VmfDist& q, const VmfDist& p);

/// Partial derivatives of KL[q || p] with the prior p fixed.
struct VmfKlGrad {
  Eigen::VectorXd d_mu_q;  // w.r.t. the (unnormalized-free) coordinates of mu_q
  double d_kappa_q = 0.0;
};
/// KL as a function of (mu_q, kappa_q) for fixed p. mu_q is taken as given
/// (it may sit off the sphere by rounding).
double vmf_kl_raw(const Eigen::Ref<const Eigen::VectorXd>& mu_q, double kappa_q, const VmfDist& p,
                  VmfKlGrad* grad = nullptr);

/// Cosine w = mu^T z of one draw, via Wood's rejection scheme.
double vmf_sample_cosine(int m, double kappa, Rng& rng);

/// Uniform unit vector orthogonal to mu.
Eigen::VectorXd sample_tangent(const Eigen::Ref<const Eigen::VectorXd>& mu, Rng& rng);

/// n independent draws; deterministic in rng_seed.
std::vector<UnitVector> vmf_sample(const VmfDist& d, std::uint64_t rng_seed, int n);

/// KL[N(mean, diag var) || N(0, I)].
double gaussian_kl_to_std(const GaussianDiag& g);

double gaussian_log_pdf(const GaussianDiag& g, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace dasad
