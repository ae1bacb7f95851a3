#pragma once

// Two-class vMF-VAE ELBO, domain log-likelihood, importance weights for the
// missing (anomaly, target) stratum, and the combined min-max objective with
// analytic gradients.

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dasad/distributions.hpp"
#include "dasad/networks.hpp"
#include "dasad/sample.hpp"

namespace dasad {

/// Class proportions p_c, shared by both domains.
struct ClassPriors {
  double p_normal = 0.5;
  double p_anomaly = 0.5;

  ClassPriors(double pn, double pa);
  static ClassPriors from_counts(std::size_t n_normal, std::size_t n_anomaly);
};

struct LatentPriors {
  VmfDist normal;
  VmfDist anomaly;

  LatentPriors(VmfDist n, VmfDist a);
  /// prior_N = kappa at +e1, prior_A = kappa at -e1.
  static LatentPriors antipodal(int latent_dim, double kappa);
  const VmfDist& for_class(ClassLabel c) const { return c == ClassLabel::Normal ? normal : anomaly; }
  int dim() const { return normal.dim(); }
};

/// One posterior draw z = w mu + sqrt(1 - w^2) v. Gradients flow through mu
/// only; (w, v) are held constant.
struct PosteriorNoise {
  double cosine = 1.0;
  Eigen::VectorXd tangent;
};

PosteriorNoise draw_noise(const Eigen::Ref<const Eigen::VectorXd>& mu, double kappa, Rng& rng);
Eigen::VectorXd apply_noise(const Eigen::Ref<const Eigen::VectorXd>& mu, const PosteriorNoise& n);

/// Posterior draws for every column of every stratum. Missing draws are taken
/// from `rng` (and recorded) on first use; recorded draws are replayed.
struct NoiseBank {
  std::array<std::vector<PosteriorNoise>, 4> draws;
  Rng* rng = nullptr;

  explicit NoiseBank(Rng* r = nullptr) : rng(r) {}
  const PosteriorNoise& get(Stratum s, Eigen::Index col, const Eigen::Ref<const Eigen::VectorXd>& mu,
                            double kappa);
};

/// Samples of each stratum stored as matrix columns. `at` holds held-out target
/// anomalies and is used only for oracle evaluation of the ideal loss.
struct StratifiedBatch {
  std::array<Eigen::MatrixXd, 4> x;

  Eigen::MatrixXd& operator[](Stratum s) { return x[static_cast<int>(s)]; }
  const Eigen::MatrixXd& operator[](Stratum s) const { return x[static_cast<int>(s)]; }
  Eigen::Index count(Stratum s) const { return x[static_cast<int>(s)].cols(); }

  static StratifiedBatch from_samples(const std::vector<const LabeledSample*>& samples, int input_dim);
};

/// w~ = 1/2 min{w, 2}.
double clamp_weight(double w);

/// Floor/ceiling applied to classifier probabilities before forming w_vae.
inline constexpr double kProbEps = 1e-7;
/// Bound on log-density differences before exponentiating w_dom.
inline constexpr double kLogRatioClip = 50.0;

// ---- single-sample terms ---------------------------------------------------------------

/// ELBO: E_q[log N(x; x~, I)] - KL[q(z|x) || p(z|c)], one posterior draw, Gaussian
/// normalizing constant dropped (perfect reconstruction gives 0 log-likelihood).
double vae_loss(const Eigen::VectorXd& x, ClassLabel c, Domain d, const Model& model,
                const LatentPriors& priors, const PosteriorNoise& noise);

/// log p(d | z) at one posterior draw. Requires a domain classifier.
double domain_loss(const Eigen::VectorXd& x, Domain d, const Model& model, const PosteriorNoise& noise);

/// Raw w_vae = P(T|z) / P(S|z) with the probability kept inside [eps, 1 - eps].
double compute_w_vae(const Eigen::VectorXd& x, const Model& model, const PosteriorNoise& noise);
double w_vae_from_prob(double prob_target);

/// Raw w_dom = p_A p(z|A) / (p_N p(z|N)) at one posterior draw.
double compute_w_dom(const Eigen::VectorXd& x, const Model& model, const LatentPriors& priors,
                     const ClassPriors& class_priors, const PosteriorNoise& noise);
double w_dom_at(const Eigen::Ref<const Eigen::VectorXd>& z, const LatentPriors& priors,
                const ClassPriors& class_priors);

// ---- batch objective -------------------------------------------------------------------

enum class WeightMode {
  None,      // no surrogate (A,T) term, no (1 + w_dom) factor
  Zero,      // surrogate terms evaluated with w~ = 0
  Model,     // weights estimated from the domain classifier and latent priors
  Provided,  // caller-supplied weights (oracle checks)
};

struct ObjectiveOptions {
  double lambda_dom = 0.01;
  bool adversarial = true;
  WeightMode weights = WeightMode::Model;
  bool clamp = true;
  /// Multipliers of the per-stratum means, indexed by Stratum. Defaults to
  /// {p_N/2, p_A/2, p_N/2, p_A/2} when unset.
  std::optional<std::array<double, 4>> stratum_scale;
  /// Per-column weights for WeightMode::Provided (raw, before optional clamp).
  Eigen::VectorXd provided_w_vae;  // one per (A,S) column
  Eigen::VectorXd provided_w_dom;  // one per (N,T) column
};

struct LossBreakdown {
  double recon = 0.0;   // -(weighted reconstruction log-likelihood)
  double kl = 0.0;      // weighted KL
  double domain = 0.0;  // weighted domain log-likelihood
  double w_vae_mean = 0.0;
  double w_dom_mean = 0.0;
  double total = 0.0;  // recon + kl + lambda_dom * domain
  double lambda_dom = 0.0;
  double clamped_fraction = 0.0;  // share of raw weights >= 2
  bool complete = true;           // every required stratum was non-empty

  double vae_objective() const { return -(recon + kl); }
};

/// Evaluates the objective on one batch. If grad is non-null it receives
/// d total / d theta for encoder and decoder parameters and
/// d(-domain) / d theta for the domain classifier (ascent on the domain
/// log-likelihood); the encoder sees the classifier gradient through a
/// gradient-reversal layer scaled by lambda_dom. Importance weights are
/// constants for differentiation.
LossBreakdown evaluate_objective(const StratifiedBatch& batch, const Model& model,
                                 const LatentPriors& priors, const ClassPriors& class_priors,
                                 const ObjectiveOptions& opts, NoiseBank& noise, Model* grad = nullptr);

/// Weighted three-stratum ELBO (higher is better).
double weighted_vae_objective(const StratifiedBatch& batch, const Model& model, const LatentPriors& priors,
                              const ClassPriors& class_priors, const ObjectiveOptions& opts, NoiseBank& noise);

/// Weighted three-stratum domain log-likelihood.
double weighted_domain_objective(const StratifiedBatch& batch, const Model& model,
                                 const LatentPriors& priors, const ClassPriors& class_priors,
                                 const ObjectiveOptions& opts, NoiseBank& noise);

/// total = -weighted_vae_objective + lambda_dom * weighted_domain_objective.
LossBreakdown total_objective(const StratifiedBatch& batch, const Model& model, const LatentPriors& priors,
                              const ClassPriors& class_priors, const ObjectiveOptions& opts,
                              NoiseBank& noise, Model* grad = nullptr);

}  // namespace dasad
