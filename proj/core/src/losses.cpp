#include "dasad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dasad {

namespace {

constexpr std::array<Stratum, 4> kStrata{Stratum::NS, Stratum::AS, Stratum::NT, Stratum::AT};

ClassLabel class_of(Stratum s) {
  return (s == Stratum::NS || s == Stratum::NT) ? ClassLabel::Normal : ClassLabel::Anomaly;
}
Domain domain_of(Stratum s) {
  return (s == Stratum::NS || s == Stratum::AS) ? Domain::Source : Domain::Target;
}

const DomainClfParams& require_classifier(const Model& model) {
  if (!model.clf) throw std::invalid_argument("model has no domain classifier");
  return *model.clf;
}

Eigen::MatrixXd latent_draws(const EncoderForward& fw, Stratum s, NoiseBank& noise,
                             std::vector<double>& cosines) {
  Eigen::MatrixXd z(fw.mu.rows(), fw.mu.cols());
  cosines.resize(static_cast<std::size_t>(fw.mu.cols()));
  for (Eigen::Index j = 0; j < fw.mu.cols(); ++j) {
    const PosteriorNoise& n = noise.get(s, j, fw.mu.col(j), fw.kappa);
    z.col(j) = apply_noise(fw.mu.col(j), n);
    cosines[static_cast<std::size_t>(j)] = n.cosine;
  }
  return z;
}

}  // namespace

ClassPriors::ClassPriors(double pn, double pa) : p_normal(pn), p_anomaly(pa) {
  if (!(pn > 0.0) || !(pa > 0.0) || std::abs(pn + pa - 1.0) > 1e-12) {
    throw std::domain_error("ClassPriors: need p_N, p_A > 0 with p_N + p_A = 1");
  }
}

ClassPriors ClassPriors::from_counts(std::size_t n_normal, std::size_t n_anomaly) {
  if (n_normal == 0 || n_anomaly == 0) {
    throw std::domain_error("ClassPriors: both classes must be present in the source data");
  }
  const double total = static_cast<double>(n_normal + n_anomaly);
  const double pn = static_cast<double>(n_normal) / total;
  return ClassPriors(pn, 1.0 - pn);
}

LatentPriors::LatentPriors(VmfDist n, VmfDist a) : normal(std::move(n)), anomaly(std::move(a)) {
  if (normal.dim() != anomaly.dim()) throw DimensionError("LatentPriors: prior dimensions differ");
}

LatentPriors LatentPriors::antipodal(int latent_dim, double kappa) {
  const UnitVector e1 = UnitVector::basis(latent_dim, 0);
  return LatentPriors(VmfDist(e1, kappa), VmfDist(-e1, kappa));
}

PosteriorNoise draw_noise(const Eigen::Ref<const Eigen::VectorXd>& mu, double kappa, Rng& rng) {
  PosteriorNoise n;
  n.cosine = vmf_sample_cosine(static_cast<int>(mu.size()), kappa, rng);
  if (mu.squaredNorm() > 0.0) {
    n.tangent = sample_tangent(mu, rng);
  } else {
    n.tangent = sample_tangent(Eigen::VectorXd::Unit(mu.size(), 0), rng);
  }
  return n;
}

Eigen::VectorXd apply_noise(const Eigen::Ref<const Eigen::VectorXd>& mu, const PosteriorNoise& n) {
  return n.cosine * mu + std::sqrt(std::max(0.0, 1.0 - n.cosine * n.cosine)) * n.tangent;
}

const PosteriorNoise& NoiseBank::get(Stratum s, Eigen::Index col, const Eigen::Ref<const Eigen::VectorXd>& mu,
                                     double kappa) {
  auto& v = draws[static_cast<int>(s)];
  const auto idx = static_cast<std::size_t>(col);
  if (idx < v.size()) return v[idx];
  if (idx != v.size()) throw std::logic_error("NoiseBank: draws must be requested in column order");
  if (rng == nullptr) {
    throw std::logic_error("NoiseBank: no recorded draw for " + std::string(to_string(s)) + " column " +
                           std::to_string(col) + " and no generator attached");
  }
  v.push_back(draw_noise(mu, kappa, *rng));
  return v.back();
}

StratifiedBatch StratifiedBatch::from_samples(const std::vector<const LabeledSample*>& samples, int input_dim) {
  std::array<std::vector<const LabeledSample*>, 4> by;
  for (const auto* s : samples) by[static_cast<int>(stratum_of(*s))].push_back(s);
  StratifiedBatch b;
  for (int k = 0; k < 4; ++k) {
    b.x[k].resize(input_dim, static_cast<Eigen::Index>(by[k].size()));
    for (std::size_t j = 0; j < by[k].size(); ++j) {
      if (by[k][j]->x.size() != input_dim) throw DimensionError("StratifiedBatch: sample width mismatch");
      b.x[k].col(static_cast<Eigen::Index>(j)) = by[k][j]->x;
    }
  }
  return b;
}

double clamp_weight(double w) {
  if (!(w >= 0.0)) throw std::domain_error("clamp_weight: weight must be >= 0");
  return 0.5 * std::min(w, 2.0);
}

double w_vae_from_prob(double prob_target) {
  const double p = std::clamp(prob_target, kProbEps, 1.0 - kProbEps);
  return p / (1.0 - p);
}

double w_dom_at(const Eigen::Ref<const Eigen::VectorXd>& z, const LatentPriors& priors,
                const ClassPriors& class_priors) {
  const double log_ratio = std::log(class_priors.p_anomaly) - std::log(class_priors.p_normal) +
                           vmf_log_pdf_unchecked(priors.anomaly, z) - vmf_log_pdf_unchecked(priors.normal, z);
  return std::exp(std::clamp(log_ratio, -kLogRatioClip, kLogRatioClip));
}

double vae_loss(const Eigen::VectorXd& x, ClassLabel c, Domain d, const Model& model,
                const LatentPriors& priors, const PosteriorNoise& noise) {
  const auto act = model.arch.activation;
  const VmfDist q = encode(x, model.enc, act);
  const Eigen::VectorXd z = apply_noise(q.mu.coords(), noise);
  const Eigen::VectorXd recon = decode_raw(z, d, model.dec, act);
  const double log_lik = -0.5 * (x - recon).squaredNorm();
  return log_lik - vmf_kl(q, priors.for_class(c));
}

double domain_loss(const Eigen::VectorXd& x, Domain d, const Model& model, const PosteriorNoise& noise) {
  const auto& clf = require_classifier(model);
  const auto act = model.arch.activation;
  const VmfDist q = encode(x, model.enc, act);
  const Eigen::VectorXd z = apply_noise(q.mu.coords(), noise);
  const double logit = classifier_forward(clf, Eigen::MatrixXd(z), act).logit[0];
  return d == Domain::Target ? log_logistic(logit) : log_logistic(-logit);
}

double compute_w_vae(const Eigen::VectorXd& x, const Model& model, const PosteriorNoise& noise) {
  const auto& clf = require_classifier(model);
  const VmfDist q = encode(x, model.enc, model.arch.activation);
  return w_vae_from_prob(domain_prob_raw(apply_noise(q.mu.coords(), noise), clf, model.arch.activation));
}

double compute_w_dom(const Eigen::VectorXd& x, const Model& model, const LatentPriors& priors,
                     const ClassPriors& class_priors, const PosteriorNoise& noise) {
  const VmfDist q = encode(x, model.enc, model.arch.activation);
  return w_dom_at(apply_noise(q.mu.coords(), noise), priors, class_priors);
}

LossBreakdown evaluate_objective(const StratifiedBatch& batch, const Model& model,
                                 const LatentPriors& priors, const ClassPriors& class_priors,
                                 const ObjectiveOptions& opts, NoiseBank& noise, Model* grad) {
  const auto act = model.arch.activation;
  const int m = model.arch.latent_dim;
  if (priors.dim() != m) throw DimensionError("priors do not match the latent dimension");
  if (opts.adversarial) {
    require_classifier(model);
    if (opts.lambda_dom < 0.0) throw std::domain_error("lambda_dom must be >= 0");
  }
  if (opts.weights == WeightMode::Model && !model.clf) {
    throw std::invalid_argument("WeightMode::Model needs a domain classifier");
  }
  const bool weighted = opts.weights != WeightMode::None;
  const std::array<double, 4> scale = opts.stratum_scale.value_or(std::array<double, 4>{
      0.5 * class_priors.p_normal, 0.5 * class_priors.p_anomaly, 0.5 * class_priors.p_normal,
      0.5 * class_priors.p_anomaly});

  if (opts.weights == WeightMode::Provided) {
    if (opts.provided_w_vae.size() != batch.count(Stratum::AS) ||
        opts.provided_w_dom.size() != batch.count(Stratum::NT)) {
      throw DimensionError("provided weights do not match the (A,S) / (N,T) batch sizes");
    }
  }

  LossBreakdown out;
  out.lambda_dom = opts.lambda_dom;
  double recon_ll = 0.0;
  double kl_sum = 0.0;
  double dom_sum = 0.0;
  double w_vae_acc = 0.0;
  double w_dom_acc = 0.0;
  std::size_t w_vae_n = 0;
  std::size_t w_dom_n = 0;
  std::size_t clamped = 0;
  std::size_t raw_n = 0;

  auto applied = [&](double raw) {
    ++raw_n;
    if (raw >= 2.0) ++clamped;
    return opts.clamp ? clamp_weight(raw) : raw;
  };

  std::vector<double> cosines;
  for (Stratum s : kStrata) {
    const Eigen::MatrixXd& x = batch[s];
    const Eigen::Index n = x.cols();
    const double sc = scale[static_cast<int>(s)];
    if (n == 0) {
      if (sc != 0.0 && s != Stratum::AT) out.complete = false;
      continue;
    }
    if (sc == 0.0) continue;
    const double coef = sc / static_cast<double>(n);
    const ClassLabel c = class_of(s);
    const Domain d = domain_of(s);
    const VmfDist& prior = priors.for_class(c);

    const EncoderForward enc = encoder_forward(model.enc, x, act);
    const Eigen::MatrixXd z = latent_draws(enc, s, noise, cosines);

    // Domain classifier (needed for the domain loss and for w_vae).
    std::optional<ClassifierForward> cls;
    if (opts.adversarial || (s == Stratum::AS && opts.weights == WeightMode::Model)) {
      cls = classifier_forward(*model.clf, z, act);
    }

    // Per-column weights: surrogate (A,T) weight on (A,S), (1 + w_dom) on (N,T).
    Eigen::VectorXd w_sur = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w_dom = Eigen::VectorXd::Zero(n);
    const bool has_surrogate = weighted && s == Stratum::AS;
    const bool has_dom_weight = weighted && s == Stratum::NT;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (has_surrogate) {
        double w = 0.0;
        if (opts.weights == WeightMode::Model) w = applied(w_vae_from_prob(cls->prob[j]));
        else if (opts.weights == WeightMode::Provided) w = applied(opts.provided_w_vae[j]);
        w_sur[j] = w;
        w_vae_acc += w;
        ++w_vae_n;
      }
      if (has_dom_weight) {
        double w = 0.0;
        if (opts.weights == WeightMode::Model) w = applied(w_dom_at(z.col(j), priors, class_priors));
        else if (opts.weights == WeightMode::Provided) w = applied(opts.provided_w_dom[j]);
        w_dom[j] = w;
        w_dom_acc += w;
        ++w_dom_n;
      }
    }

    // KL to the class prior, shared by the (A,S) term and its (A,T) surrogate.
    Eigen::MatrixXd g_mu = Eigen::MatrixXd::Zero(m, n);
    double g_kappa = 0.0;
    VmfKlGrad klg;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double kl = vmf_kl_raw(enc.mu.col(j), enc.kappa, prior, grad ? &klg : nullptr);
      const double mult = coef * (1.0 + w_sur[j]);
      kl_sum += mult * kl;
      if (grad) {
        g_mu.col(j) += mult * klg.d_mu_q;
        g_kappa += mult * klg.d_kappa_q;
      }
    }

    // Reconstruction under the true domain label.
    Eigen::MatrixXd g_z = Eigen::MatrixXd::Zero(m, n);
    {
      const DecoderForward dec = decoder_forward(model.dec, z, d, act);
      const Eigen::MatrixXd diff = x - dec.out;
      const Eigen::RowVectorXd ll = -0.5 * diff.colwise().squaredNorm();
      recon_ll += coef * ll.sum();
      if (grad) g_z += decoder_backward(model.dec, dec, (-coef) * diff, act, grad->dec);
    }
    // Surrogate reconstruction of the missing (A,T) stratum: source anomalies decoded as target.
    if (has_surrogate) {
      const DecoderForward dec = decoder_forward(model.dec, z, Domain::Target, act);
      const Eigen::MatrixXd diff = x - dec.out;
      const Eigen::RowVectorXd ll = -0.5 * diff.colwise().squaredNorm();
      recon_ll += coef * ll.dot(w_sur.transpose());
      if (grad) {
        const Eigen::MatrixXd g_out = (-coef) * (diff.array().rowwise() * w_sur.transpose().array()).matrix();
        g_z += decoder_backward(model.dec, dec, g_out, act, grad->dec);
      }
    }

    if (opts.adversarial) {
      const double y = d == Domain::Target ? 1.0 : 0.0;
      Eigen::RowVectorXd g_logit(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double t = cls->logit[j];
        const double lp = d == Domain::Target ? log_logistic(t) : log_logistic(-t);
        const double factor = coef * (1.0 + w_dom[j]);
        dom_sum += factor * lp;
        g_logit[j] = -factor * (y - cls->prob[j]);  // d(-domain)/d logit
      }
      if (grad) {
        const Eigen::MatrixXd g_z_clf = classifier_backward(*model.clf, z, *cls, g_logit, act, *grad->clf);
        g_z += grad_reverse(g_z_clf, opts.lambda_dom);
      }
    }

    if (grad) {
      for (Eigen::Index j = 0; j < n; ++j) g_mu.col(j) += cosines[static_cast<std::size_t>(j)] * g_z.col(j);
      encoder_backward(model.enc, x, enc, g_mu, g_kappa, act, grad->enc);
    }
  }

  out.recon = -recon_ll;
  out.kl = kl_sum;
  out.domain = opts.adversarial ? dom_sum : 0.0;
  out.w_vae_mean = w_vae_n ? w_vae_acc / static_cast<double>(w_vae_n) : 0.0;
  out.w_dom_mean = w_dom_n ? w_dom_acc / static_cast<double>(w_dom_n) : 0.0;
  out.clamped_fraction = raw_n ? static_cast<double>(clamped) / static_cast<double>(raw_n) : 0.0;
  out.total = out.recon + out.kl + opts.lambda_dom * out.domain;
  return out;
}

double weighted_vae_objective(const StratifiedBatch& batch, const Model& model, const LatentPriors& priors,
                              const ClassPriors& class_priors, const ObjectiveOptions& opts, NoiseBank& noise) {
  ObjectiveOptions o = opts;
  o.adversarial = false;  // w_vae still reads the classifier in WeightMode::Model
  return evaluate_objective(batch, model, priors, class_priors, o, noise).vae_objective();
}

double weighted_domain_objective(const StratifiedBatch& batch, const Model& model,
                                 const LatentPriors& priors, const ClassPriors& class_priors,
                                 const ObjectiveOptions& opts, NoiseBank& noise) {
  ObjectiveOptions o = opts;
  o.adversarial = true;
  return evaluate_objective(batch, model, priors, class_priors, o, noise).domain;
}

LossBreakdown total_objective(const StratifiedBatch& batch, const Model& model, const LatentPriors& priors,
                              const ClassPriors& class_priors, const ObjectiveOptions& opts,
                              NoiseBank& noise, Model* grad) {
  return evaluate_objective(batch, model, priors, class_priors, opts, noise, grad);
}

}  // namespace dasad
