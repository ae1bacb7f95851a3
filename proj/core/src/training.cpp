#include "dasad/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dasad/data.hpp"

namespace dasad {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void add_into(LossBreakdown& acc, const LossBreakdown& b) {
  acc.recon += b.recon;
  acc.kl += b.kl;
  acc.domain += b.domain;
  acc.w_vae_mean += b.w_vae_mean;
  acc.w_dom_mean += b.w_dom_mean;
  acc.total += b.total;
  acc.clamped_fraction += b.clamped_fraction;
  acc.complete = acc.complete && b.complete;
}

void scale_by(LossBreakdown& acc, double s) {
  acc.recon *= s;
  acc.kl *= s;
  acc.domain *= s;
  acc.w_vae_mean *= s;
  acc.w_dom_mean *= s;
  acc.total *= s;
  acc.clamped_fraction *= s;
}

}  // namespace

std::string_view variant_id(Variant v) {
  switch (v) {
    case Variant::Vae: return "vae";
    case Variant::TwoClassVmfVae: return "2c-vmf-vae";
    case Variant::TwoClassVmfVaeDa: return "2c-vmf-vae-da";
    case Variant::PropWithoutWeights: return "prop-wo-weights";
    case Variant::PropWithWeights: return "prop-w-weights";
  }
  return "?";
}

std::string_view variant_label(Variant v) {
  switch (v) {
    case Variant::Vae: return "VAE";
    case Variant::TwoClassVmfVae: return "2C-vMF-VAE";
    case Variant::TwoClassVmfVaeDa: return "2C-vMF-VAE-da";
    case Variant::PropWithoutWeights: return "Prop. w/o weights";
    case Variant::PropWithWeights: return "Prop. w/ weights";
  }
  return "?";
}

Variant variant_from_id(std::string_view id) {
  for (Variant v : kAllVariants) {
    if (variant_id(v) == id) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(id) + "'");
}

TrainConfig TrainConfig::defaults(Variant v) {
  TrainConfig c;
  c.variant = v;
  if (v == Variant::Vae) {
    c.epochs = 200;
    c.learning_rate = 0.01;
  }
  return c;
}

Architecture TrainConfig::architecture(int input_dim) const {
  Architecture a;
  a.input_dim = input_dim;
  a.latent_dim = latent_dim;
  a.hidden_units = hidden_units;
  a.activation = activation;
  a.decoder_conditioned = variant == Variant::PropWithoutWeights || variant == Variant::PropWithWeights;
  a.domain_classifier = variant == Variant::TwoClassVmfVaeDa || a.decoder_conditioned;
  return a;
}

ObjectiveOptions TrainConfig::objective_options() const {
  ObjectiveOptions o;
  o.lambda_dom = lambda_dom;
  o.clamp = clamp;
  o.weights = WeightMode::None;
  switch (variant) {
    case Variant::Vae:
      o.adversarial = false;
      o.stratum_scale = std::array<double, 4>{0.0, 0.0, 1.0, 0.0};
      break;
    case Variant::TwoClassVmfVae: o.adversarial = false; break;
    case Variant::TwoClassVmfVaeDa:
    case Variant::PropWithoutWeights: o.adversarial = true; break;
    case Variant::PropWithWeights:
      o.adversarial = true;
      o.weights = force_zero_weights ? WeightMode::Zero : WeightMode::Model;
      break;
  }
  return o;
}

std::vector<Stratum> TrainConfig::strata() const {
  if (variant == Variant::Vae) return {Stratum::NT};
  return {Stratum::NS, Stratum::AS, Stratum::NT};
}

void adam_step(Model& params, const Model& grads, AdamState& state, double lr, const AdamOptions& opts) {
  auto ps = params.parameters();
  const auto gs = grads.parameters();
  if (ps.size() != gs.size()) throw DimensionError("adam_step: parameter and gradient lists differ");
  if (state.m.empty()) {
    for (const auto& p : ps) {
      state.m.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.values.size())));
      state.v.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.values.size())));
    }
  }
  if (state.m.size() != ps.size()) throw DimensionError("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (gs[i].values.size() != ps[i].values.size() ||
        static_cast<std::size_t>(state.m[i].size()) != ps[i].values.size()) {
      throw DimensionError("adam_step: shape mismatch for " + ps[i].name);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!opts.update[static_cast<int>(ps[i].player)]) continue;
    const auto n = static_cast<Eigen::Index>(ps[i].values.size());
    Eigen::Map<Eigen::ArrayXd> theta(ps[i].values.data(), n);
    const Eigen::Map<const Eigen::ArrayXd> g(gs[i].values.data(), n);
    state.m[i] = opts.beta1 * state.m[i] + (1.0 - opts.beta1) * g;
    state.v[i] = opts.beta2 * state.v[i] + (1.0 - opts.beta2) * g.square();
    theta -= lr * (state.m[i] / bc1) / ((state.v[i] / bc2).sqrt() + opts.eps);
  }
}

StratifiedBatcher::StratifiedBatcher(const Dataset& data, std::vector<Stratum> strata, int batch_size,
                                     std::uint64_t seed)
    : data_(&data), strata_(std::move(strata)), batch_size_(batch_size), rng_(seed) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  for (std::size_t i = 0; i < data.size(); ++i) members_[static_cast<int>(stratum_of(data[i]))].push_back(i);
  std::size_t smallest = SIZE_MAX;
  for (Stratum s : strata_) {
    const auto n = members_[static_cast<int>(s)].size();
    if (n == 0) throw std::invalid_argument("stratum " + std::string(to_string(s)) + " is empty");
    smallest = std::min(smallest, n);
  }
  batches_per_epoch_ = smallest / static_cast<std::size_t>(batch_size);
  if (batches_per_epoch_ == 0) {
    throw std::invalid_argument("smallest stratum holds " + std::to_string(smallest) +
                                " samples, fewer than the batch size " + std::to_string(batch_size));
  }
}

std::vector<StratifiedBatch> StratifiedBatcher::next_epoch() {
  const auto b = static_cast<Eigen::Index>(batch_size_);
  const Eigen::Index dim = data_->front().x.size();
  std::vector<StratifiedBatch> out(batches_per_epoch_);
  for (auto& batch : out) {
    for (auto& m : batch.x) m.resize(dim, 0);
  }
  for (Stratum s : strata_) {
    auto& idx = members_[static_cast<int>(s)];
    std::shuffle(idx.begin(), idx.end(), rng_);
    for (std::size_t k = 0; k < batches_per_epoch_; ++k) {
      Eigen::MatrixXd& m = out[k][s];
      m.resize(dim, b);
      for (Eigen::Index j = 0; j < b; ++j) m.col(j) = (*data_)[idx[k * batch_size_ + static_cast<std::size_t>(j)]].x;
    }
  }
  return out;
}

SeedLineage SeedLineage::derive(std::uint64_t root) {
  SeedLineage s;
  s.root = root;
  std::uint64_t state = root;
  s.init = splitmix64(state);
  s.batches = splitmix64(state);
  s.noise = splitmix64(state);
  return s;
}

LatentPriors priors_for(const TrainConfig& config) {
  return LatentPriors::antipodal(config.latent_dim, config.prior_kappa);
}

RunRecord train(const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  check_training_availability(data);
  const auto started = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.config = config;
  rec.seeds = SeedLineage::derive(config.seed);
  const int input_dim = static_cast<int>(data.front().x.size());
  rec.model = Model::init(config.architecture(input_dim), rec.seeds.init, config.prior_kappa);

  std::size_t n_normal_src = 0;
  std::size_t n_anomaly_src = 0;
  for (const auto& s : data) {
    const Stratum st = stratum_of(s);
    if (st == Stratum::NS) ++n_normal_src;
    if (st == Stratum::AS) ++n_anomaly_src;
  }
  if (config.variant != Variant::Vae || (n_normal_src > 0 && n_anomaly_src > 0)) {
    rec.class_priors = ClassPriors::from_counts(n_normal_src, n_anomaly_src);
  }

  StratifiedBatcher batcher(data, config.strata(), config.batch_size, rec.seeds.batches);
  const LatentPriors priors = priors_for(config);
  const ObjectiveOptions opts = config.objective_options();
  Rng noise_rng(rec.seeds.noise);
  AdamState adam;
  Model grad = rec.model.zeros_like();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    LossBreakdown acc;
    acc.lambda_dom = config.lambda_dom;
    const auto batches = batcher.next_epoch();
    for (const auto& batch : batches) {
      for (auto& p : grad.parameters()) std::fill(p.values.begin(), p.values.end(), 0.0);
      NoiseBank noise(&noise_rng);
      const LossBreakdown lb = evaluate_objective(batch, rec.model, priors, rec.class_priors, opts, noise, &grad);
      adam_step(rec.model, grad, adam, config.learning_rate);
      add_into(acc, lb);
    }
    scale_by(acc, 1.0 / static_cast<double>(batches.size()));
    rec.epochs.push_back({epoch, acc});
    if (on_epoch) on_epoch(rec.epochs.back());
  }
  rec.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

}  // namespace dasad
