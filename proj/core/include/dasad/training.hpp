#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dasad/losses.hpp"
#include "dasad/networks.hpp"
#include "dasad/sample.hpp"

namespace dasad {

enum class Variant : std::uint8_t {
  Vae = 0,                 // single-prior VAE on target normals only
  TwoClassVmfVae = 1,      // two-prior vMF-VAE on all available strata
  TwoClassVmfVaeDa = 2,    // + domain-adversarial classifier, unconditioned decoder
  PropWithoutWeights = 3,  // + domain-conditioned decoder
  PropWithWeights = 4,     // + importance weights for the missing (A,T) stratum
};

inline constexpr std::array<Variant, 5> kAllVariants{Variant::PropWithWeights, Variant::PropWithoutWeights,
                                                     Variant::TwoClassVmfVaeDa, Variant::TwoClassVmfVae,
                                                     Variant::Vae};

std::string_view variant_id(Variant v);     // e.g. "prop-w-weights"
std::string_view variant_label(Variant v);  // e.g. "Prop. w/ weights"
Variant variant_from_id(std::string_view id);

struct TrainConfig {
  Variant variant = Variant::PropWithWeights;
  int epochs = 500;
  double learning_rate = 1e-4;
  double lambda_dom = 0.01;
  int batch_size = 32;  // per stratum
  int latent_dim = 10;
  int hidden_units = 50;
  double prior_kappa = 10.0;
  std::uint64_t seed = 0;
  bool clamp = true;
  bool force_zero_weights = false;  // diagnostic: w~ = 0 inside the weighted code path
  Activation activation = Activation::Tanh;

  /// VAE: 200 epochs at lr 0.01; every other variant: 500 epochs at lr 1e-4, lambda_dom 0.01.
  static TrainConfig defaults(Variant v);
  Architecture architecture(int input_dim) const;
  ObjectiveOptions objective_options() const;
  /// Strata that feed the variant's batches.
  std::vector<Stratum> strata() const;
};

// ---- Adam --------------------------------------------------------------------------------

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::array<bool, 3> update{true, true, true};  // indexed by Player
};

struct AdamState {
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of params using grads (same shapes). State
/// is lazily sized on first use. Throws DimensionError on shape mismatch.
void adam_step(Model& params, const Model& grads, AdamState& state, double lr, const AdamOptions& opts = {});

// ---- batching ----------------------------------------------------------------------------

/// Each batch holds exactly `batch_size` samples of every requested stratum,
/// drawn by per-stratum shuffling each epoch. An epoch has
/// floor(min stratum size / batch_size) batches; leftovers are dropped.
class StratifiedBatcher {
 public:
  StratifiedBatcher(const Dataset& data, std::vector<Stratum> strata, int batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  std::vector<StratifiedBatch> next_epoch();

 private:
  const Dataset* data_;
  std::vector<Stratum> strata_;
  std::array<std::vector<std::size_t>, 4> members_;
  int batch_size_;
  std::size_t batches_per_epoch_ = 0;
  Rng rng_;
};

// ---- runs --------------------------------------------------------------------------------

struct SeedLineage {
  std::uint64_t root = 0;
  std::uint64_t init = 0;
  std::uint64_t batches = 0;
  std::uint64_t noise = 0;

  static SeedLineage derive(std::uint64_t root);
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's batches
};

struct RunRecord {
  TrainConfig config;
  SeedLineage seeds;
  std::vector<EpochLog> epochs;
  Model model;
  ClassPriors class_priors{0.5, 0.5};
  double wall_clock_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains one variant. Throws std::invalid_argument if a stratum the variant
/// needs is missing from the dataset.
RunRecord train(const Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Latent priors implied by a config (antipodal, prior_kappa).
LatentPriors priors_for(const TrainConfig& config);

}  // namespace dasad
