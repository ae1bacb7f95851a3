#pragma once

// Two-layer perceptrons for the vMF encoder, the (optionally domain-conditioned)
// decoder and the domain classifier, with hand-written batched backprop.
// Batches are stored column-wise: one sample per column.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dasad/distributions.hpp"
#include "dasad/sample.hpp"

namespace dasad {

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1 };

struct LayerParams {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  LayerParams() = default;
  LayerParams(int in, int out);
  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
};

struct EncoderParams {
  LayerParams hidden;    // input_dim -> hidden
  LayerParams head_dir;  // hidden -> latent_dim
  double log_kappa = 0.0;  // posterior concentration is softplus(log_kappa)
};

struct DecoderParams {
  LayerParams hidden;  // latent_dim (+2 when domain-conditioned) -> hidden
  LayerParams head;    // hidden -> input_dim
};

struct DomainClfParams {
  LayerParams hidden;  // latent_dim -> hidden
  LayerParams head;    // hidden -> 1 (logit of P(d = T))
};

struct Architecture {
  int input_dim = 784;
  int latent_dim = 10;
  int hidden_units = 50;
  bool decoder_conditioned = true;
  bool domain_classifier = true;
  Activation activation = Activation::Tanh;

  bool operator==(const Architecture&) const = default;
};

enum class Player : std::uint8_t { Encoder = 0, Decoder = 1, Classifier = 2 };

/// View of one named parameter array. Values are column-major.
struct ParamRef {
  std::string name;
  Player player;
  Eigen::Index rows;
  Eigen::Index cols;
  std::span<double> values;
};

struct ConstParamRef {
  std::string name;
  Player player;
  Eigen::Index rows;
  Eigen::Index cols;
  std::span<const double> values;
};

struct Model {
  Architecture arch;
  EncoderParams enc;
  DecoderParams dec;
  std::optional<DomainClfParams> clf;

  /// Glorot-uniform weights, zero biases; posterior concentration set to initial_kappa.
  static Model init(const Architecture& arch, std::uint64_t seed, double initial_kappa);
  /// Same shapes, every entry zero. Used as a gradient accumulator.
  Model zeros_like() const;

  double kappa() const;
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;
  std::size_t parameter_count() const;
};

double softplus(double x);
double inverse_softplus(double y);
double logistic(double x);
/// log(logistic(x)) without overflow.
double log_logistic(double x);

/// vMF posterior q(z|x): mu = normalize(head_dir(act(hidden(x)))), kappa = softplus(log_kappa).
/// A zero head output is normalized with 1e-12 added to the norm.
VmfDist encode(const Eigen::VectorXd& x, const EncoderParams& p, Activation act = Activation::Tanh);

/// Decoder mean in [0,1]^input_dim. Domain conditioning is inferred from the
/// hidden layer's input width (latent_dim + 2 conditioned, latent_dim otherwise).
Eigen::VectorXd decode(const UnitVector& z, Domain d, const DecoderParams& p,
                       Activation act = Activation::Tanh);
/// As decode(), accepting a latent that is only approximately unit-norm.
Eigen::VectorXd decode_raw(const Eigen::Ref<const Eigen::VectorXd>& z, Domain d,
                           const DecoderParams& p, Activation act = Activation::Tanh);

/// P(d = T | z).
double domain_prob(const UnitVector& z, const DomainClfParams& p, Activation act = Activation::Tanh);
double domain_prob_raw(const Eigen::Ref<const Eigen::VectorXd>& z, const DomainClfParams& p,
                       Activation act = Activation::Tanh);

/// Backward rule of the gradient-reversal layer: identity forward, -lambda * g backward.
template <typename Derived>
auto grad_reverse(const Eigen::MatrixBase<Derived>& g, double lambda) {
  return (-lambda) * g;
}

// ---- batched forward / backward -------------------------------------------------------

struct EncoderForward {
  Eigen::MatrixXd pre_hidden;  // hidden x B
  Eigen::MatrixXd hidden;      // hidden x B
  Eigen::MatrixXd raw_dir;     // m x B
  Eigen::VectorXd raw_norm;    // B
  Eigen::MatrixXd mu;          // m x B
  double kappa = 0.0;
};

EncoderForward encoder_forward(const EncoderParams& p, const Eigen::MatrixXd& x, Activation act);

/// Accumulates into grad. g_mu is dL/dmu (m x B), g_kappa is dL/dkappa.
void encoder_backward(const EncoderParams& p, const Eigen::MatrixXd& x, const EncoderForward& fw,
                      const Eigen::MatrixXd& g_mu, double g_kappa, Activation act,
                      EncoderParams& grad);

struct DecoderForward {
  Eigen::MatrixXd input;       // (m [+2]) x B
  Eigen::MatrixXd pre_hidden;  // hidden x B
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd out;         // input_dim x B, in [0,1]
  Eigen::Index latent_dim = 0;
};

/// Conditioned decoders require a domain; unconditioned ones ignore it.
DecoderForward decoder_forward(const DecoderParams& p, const Eigen::MatrixXd& z, Domain d,
                               Activation act);

/// Returns dL/dz (m x B); accumulates parameter gradients into grad.
Eigen::MatrixXd decoder_backward(const DecoderParams& p, const DecoderForward& fw,
                                 const Eigen::MatrixXd& g_out, Activation act, DecoderParams& grad);

struct ClassifierForward {
  Eigen::MatrixXd pre_hidden;
  Eigen::MatrixXd hidden;
  Eigen::RowVectorXd logit;
  Eigen::RowVectorXd prob;  // P(d = T | z)
};

ClassifierForward classifier_forward(const DomainClfParams& p, const Eigen::MatrixXd& z,
                                     Activation act);

/// Returns dL/dz; accumulates parameter gradients into grad.
Eigen::MatrixXd classifier_backward(const DomainClfParams& p, const Eigen::MatrixXd& z,
                                    const ClassifierForward& fw, const Eigen::RowVectorXd& g_logit,
                                    Activation act, DomainClfParams& grad);

bool decoder_is_conditioned(const DecoderParams& p, int latent_dim);

}  // namespace dasad
