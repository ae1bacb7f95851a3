#include "dasad/networks.hpp"

#include <cmath>
#include <random>
#include <string>

namespace dasad {

namespace {

constexpr double kDirectionEps = 1e-12;

Eigen::MatrixXd activate(const Eigen::MatrixXd& a, Activation act) {
  if (act == Activation::Tanh) return a.array().tanh().matrix();
  return a.cwiseMax(0.0);
}

// Derivative of the activation expressed through pre-activation and output.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& out,
                                Activation act) {
  if (act == Activation::Tanh) return (1.0 - out.array().square()).matrix();
  return (pre.array() > 0.0).cast<double>().matrix();
}

Eigen::MatrixXd affine(const LayerParams& l, const Eigen::MatrixXd& x) {
  if (x.rows() != l.in()) {
    throw DimensionError("layer expects input width " + std::to_string(l.in()) + ", got " +
                         std::to_string(x.rows()));
  }
  Eigen::MatrixXd y = l.weight * x;
  y.colwise() += l.bias;
  return y;
}

// grad += dL/dW, dL/db for y = W x + b; returns dL/dx.
Eigen::MatrixXd affine_backward(const LayerParams& l, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& g_y, LayerParams& grad) {
  grad.weight.noalias() += g_y * x.transpose();
  grad.bias += g_y.rowwise().sum();
  return l.weight.transpose() * g_y;
}

void glorot(LayerParams& l, Rng& rng) {
  const double limit = std::sqrt(6.0 / (l.in() + l.out()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = u(rng);
  }
  l.bias.setZero();
}

Eigen::MatrixXd with_domain_code(const Eigen::MatrixXd& z, Domain d) {
  Eigen::MatrixXd in(z.rows() + 2, z.cols());
  in.topRows(z.rows()) = z;
  in.row(z.rows()).setConstant(d == Domain::Source ? 1.0 : 0.0);
  in.row(z.rows() + 1).setConstant(d == Domain::Target ? 1.0 : 0.0);
  return in;
}

void push_layer(std::vector<ParamRef>& out, const std::string& prefix, Player who, LayerParams& l) {
  out.push_back({prefix + ".weight", who, l.weight.rows(), l.weight.cols(),
                 std::span<double>(l.weight.data(), static_cast<std::size_t>(l.weight.size()))});
  out.push_back({prefix + ".bias", who, l.bias.rows(), 1,
                 std::span<double>(l.bias.data(), static_cast<std::size_t>(l.bias.size()))});
}

}  // namespace

LayerParams::LayerParams(int in, int out)
    : weight(Eigen::MatrixXd::Zero(out, in)), bias(Eigen::VectorXd::Zero(out)) {}

double softplus(double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw std::domain_error("inverse_softplus: argument must be > 0");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_logistic(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

Model Model::init(const Architecture& arch, std::uint64_t seed, double initial_kappa) {
  if (arch.input_dim < 1 || arch.latent_dim < 2 || arch.hidden_units < 1) {
    throw std::invalid_argument("Model::init: invalid architecture");
  }
  Rng rng(seed);
  Model m;
  m.arch = arch;
  const int dec_in = arch.latent_dim + (arch.decoder_conditioned ? 2 : 0);
  m.enc.hidden = LayerParams(arch.input_dim, arch.hidden_units);
  m.enc.head_dir = LayerParams(arch.hidden_units, arch.latent_dim);
  m.enc.log_kappa = inverse_softplus(initial_kappa);
  m.dec.hidden = LayerParams(dec_in, arch.hidden_units);
  m.dec.head = LayerParams(arch.hidden_units, arch.input_dim);
  glorot(m.enc.hidden, rng);
  glorot(m.enc.head_dir, rng);
  glorot(m.dec.hidden, rng);
  glorot(m.dec.head, rng);
  if (arch.domain_classifier) {
    DomainClfParams c{LayerParams(arch.latent_dim, arch.hidden_units), LayerParams(arch.hidden_units, 1)};
    glorot(c.hidden, rng);
    glorot(c.head, rng);
    m.clf = std::move(c);
  }
  return m;
}

Model Model::zeros_like() const {
  Model z = *this;
  for (auto& p : z.parameters()) std::fill(p.values.begin(), p.values.end(), 0.0);
  return z;
}

double Model::kappa() const { return softplus(enc.log_kappa); }

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> out;
  push_layer(out, "encoder.hidden", Player::Encoder, enc.hidden);
  push_layer(out, "encoder.head_dir", Player::Encoder, enc.head_dir);
  out.push_back({"encoder.log_kappa", Player::Encoder, 1, 1, std::span<double>(&enc.log_kappa, 1)});
  push_layer(out, "decoder.hidden", Player::Decoder, dec.hidden);
  push_layer(out, "decoder.head", Player::Decoder, dec.head);
  if (clf) {
    push_layer(out, "domain_classifier.hidden", Player::Classifier, clf->hidden);
    push_layer(out, "domain_classifier.head", Player::Classifier, clf->head);
  }
  return out;
}

std::vector<ConstParamRef> Model::parameters() const {
  std::vector<ConstParamRef> out;
  for (auto& p : const_cast<Model*>(this)->parameters()) {
    out.push_back({p.name, p.player, p.rows, p.cols, std::span<const double>(p.values)});
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.values.size();
  return n;
}

bool decoder_is_conditioned(const DecoderParams& p, int latent_dim) {
  if (p.hidden.in() == latent_dim + 2) return true;
  if (p.hidden.in() == latent_dim) return false;
  throw DimensionError("decoder input width " + std::to_string(p.hidden.in()) +
                       " does not match latent dimension " + std::to_string(latent_dim));
}

EncoderForward encoder_forward(const EncoderParams& p, const Eigen::MatrixXd& x, Activation act) {
  EncoderForward fw;
  fw.pre_hidden = affine(p.hidden, x);
  fw.hidden = activate(fw.pre_hidden, act);
  fw.raw_dir = affine(p.head_dir, fw.hidden);
  fw.raw_norm = fw.raw_dir.colwise().norm().transpose();
  fw.mu = fw.raw_dir;
  for (Eigen::Index j = 0; j < fw.mu.cols(); ++j) fw.mu.col(j) /= fw.raw_norm[j] + kDirectionEps;
  fw.kappa = softplus(p.log_kappa);
  return fw;
}

void encoder_backward(const EncoderParams& p, const Eigen::MatrixXd& x, const EncoderForward& fw,
                      const Eigen::MatrixXd& g_mu, double g_kappa, Activation act,
                      EncoderParams& grad) {
  // mu = u / (|u| + eps)  =>  dmu = du / r - u (u . du) / (|u| r^2)
  Eigen::MatrixXd g_raw(g_mu.rows(), g_mu.cols());
  for (Eigen::Index j = 0; j < g_mu.cols(); ++j) {
    const double n = fw.raw_norm[j];
    const double r = n + kDirectionEps;
    g_raw.col(j) = g_mu.col(j) / r;
    if (n > 0.0) g_raw.col(j) -= fw.raw_dir.col(j) * (fw.raw_dir.col(j).dot(g_mu.col(j)) / (n * r * r));
  }
  Eigen::MatrixXd g_hidden = affine_backward(p.head_dir, fw.hidden, g_raw, grad.head_dir);
  g_hidden.array() *= activation_grad(fw.pre_hidden, fw.hidden, act).array();
  affine_backward(p.hidden, x, g_hidden, grad.hidden);
  grad.log_kappa += g_kappa * logistic(p.log_kappa);
}

DecoderForward decoder_forward(const DecoderParams& p, const Eigen::MatrixXd& z, Domain d,
                               Activation act) {
  DecoderForward fw;
  const int m = static_cast<int>(z.rows());
  fw.latent_dim = m;
  fw.input = decoder_is_conditioned(p, m) ? with_domain_code(z, d) : z;
  fw.pre_hidden = affine(p.hidden, fw.input);
  fw.hidden = activate(fw.pre_hidden, act);
  fw.out = affine(p.head, fw.hidden).unaryExpr([](double v) { return logistic(v); });
  return fw;
}

Eigen::MatrixXd decoder_backward(const DecoderParams& p, const DecoderForward& fw,
                                 const Eigen::MatrixXd& g_out, Activation act, DecoderParams& grad) {
  const Eigen::MatrixXd g_logit = (g_out.array() * fw.out.array() * (1.0 - fw.out.array())).matrix();
  Eigen::MatrixXd g_hidden = affine_backward(p.head, fw.hidden, g_logit, grad.head);
  g_hidden.array() *= activation_grad(fw.pre_hidden, fw.hidden, act).array();
  const Eigen::MatrixXd g_in = affine_backward(p.hidden, fw.input, g_hidden, grad.hidden);
  // Domain code rows carry no gradient back to z.
  return g_in.topRows(fw.latent_dim);
}

ClassifierForward classifier_forward(const DomainClfParams& p, const Eigen::MatrixXd& z,
                                     Activation act) {
  ClassifierForward fw;
  fw.pre_hidden = affine(p.hidden, z);
  fw.hidden = activate(fw.pre_hidden, act);
  fw.logit = affine(p.head, fw.hidden).row(0);
  fw.prob = fw.logit.unaryExpr([](double v) { return logistic(v); });
  return fw;
}

Eigen::MatrixXd classifier_backward(const DomainClfParams& p, const Eigen::MatrixXd& z,
                                    const ClassifierForward& fw, const Eigen::RowVectorXd& g_logit,
                                    Activation act, DomainClfParams& grad) {
  Eigen::MatrixXd g_hidden = affine_backward(p.head, fw.hidden, Eigen::MatrixXd(g_logit), grad.head);
  g_hidden.array() *= activation_grad(fw.pre_hidden, fw.hidden, act).array();
  return affine_backward(p.hidden, z, g_hidden, grad.hidden);
}

VmfDist encode(const Eigen::VectorXd& x, const EncoderParams& p, Activation act) {
  const EncoderForward fw = encoder_forward(p, Eigen::MatrixXd(x), act);
  // Batched paths tolerate a zero head output; a single posterior needs a direction.
  if (fw.raw_norm[0] == 0.0) throw std::domain_error("encode: degenerate direction");
  return VmfDist(UnitVector::normalized(fw.mu.col(0)), fw.kappa);
}

Eigen::VectorXd decode_raw(const Eigen::Ref<const Eigen::VectorXd>& z, Domain d,
                           const DecoderParams& p, Activation act) {
  return decoder_forward(p, Eigen::MatrixXd(z), d, act).out.col(0);
}

Eigen::VectorXd decode(const UnitVector& z, Domain d, const DecoderParams& p, Activation act) {
  return decode_raw(z.coords(), d, p, act);
}

double domain_prob_raw(const Eigen::Ref<const Eigen::VectorXd>& z, const DomainClfParams& p,
                       Activation act) {
  return classifier_forward(p, Eigen::MatrixXd(z), act).prob[0];
}

double domain_prob(const UnitVector& z, const DomainClfParams& p, Activation act) {
  return domain_prob_raw(z.coords(), p, act);
}

}  // namespace dasad
