#include "dasad/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <openssl/evp.h>
#include <zlib.h>

namespace dasad {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

void need(std::span<const std::uint8_t> b, std::size_t expected, std::size_t offset, const char* what) {
  if (b.size() < expected) {
    throw IdxParseError(std::string("truncated IDX stream while reading ") + what + ": expected " +
                            std::to_string(expected) + " bytes, got " + std::to_string(b.size()),
                        offset);
  }
}

std::uint32_t check_magic(std::span<const std::uint8_t> b, std::uint32_t expected) {
  need(b, 4, 0, "magic");
  const std::uint32_t magic = read_be32(b, 0);
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad IDX magic 0x%08x (expected 0x%08x)", magic, expected);
    throw IdxParseError(buf, 0);
  }
  return magic;
}

}  // namespace

IdxParseError::IdxParseError(const std::string& what, std::size_t off)
    : std::runtime_error(what + " at byte offset " + std::to_string(off)), offset(off) {}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxImagesMagic);
  need(bytes, 16, 4, "image header");
  IdxImages out;
  out.count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  const std::size_t payload = out.count * out.rows * out.cols;
  need(bytes, 16 + payload, 16, "image payload");
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return out;
}

IdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxLabelsMagic);
  need(bytes, 8, 4, "label header");
  const std::size_t n = read_be32(bytes, 4);
  need(bytes, 8 + n, 8, "label payload");
  IdxLabels out;
  out.labels.assign(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  return out;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing file: " + path.string());
  gzFile f = gzopen(path.c_str(), "rb");  // reads uncompressed files transparently
  if (f == nullptr) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      throw std::runtime_error("read error in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  static constexpr char digits[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex += digits[md[i] >> 4];
    hex += digits[md[i] & 15];
  }
  return hex;
}

MnistFiles MnistFiles::in_directory(const std::filesystem::path& dir) {
  auto pick = [&](const std::string& base) {
    const auto gz = dir / (base + ".gz");
    return std::filesystem::exists(gz) ? gz : dir / base;
  };
  return {pick("train-images-idx3-ubyte"), pick("train-labels-idx1-ubyte"), pick("t10k-images-idx3-ubyte"),
          pick("t10k-labels-idx1-ubyte")};
}

MnistData load_mnist(const MnistFiles& files) {
  auto load_split = [](const std::filesystem::path& img, const std::filesystem::path& lbl) {
    MnistSplit s;
    try {
      s.images = parse_idx_images(read_maybe_gzip(img));
    } catch (const IdxParseError& e) {
      throw std::runtime_error(img.string() + ": " + e.what());
    }
    try {
      s.labels = parse_idx_labels(read_maybe_gzip(lbl));
    } catch (const IdxParseError& e) {
      throw std::runtime_error(lbl.string() + ": " + e.what());
    }
    if (s.images.count != s.labels.labels.size()) {
      throw std::runtime_error(img.string() + " holds " + std::to_string(s.images.count) + " images but " +
                               lbl.string() + " holds " + std::to_string(s.labels.labels.size()) + " labels");
    }
    return s;
  };
  return {load_split(files.train_images, files.train_labels), load_split(files.test_images, files.test_labels)};
}

Eigen::MatrixXd rotate_image(const Eigen::MatrixXd& img, double degrees) {
  if (!std::isfinite(degrees)) throw std::domain_error("rotate_image: angle must be finite");
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  const double cy = 0.5 * static_cast<double>(rows - 1);
  const double cx = 0.5 * static_cast<double>(cols - 1);
  const double th = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(th);
  const double s = std::sin(th);
  auto at = [&](Eigen::Index r, Eigen::Index k) {
    return (r < 0 || r >= rows || k < 0 || k >= cols) ? 0.0 : img(r, k);
  };
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      // Display coordinates (x right, y up); sample the input at R(-theta) p.
      const double x = static_cast<double>(k) - cx;
      const double y = cy - static_cast<double>(r);
      const double xs = c * x + s * y;
      const double ys = -s * x + c * y;
      const double src_r = cy - ys;
      const double src_c = cx + xs;
      const double r0 = std::floor(src_r);
      const double c0 = std::floor(src_c);
      const double fr = src_r - r0;
      const double fc = src_c - c0;
      const auto ir = static_cast<Eigen::Index>(r0);
      const auto ic = static_cast<Eigen::Index>(c0);
      const double v = (1 - fr) * ((1 - fc) * at(ir, ic) + fc * at(ir, ic + 1)) +
                       fr * ((1 - fc) * at(ir + 1, ic) + fc * at(ir + 1, ic + 1));
      out(r, k) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Eigen::VectorXd normalize_pixels(std::span<const std::uint8_t> px) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(px.size()));
  for (std::size_t i = 0; i < px.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = static_cast<double>(static_cast<float>(px[i] / 255.0));
  }
  return x;
}

CaseSplit CaseSplit::for_case(int case_id) {
  switch (case_id) {
    case 1: return {1, {1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    case 2: return {2, {4, 5, 6}, {7, 8, 9}, {1, 2, 3}};
    case 3: return {3, {7, 8, 9}, {1, 2, 3}, {4, 5, 6}};
    default: throw std::invalid_argument("unknown case id " + std::to_string(case_id) + " (expected 1, 2 or 3)");
  }
}

namespace {

Eigen::VectorXd image_vector(const IdxImages& imgs, std::size_t i, double degrees) {
  Eigen::VectorXd x = normalize_pixels(imgs.image(i));
  if (degrees == 0.0) return x;
  const auto rows = static_cast<Eigen::Index>(imgs.rows);
  const auto cols = static_cast<Eigen::Index>(imgs.cols);
  // IDX images are row-major; map as the transpose of a column-major cols x rows matrix.
  const Eigen::MatrixXd grid = Eigen::Map<const Eigen::MatrixXd>(x.data(), cols, rows).transpose();
  const Eigen::MatrixXd rot = rotate_image(grid, degrees);
  Eigen::MatrixXd back = rot.transpose();
  Eigen::VectorXd out = Eigen::Map<const Eigen::VectorXd>(back.data(), back.size());
  return out.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

std::vector<std::size_t> indices_of(const IdxLabels& labels, const std::set<int>& digits) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (digits.contains(labels.labels[i])) idx.push_back(i);
  }
  return idx;
}

void append(Dataset& out, const MnistSplit& split, const std::vector<std::size_t>& idx, ClassLabel c, Domain d,
            Role role, double degrees) {
  for (std::size_t i : idx) {
    out.push_back({image_vector(split.images, i, degrees), c, d, split.labels.labels[i], role});
  }
}

std::vector<std::size_t> capped(std::vector<std::size_t> v, std::size_t cap) {
  if (v.size() > cap) v.resize(cap);
  return v;
}

}  // namespace

CaseData build_case(int case_id, const MnistData& mnist, std::uint64_t seed, const CaseOptions& opts) {
  CaseData out;
  out.split = CaseSplit::for_case(case_id);
  out.seed = seed;
  Rng rng(seed);

  auto normal_pool = indices_of(mnist.train.labels, out.split.normal_digits);
  auto seen_pool = indices_of(mnist.train.labels, out.split.seen_digits);
  std::shuffle(normal_pool.begin(), normal_pool.end(), rng);
  std::shuffle(seen_pool.begin(), seen_pool.end(), rng);
  const std::size_t half = normal_pool.size() / 2;
  const std::vector<std::size_t> ns(normal_pool.begin(), normal_pool.begin() + static_cast<std::ptrdiff_t>(half));
  const std::vector<std::size_t> nt(normal_pool.begin() + static_cast<std::ptrdiff_t>(half), normal_pool.end());

  const std::size_t cap = opts.train_cap_per_stratum;
  append(out.train, mnist.train, capped(ns, cap), ClassLabel::Normal, Domain::Source, Role::Normal, 0.0);
  append(out.train, mnist.train, capped(seen_pool, cap), ClassLabel::Anomaly, Domain::Source, Role::SeenAnomaly, 0.0);
  append(out.train, mnist.train, capped(nt, cap), ClassLabel::Normal, Domain::Target, Role::Normal,
         opts.rotation_degrees);

  auto test_normal = indices_of(mnist.test.labels, out.split.normal_digits);
  auto test_seen = indices_of(mnist.test.labels, out.split.seen_digits);
  auto test_unseen = indices_of(mnist.test.labels, out.split.unseen_digits);
  std::shuffle(test_normal.begin(), test_normal.end(), rng);
  std::shuffle(test_seen.begin(), test_seen.end(), rng);
  std::shuffle(test_unseen.begin(), test_unseen.end(), rng);
  const std::size_t tcap = opts.test_cap_per_role;
  const double rot = opts.rotation_degrees;
  append(out.test, mnist.test, capped(test_normal, tcap), ClassLabel::Normal, Domain::Target, Role::Normal, rot);
  append(out.test, mnist.test, capped(test_seen, tcap), ClassLabel::Anomaly, Domain::Target, Role::SeenAnomaly, rot);
  append(out.test, mnist.test, capped(test_unseen, tcap), ClassLabel::Anomaly, Domain::Target, Role::UnseenAnomaly,
         rot);
  check_training_availability(out.train);
  return out;
}

void check_training_availability(const Dataset& train) {
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (stratum_of(train[i]) == Stratum::AT) {
      throw std::logic_error("training sample " + std::to_string(i) + " is a target-domain anomaly");
    }
    if (train[i].role == Role::UnseenAnomaly) {
      throw std::logic_error("training sample " + std::to_string(i) + " is an unseen anomaly");
    }
  }
}

// ---- synthetic -----------------------------------------------------------------------------

SyntheticSpec SyntheticSpec::translation(int dim, double class_separation, double shift) {
  if (dim < 2) throw std::invalid_argument("SyntheticSpec::translation needs dim >= 2");
  SyntheticSpec s;
  s.mean_normal = Eigen::VectorXd::Zero(dim);
  s.mean_anomaly = Eigen::VectorXd::Zero(dim);
  s.mean_anomaly[0] = class_separation;
  s.cov_normal = Eigen::MatrixXd::Identity(dim, dim);
  s.cov_anomaly = Eigen::MatrixXd::Identity(dim, dim);
  s.shift_matrix = Eigen::MatrixXd::Identity(dim, dim);
  s.shift_offset = Eigen::VectorXd::Zero(dim);
  s.shift_offset[1] = shift;
  return s;
}

SyntheticDomains::SyntheticDomains(SyntheticSpec spec) : spec_(std::move(spec)) {
  const int k = spec_.dim();
  if (spec_.mean_anomaly.size() != k || spec_.cov_normal.rows() != k || spec_.cov_normal.cols() != k ||
      spec_.cov_anomaly.rows() != k || spec_.cov_anomaly.cols() != k || spec_.shift_matrix.rows() != k ||
      spec_.shift_matrix.cols() != k || spec_.shift_offset.size() != k) {
    throw DimensionError("SyntheticSpec: inconsistent dimensions");
  }
  if (!(spec_.p_normal > 0.0 && spec_.p_normal < 1.0)) throw std::invalid_argument("SyntheticSpec: p_normal in (0,1)");
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(spec_.shift_matrix);
  if (!lu.isInvertible()) throw std::invalid_argument("SyntheticSpec: shift map is not invertible");

  auto make = [&](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("SyntheticSpec: covariance not positive definite");
    Component c;
    c.mean = mean;
    c.chol = llt.matrixL();
    c.log_norm = -0.5 * k * std::log(2.0 * std::numbers::pi) - c.chol.diagonal().array().log().sum();
    return c;
  };
  const auto& M = spec_.shift_matrix;
  const auto& t = spec_.shift_offset;
  comps_[static_cast<int>(Stratum::NS)] = make(spec_.mean_normal, spec_.cov_normal);
  comps_[static_cast<int>(Stratum::AS)] = make(spec_.mean_anomaly, spec_.cov_anomaly);
  comps_[static_cast<int>(Stratum::NT)] = make(M * spec_.mean_normal + t, M * spec_.cov_normal * M.transpose());
  comps_[static_cast<int>(Stratum::AT)] = make(M * spec_.mean_anomaly + t, M * spec_.cov_anomaly * M.transpose());
}

const SyntheticDomains::Component& SyntheticDomains::component(ClassLabel c, Domain d) const {
  return comps_[static_cast<int>(stratum_of(c, d))];
}

double SyntheticDomains::log_density(const Eigen::VectorXd& x, ClassLabel c, Domain d) const {
  const Component& comp = component(c, d);
  const Eigen::VectorXd u = comp.chol.triangularView<Eigen::Lower>().solve(x - comp.mean);
  return comp.log_norm - 0.5 * u.squaredNorm();
}

namespace {
double log_add(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}
}  // namespace

double SyntheticDomains::prob_target(const Eigen::VectorXd& x) const {
  const double ln = std::log(spec_.p_normal);
  const double la = std::log(1.0 - spec_.p_normal);
  const double ls = log_add(ln + log_density(x, ClassLabel::Normal, Domain::Source),
                            la + log_density(x, ClassLabel::Anomaly, Domain::Source));
  const double lt = log_add(ln + log_density(x, ClassLabel::Normal, Domain::Target),
                            la + log_density(x, ClassLabel::Anomaly, Domain::Target));
  return 1.0 / (1.0 + std::exp(ls - lt));
}

double SyntheticDomains::prob_target_given_class(const Eigen::VectorXd& x, ClassLabel c) const {
  return 1.0 / (1.0 + std::exp(log_density(x, c, Domain::Source) - log_density(x, c, Domain::Target)));
}

double SyntheticDomains::true_w_vae(const Eigen::VectorXd& x) const {
  const double p = prob_target(x);
  return p / (1.0 - p);
}

double SyntheticDomains::true_w_dom(const Eigen::VectorXd& x) const {
  return std::exp(std::log(1.0 - spec_.p_normal) - std::log(spec_.p_normal) +
                  log_density(x, ClassLabel::Anomaly, Domain::Target) -
                  log_density(x, ClassLabel::Normal, Domain::Target));
}

Eigen::VectorXd SyntheticDomains::sample(ClassLabel c, Domain d, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Component& comp = component(c, d);
  Eigen::VectorXd e(comp.mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = normal(rng);
  return comp.mean + comp.chol * e;
}

Dataset SyntheticData::training() const {
  Dataset out;
  out.insert(out.end(), ns.begin(), ns.end());
  out.insert(out.end(), as.begin(), as.end());
  out.insert(out.end(), nt.begin(), nt.end());
  return out;
}

SyntheticData gen_synthetic(const SyntheticDomains& domains, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticData out;
  auto fill = [&](Dataset& ds, ClassLabel c, Domain d) {
    ds.reserve(n);
    const Role role = c == ClassLabel::Normal ? Role::Normal : Role::SeenAnomaly;
    for (std::size_t i = 0; i < n; ++i) ds.push_back({domains.sample(c, d, rng), c, d, -1, role});
  };
  fill(out.ns, ClassLabel::Normal, Domain::Source);
  fill(out.as, ClassLabel::Anomaly, Domain::Source);
  fill(out.nt, ClassLabel::Normal, Domain::Target);
  fill(out.at_held_out, ClassLabel::Anomaly, Domain::Target);
  return out;
}

}  // namespace dasad
