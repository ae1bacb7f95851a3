#pragma once

// MNIST ingestion, the rotated target domain, case splits and synthetic
// domain-shift data with closed-form densities.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dasad/distributions.hpp"
#include "dasad/sample.hpp"

namespace dasad {

// ---- IDX ---------------------------------------------------------------------------------

struct IdxParseError : std::runtime_error {
  IdxParseError(const std::string& what, std::size_t offset);
  std::size_t offset;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image

  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * rows * cols, rows * cols};
  }
};

struct IdxLabels {
  std::vector<std::uint8_t> labels;
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
IdxLabels parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Reads a raw or gzip-compressed file fully into memory.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path);

/// Hex SHA-256 of a file's bytes as stored on disk.
std::string sha256_file(const std::filesystem::path& path);

struct MnistSplit {
  IdxImages images;
  IdxLabels labels;
};

struct MnistData {
  MnistSplit train;
  MnistSplit test;
};

struct MnistFiles {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;

  /// Standard file names (`train-images-idx3-ubyte[.gz]`, ...) under dir; prefers `.gz`.
  static MnistFiles in_directory(const std::filesystem::path& dir);
  std::array<const std::filesystem::path*, 4> all() const {
    return {&train_images, &train_labels, &test_images, &test_labels};
  }
};

/// Throws if image and label counts disagree.
MnistData load_mnist(const MnistFiles& files);

// ---- images ------------------------------------------------------------------------------

/// Rotates counter-clockwise (as displayed, row 0 at the top) about the grid
/// center with bilinear interpolation; zero fill outside, output clipped to [0,1].
Eigen::MatrixXd rotate_image(const Eigen::MatrixXd& img, double degrees);

/// uint8 pixels / 255, rounded to float precision so that cached datasets are lossless.
Eigen::VectorXd normalize_pixels(std::span<const std::uint8_t> px);

// ---- cases -------------------------------------------------------------------------------

struct CaseSplit {
  int case_id = 1;
  std::set<int> normal_digits;
  std::set<int> seen_digits;
  std::set<int> unseen_digits;

  /// Normal / seen / unseen digit groups for case 1, 2 or 3.
  static CaseSplit for_case(int case_id);
};

struct CaseOptions {
  double rotation_degrees = 45.0;
  std::size_t train_cap_per_stratum = 1500;
  std::size_t test_cap_per_role = 1500;
};

struct CaseData {
  CaseSplit split;
  std::uint64_t seed = 0;
  Dataset train;  // (N,S), (A,S), (N,T) only
  Dataset test;   // target domain: normal, seen and unseen anomalies
};

/// Source-domain normals and the rotated target normals come from disjoint halves
/// of the official training split; test samples come from the official test split.
CaseData build_case(int case_id, const MnistData& mnist, std::uint64_t seed, const CaseOptions& opts = {});

/// Throws std::logic_error if a training set contains an (A,T) sample or an unseen anomaly.
void check_training_availability(const Dataset& train);

// ---- synthetic -----------------------------------------------------------------------------

/// Gaussian class components in the source domain; the target components are
/// their images under x -> shift_matrix * x + shift_offset.
struct SyntheticSpec {
  Eigen::VectorXd mean_normal;
  Eigen::VectorXd mean_anomaly;
  Eigen::MatrixXd cov_normal;
  Eigen::MatrixXd cov_anomaly;
  Eigen::MatrixXd shift_matrix;
  Eigen::VectorXd shift_offset;
  double p_normal = 0.5;

  int dim() const { return static_cast<int>(mean_normal.size()); }
  /// Shared covariance, translation orthogonal to the class-mean difference:
  /// p(d | x, c) does not depend on c.
  static SyntheticSpec translation(int dim, double class_separation, double shift);
};

class SyntheticDomains {
 public:
  /// Throws std::invalid_argument for a non-invertible shift map or a
  /// covariance that is not positive definite.
  explicit SyntheticDomains(SyntheticSpec spec);

  const SyntheticSpec& spec() const { return spec_; }
  double log_density(const Eigen::VectorXd& x, ClassLabel c, Domain d) const;
  /// P(d = T | x) marginalizing the class, with p(d) = 1/2 and p(c | d) = p_c.
  double prob_target(const Eigen::VectorXd& x) const;
  /// P(d = T | x, c).
  double prob_target_given_class(const Eigen::VectorXd& x, ClassLabel c) const;
  /// True w_vae = P(T|x) / P(S|x).
  double true_w_vae(const Eigen::VectorXd& x) const;
  /// True w_dom = p(x, A, T) / p(x, N, T).
  double true_w_dom(const Eigen::VectorXd& x) const;

  Eigen::VectorXd sample(ClassLabel c, Domain d, Rng& rng) const;

 private:
  struct Component {
    Eigen::VectorXd mean;
    Eigen::MatrixXd chol;  // lower Cholesky factor
    double log_norm = 0.0;
  };
  const Component& component(ClassLabel c, Domain d) const;

  SyntheticSpec spec_;
  std::array<Component, 4> comps_;
};

struct SyntheticData {
  Dataset ns, as, nt;
  Dataset at_held_out;  // never part of a training set
  Dataset training() const;
};

/// n samples per stratum, all four strata, deterministic in seed.
SyntheticData gen_synthetic(const SyntheticDomains& domains, std::size_t n, std::uint64_t seed);

// ---- cache -------------------------------------------------------------------------------

struct CacheManifest {
  int case_id = 0;
  std::uint64_t seed = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::size_t input_dim = 0;
  std::string source_checksum;  // combined SHA-256 of the IDX inputs
  std::string data_checksum;    // SHA-256 of the archive
  CaseOptions options;
};

/// Writes `<stem>.bin` and `<stem>.json`.
void save_case_cache(const CaseData& data, const std::filesystem::path& stem, const std::string& source_checksum,
                     const CaseOptions& opts);
CaseData load_case_cache(const std::filesystem::path& stem);
/// Empty optional if the sidecar is missing or unreadable.
std::optional<CacheManifest> read_cache_manifest(const std::filesystem::path& stem);

}  // namespace dasad
