#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dasad/losses.hpp"
#include "dasad/networks.hpp"
#include "dasad/sample.hpp"
#include "dasad/training.hpp"

namespace dasad {

enum class ScoreType : std::uint8_t { RL = 0, KL = 1, ELBO = 2 };
enum class AnomalyKind : std::uint8_t { Seen = 0, Unseen = 1 };

std::string_view to_string(ScoreType s);
std::string_view to_string(AnomalyKind k);

/// Larger is more anomalous for every score.
struct ScoreRecord {
  std::size_t id = 0;
  Role role = Role::Normal;
  double rl = 0.0;    // 1/2 |x - x~|^2 at the posterior mean direction, decoded as target domain
  double kl = 0.0;    // KL[q(z|x) || p(z|c=N)]
  double elbo = 0.0;  // rl + kl

  double get(ScoreType t) const { return t == ScoreType::RL ? rl : (t == ScoreType::KL ? kl : elbo); }
};

ScoreRecord score_sample(const Eigen::VectorXd& x, const Model& model, const LatentPriors& priors,
                         std::size_t id = 0, Role role = Role::Normal);

/// Batched scoring of a whole test set; ids are dataset indices.
std::vector<ScoreRecord> score_dataset(const Dataset& test, const Model& model, const LatentPriors& priors);

/// Mann-Whitney AUC in [0,1]; ties count one half. O(n log n).
/// Nonzero labels are positives. Throws std::invalid_argument unless both labels occur.
double auc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct AucRow {
  ScoreType score = ScoreType::ELBO;
  double seen = 0.0;    // percent
  double unseen = 0.0;  // percent
};

/// Score types reported for a variant (RL only for the plain VAE).
std::vector<ScoreType> score_types_for(Variant v);

struct RunEvaluation {
  std::vector<ScoreRecord> scores;
  std::vector<AucRow> rows;
};

/// Seen-AUC: normals vs seen anomalies; unseen-AUC: normals vs unseen anomalies.
/// Throws std::invalid_argument if a role is absent from the test set.
RunEvaluation evaluate_run(const Model& model, Variant variant, const LatentPriors& priors, const Dataset& test);
RunEvaluation evaluate_scores(std::vector<ScoreRecord> scores, Variant variant);

// ---- aggregate tables --------------------------------------------------------------------

struct TableKey {
  Variant variant;
  int case_id;
  ScoreType score;
  AnomalyKind kind;
  auto operator<=>(const TableKey&) const = default;
};

struct CellStats {
  double mean = 0.0;
  double std = 0.0;  // sample std over seeds; 0 with one seed
  std::size_t n = 0;
};

class ResultTable {
 public:
  void add(Variant v, int case_id, std::uint64_t seed, const std::vector<AucRow>& rows);

  std::optional<CellStats> cell(Variant v, int case_id, ScoreType s, AnomalyKind k) const;
  /// Mean over the cases present for (v, s, k) of the per-case seed means.
  std::optional<double> average(Variant v, ScoreType s, AnomalyKind k) const;

  std::vector<Variant> variants() const;
  std::vector<int> cases() const;
  std::size_t max_seeds() const;

  /// Cases as rows (+ Avg), variants x score types as columns; `mean ± std` when
  /// more than one seed was aggregated.
  std::string render_markdown(AnomalyKind k) const;
  std::string to_json() const;

 private:
  std::map<TableKey, std::map<std::uint64_t, double>> values_;
};

}  // namespace dasad
