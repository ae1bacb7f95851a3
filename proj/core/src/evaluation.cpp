#include "dasad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dasad {

std::string_view to_string(ScoreType s) {
  switch (s) {
    case ScoreType::RL: return "RL";
    case ScoreType::KL: return "KL";
    case ScoreType::ELBO: return "ELBO";
  }
  return "?";
}

std::string_view to_string(AnomalyKind k) { return k == AnomalyKind::Seen ? "seen" : "unseen"; }

namespace {

std::vector<ScoreRecord> score_matrix(const Eigen::MatrixXd& x, const Model& model, const LatentPriors& priors) {
  const auto act = model.arch.activation;
  const EncoderForward enc = encoder_forward(model.enc, x, act);
  const DecoderForward dec = decoder_forward(model.dec, enc.mu, Domain::Target, act);
  const Eigen::RowVectorXd rl = 0.5 * (x - dec.out).colwise().squaredNorm();
  std::vector<ScoreRecord> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto& r = out[static_cast<std::size_t>(j)];
    r.rl = rl[j];
    r.kl = std::max(0.0, vmf_kl_raw(enc.mu.col(j), enc.kappa, priors.normal));
    r.elbo = r.rl + r.kl;
  }
  return out;
}

}  // namespace

ScoreRecord score_sample(const Eigen::VectorXd& x, const Model& model, const LatentPriors& priors, std::size_t id,
                         Role role) {
  ScoreRecord r = score_matrix(Eigen::MatrixXd(x), model, priors).front();
  r.id = id;
  r.role = role;
  return r;
}

std::vector<ScoreRecord> score_dataset(const Dataset& test, const Model& model, const LatentPriors& priors) {
  constexpr std::size_t chunk = 512;
  std::vector<ScoreRecord> out;
  out.reserve(test.size());
  for (std::size_t start = 0; start < test.size(); start += chunk) {
    const std::size_t n = std::min(chunk, test.size() - start);
    Eigen::MatrixXd x(model.arch.input_dim, static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) x.col(static_cast<Eigen::Index>(j)) = test[start + j].x;
    auto part = score_matrix(x, model, priors);
    for (std::size_t j = 0; j < n; ++j) {
      part[j].id = start + j;
      part[j].role = test[start + j].role;
      out.push_back(part[j]);
    }
  }
  return out;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(), [](std::uint8_t p) { return p != 0; }));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: both classes must be present");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j + 1);  // tied block shares the mean rank
    for (std::size_t k = i; k <= j; ++k) {
      if (positive[order[k]] != 0) rank_sum += mid_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::vector<ScoreType> score_types_for(Variant v) {
  if (v == Variant::Vae) return {ScoreType::RL};
  return {ScoreType::RL, ScoreType::KL, ScoreType::ELBO};
}

RunEvaluation evaluate_scores(std::vector<ScoreRecord> scores, Variant variant) {
  std::array<std::size_t, 3> role_counts{};
  for (const auto& s : scores) ++role_counts[static_cast<int>(s.role)];
  for (Role r : {Role::Normal, Role::SeenAnomaly, Role::UnseenAnomaly}) {
    if (role_counts[static_cast<int>(r)] == 0) {
      throw std::invalid_argument("evaluate_run: test set has no " + std::string(to_string(r)) + " samples");
    }
  }
  RunEvaluation ev;
  for (ScoreType t : score_types_for(variant)) {
    AucRow row;
    row.score = t;
    for (AnomalyKind k : {AnomalyKind::Seen, AnomalyKind::Unseen}) {
      const Role anomalous = k == AnomalyKind::Seen ? Role::SeenAnomaly : Role::UnseenAnomaly;
      std::vector<double> values;
      std::vector<std::uint8_t> labels;
      for (const auto& s : scores) {
        if (s.role != Role::Normal && s.role != anomalous) continue;
        values.push_back(s.get(t));
        labels.push_back(s.role == anomalous);
      }
      const double a = 100.0 * auc(values, labels);
      (k == AnomalyKind::Seen ? row.seen : row.unseen) = a;
    }
    ev.rows.push_back(row);
  }
  ev.scores = std::move(scores);
  return ev;
}

RunEvaluation evaluate_run(const Model& model, Variant variant, const LatentPriors& priors, const Dataset& test) {
  return evaluate_scores(score_dataset(test, model, priors), variant);
}

// ---- tables ------------------------------------------------------------------------------

void ResultTable::add(Variant v, int case_id, std::uint64_t seed, const std::vector<AucRow>& rows) {
  for (const auto& r : rows) {
    values_[{v, case_id, r.score, AnomalyKind::Seen}][seed] = r.seen;
    values_[{v, case_id, r.score, AnomalyKind::Unseen}][seed] = r.unseen;
  }
}

std::optional<CellStats> ResultTable::cell(Variant v, int case_id, ScoreType s, AnomalyKind k) const {
  const auto it = values_.find({v, case_id, s, k});
  if (it == values_.end() || it->second.empty()) return std::nullopt;
  CellStats c;
  c.n = it->second.size();
  for (const auto& [seed, val] : it->second) c.mean += val;
  c.mean /= static_cast<double>(c.n);
  if (c.n > 1) {
    double ss = 0.0;
    for (const auto& [seed, val] : it->second) ss += (val - c.mean) * (val - c.mean);
    c.std = std::sqrt(ss / static_cast<double>(c.n - 1));
  }
  return c;
}

std::optional<double> ResultTable::average(Variant v, ScoreType s, AnomalyKind k) const {
  double sum = 0.0;
  int n = 0;
  for (int c : cases()) {
    if (auto cs = cell(v, c, s, k)) {
      sum += cs->mean;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::vector<Variant> ResultTable::variants() const {
  std::set<Variant> present;
  for (const auto& [key, vals] : values_) present.insert(key.variant);
  std::vector<Variant> out;
  for (Variant v : kAllVariants) {
    if (present.contains(v)) out.push_back(v);
  }
  return out;
}

std::vector<int> ResultTable::cases() const {
  std::set<int> c;
  for (const auto& [key, vals] : values_) c.insert(key.case_id);
  return {c.begin(), c.end()};
}

std::size_t ResultTable::max_seeds() const {
  std::size_t n = 0;
  for (const auto& [key, vals] : values_) n = std::max(n, vals.size());
  return n;
}

namespace {

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string ResultTable::render_markdown(AnomalyKind k) const {
  const bool with_std = max_seeds() > 1;
  std::ostringstream os;
  os << "AUC values for " << to_string(k) << " anomalous data (%)\n\n| Method |";
  std::vector<std::pair<Variant, ScoreType>> columns;
  for (Variant v : variants()) {
    for (ScoreType s : score_types_for(v)) {
      columns.emplace_back(v, s);
      os << ' ' << variant_label(v) << " " << to_string(s) << " |";
    }
  }
  os << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) os << "---|";
  os << '\n';
  for (int c : cases()) {
    os << "| Case " << c << " |";
    for (const auto& [v, s] : columns) {
      const auto cs = cell(v, c, s, k);
      if (!cs) os << " - |";
      else if (with_std && cs->n > 1) os << ' ' << fmt1(cs->mean) << " ± " << fmt1(cs->std) << " |";
      else os << ' ' << fmt1(cs->mean) << " |";
    }
    os << '\n';
  }
  os << "| Avg. |";
  for (const auto& [v, s] : columns) {
    const auto a = average(v, s, k);
    os << ' ' << (a ? fmt1(*a) : std::string("-")) << " |";
  }
  os << '\n';
  return os.str();
}

std::string ResultTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (AnomalyKind k : {AnomalyKind::Seen, AnomalyKind::Unseen}) {
    nlohmann::json& jk = j[std::string(to_string(k))];
    for (Variant v : variants()) {
      nlohmann::json& jv = jk[std::string(variant_id(v))];
      for (ScoreType s : score_types_for(v)) {
        nlohmann::json& js = jv[std::string(to_string(s))];
        for (int c : cases()) {
          const auto cs = cell(v, c, s, k);
          if (!cs) continue;
          nlohmann::json per_seed = nlohmann::json::object();
          for (const auto& [seed, val] : values_.at({v, c, s, k})) per_seed[std::to_string(seed)] = val;
          js["case_" + std::to_string(c)] = {{"mean", cs->mean}, {"std", cs->std}, {"n", cs->n}, {"per_seed", per_seed}};
        }
        if (auto a = average(v, s, k)) js["avg"] = *a;
      }
    }
  }
  return j.dump(2);
}

}  // namespace dasad
