#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dasad {

enum class ClassLabel : std::uint8_t { Normal = 0, Anomaly = 1 };
enum class Domain : std::uint8_t { Source = 0, Target = 1 };
enum class Role : std::uint8_t { Normal = 0, SeenAnomaly = 1, UnseenAnomaly = 2 };

inline std::string_view to_string(ClassLabel c) { return c == ClassLabel::Normal ? "N" : "A"; }
inline std::string_view to_string(Domain d) { return d == Domain::Source ? "S" : "T"; }
inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::Normal: return "normal";
    case Role::SeenAnomaly: return "seen_anomaly";
    case Role::UnseenAnomaly: return "unseen_anomaly";
  }
  return "?";
}

inline Role role_from_string(std::string_view s) {
  if (s == "normal") return Role::Normal;
  if (s == "seen_anomaly") return Role::SeenAnomaly;
  if (s == "unseen_anomaly") return Role::UnseenAnomaly;
  throw std::invalid_argument("unknown role '" + std::string(s) + "'");
}

/// One datum of the training or test set: input vector plus class and domain labels.
struct LabeledSample {
  Eigen::VectorXd x;
  ClassLabel c = ClassLabel::Normal;
  Domain d = Domain::Source;
  int digit = -1;  // -1 for synthetic data
  Role role = Role::Normal;
};

using Dataset = std::vector<LabeledSample>;

/// The four (class, domain) combinations. (A,T) never appears in training data.
enum class Stratum : std::uint8_t { NS = 0, AS = 1, NT = 2, AT = 3 };

inline Stratum stratum_of(ClassLabel c, Domain d) {
  if (c == ClassLabel::Normal) return d == Domain::Source ? Stratum::NS : Stratum::NT;
  return d == Domain::Source ? Stratum::AS : Stratum::AT;
}
inline Stratum stratum_of(const LabeledSample& s) { return stratum_of(s.c, s.d); }

inline std::string_view to_string(Stratum s) {
  switch (s) {
    case Stratum::NS: return "(N,S)";
    case Stratum::AS: return "(A,S)";
    case Stratum::NT: return "(N,T)";
    case Stratum::AT: return "(A,T)";
  }
  return "?";
}

}  // namespace dasad
