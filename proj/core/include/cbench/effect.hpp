#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cbench {

enum class Estimand { ATE, ATT };

inline std::string to_string(Estimand e) { return e == Estimand::ATE ? "ate" : "att"; }

inline Estimand estimand_from_string(const std::string& s) {
  if (s == "ate" || s == "ATE") return Estimand::ATE;
  if (s == "att" || s == "ATT") return Estimand::ATT;
  throw std::invalid_argument("unknown estimand '" + s + "'");
}

struct EffectEstimate {
  std::string method_id;
  Estimand estimand = Estimand::ATE;
  double tau = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n_used = 0;
  std::vector<std::string> flags;
};

// Symmetric normal-approximation interval at the conventional 1.96 multiplier.
inline void set_normal_ci(EffectEstimate& e) {
  e.ci_lo = e.tau - 1.96 * e.se;
  e.ci_hi = e.tau + 1.96 * e.se;
}

}  // namespace cbench
