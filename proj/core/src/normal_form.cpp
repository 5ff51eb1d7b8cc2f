#include "mamex/normal_form.hpp"

#include <algorithm>
#include <cmath>

namespace mamex {

EquilibriumKind parse_equilibrium_kind(const std::string& text) {
  if (text == "ne") return EquilibriumKind::ne;
  if (text == "cce") return EquilibriumKind::cce;
  if (text == "ce") return EquilibriumKind::ce;
  throw InputError("unknown equilibrium kind '" + text + "' (expected ne|cce|ce)");
}

std::string to_string(EquilibriumKind kind) {
  switch (kind) {
    case EquilibriumKind::ne: return "ne";
    case EquilibriumKind::cce: return "cce";
    case EquilibriumKind::ce: return "ce";
  }
  return "?";
}

NormalFormGame::NormalFormGame(MixedRadix layout, std::vector<std::vector<double>> payoffs)
    : layout_(std::move(layout)), payoffs_(std::move(payoffs)) {
  if (payoffs_.size() != layout_.num_components()) {
    throw InputError("normal-form game needs one payoff tensor per agent");
  }
  for (std::size_t i = 0; i < payoffs_.size(); ++i) {
    if (payoffs_[i].size() != layout_.size()) {
      throw InputError("payoff tensor of agent " + std::to_string(i) +
                       " has " + std::to_string(payoffs_[i].size()) +
                       " entries, expected " + std::to_string(layout_.size()));
    }
    for (double x : payoffs_[i]) {
      if (!std::isfinite(x)) {
        throw InputError("payoff tensor of agent " + std::to_string(i) +
                         " has a non-finite entry");
      }
    }
  }
}

double NormalFormGame::payoff_range(std::size_t agent) const {
  const auto [lo, hi] = std::minmax_element(payoffs_[agent].begin(), payoffs_[agent].end());
  const double range = *hi - *lo;
  return range > 0.0 ? range : 1.0;
}

double NormalFormGame::payoff_range() const {
  double lo = payoffs_[0][0];
  double hi = lo;
  for (const auto& u : payoffs_) {
    for (double x : u) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  return hi > lo ? hi - lo : 1.0;
}

bool NormalFormGame::is_zero_sum(double tol) const {
  if (num_agents() != 2) return false;
  const double total = payoffs_[0][0] + payoffs_[1][0];
  for (std::size_t j = 0; j < joint_size(); ++j) {
    if (std::abs(payoffs_[0][j] + payoffs_[1][j] - total) > tol) return false;
  }
  return true;
}

}  // namespace mamex
