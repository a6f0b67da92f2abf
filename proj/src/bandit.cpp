#include "hintbandit/bandit.hpp"

#include <algorithm>
#include <cmath>

#include "hintbandit/errors.hpp"

namespace hintbandit {

Loss Loss::from_int(int value) {
  if (value != 0 && value != 1) throw Error("loss must be 0 or 1");
  return Loss(value);
}

double Exp3Bandit::step_size(std::size_t arm_count, double horizon) {
  if (arm_count < 2) throw Error("EXP3 needs at least two arms");
  if (!(horizon >= 1.0)) throw Error("horizon must be at least 1");
  const double k = static_cast<double>(arm_count);
  return std::sqrt(2.0 * std::log(k) / (horizon * k));
}

Exp3Bandit::Exp3Bandit(std::size_t arm_count, double horizon)
    : eta_(step_size(arm_count, horizon)), log_weights_(arm_count, 0.0) {}

std::vector<double> Exp3Bandit::weights() const {
  std::vector<double> out(log_weights_.size());
  std::transform(log_weights_.begin(), log_weights_.end(), out.begin(),
                 [](double lw) { return std::exp(lw); });
  return out;
}

std::vector<double> Exp3Bandit::probabilities() const {
  const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
  std::vector<double> p(log_weights_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_weights_[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::size_t Exp3Bandit::sample(Rng& rng, std::span<const bool> available) {
  if (pending_) throw StateError("previous pull is still unresolved");
  if (!available.empty() && available.size() != arm_count()) {
    throw Error("availability mask has wrong length");
  }
  std::vector<double> p = probabilities();
  if (!available.empty()) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!available[i]) p[i] = 0.0;
      total += p[i];
    }
    if (!(total > 0.0)) throw StateError("no arm available");
    for (double& x : p) x /= total;
  }
  const std::size_t arm = rng.categorical(p);
  pending_ = PullRecord{next_t_, arm, std::move(p), std::nullopt};
  return arm;
}

void Exp3Bandit::cancel_pending() { pending_.reset(); }

void Exp3Bandit::record_loss(std::size_t arm, Loss loss) {
  if (!pending_) throw StateError("no unresolved pull to record a loss for");
  if (pending_->arm != arm) {
    throw StateError("loss recorded for arm " + std::to_string(arm) +
                     " but arm " + std::to_string(pending_->arm) + " was pulled");
  }
  // Only the pulled arm moves; the others see an implicit loss estimate of 0.
  log_weights_[arm] -= eta_ * static_cast<double>(loss.value()) /
                       pending_->probabilities[arm];
  pending_->loss = loss;
  history_.push_back(std::move(*pending_));
  pending_.reset();
  ++resolved_;
  ++next_t_;
}

Exp3Bandit Exp3Bandit::restore(double eta, std::vector<double> log_weights,
                               std::vector<PullRecord> history,
                               std::optional<PullRecord> pending) {
  if (log_weights.size() < 2) throw Error("EXP3 needs at least two arms");
  if (!(eta > 0.0)) throw Error("eta must be positive");
  Exp3Bandit b;
  b.eta_ = eta;
  b.log_weights_ = std::move(log_weights);
  b.resolved_ = history.size();
  b.next_t_ = history.size() + 1;
  b.history_ = std::move(history);
  b.pending_ = std::move(pending);
  return b;
}

}  // namespace hintbandit
