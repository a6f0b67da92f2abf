#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hintbandit/rng.hpp"

namespace hintbandit {

// Binary per-hint loss: 0 when the hint was followed by new output, else 1.
class Loss {
 public:
  static Loss zero() { return Loss(0); }
  static Loss one() { return Loss(1); }
  static Loss from_int(int value);

  int value() const { return value_; }
  bool operator==(const Loss&) const = default;

 private:
  explicit Loss(int value) : value_(value) {}
  int value_;
};

struct PullRecord {
  std::uint64_t t = 0;  // 1-based pull index
  std::size_t arm = 0;
  std::vector<double> probabilities;  // distribution the arm was drawn from
  std::optional<Loss> loss;           // empty while unresolved
};

// EXP3 over k arms with binary losses and a step size fixed from an assumed
// horizon. Pulls are two-phase: sample() opens a pull, record_loss() closes
// it once the outcome is known.
//
// Weights live in log space; probabilities are formed by max-shifted
// exponentiation, so long loss streaks cannot underflow the simplex.
class Exp3Bandit {
 public:
  // eta = sqrt(2 ln k / (T k)). Throws Error if k < 2 or horizon < 1.
  Exp3Bandit(std::size_t arm_count, double horizon);

  static double step_size(std::size_t arm_count, double horizon);

  std::size_t arm_count() const { return log_weights_.size(); }
  double eta() const { return eta_; }
  // Number of resolved pulls.
  std::uint64_t t() const { return resolved_; }

  std::vector<double> weights() const;
  const std::vector<double>& log_weights() const { return log_weights_; }
  std::vector<double> probabilities() const;

  // Opens a pull. `available`, when nonempty, masks arms out of this draw;
  // the distribution is renormalized over the remaining arms and that
  // renormalized vector is what the later update divides by. Throws
  // StateError if a pull is still open or no arm is available.
  std::size_t sample(Rng& rng, std::span<const bool> available = {});

  // Drops the open pull without any update (used when the sampled arm turns
  // out to be unable to produce a hint).
  void cancel_pending();

  // Closes the open pull. Throws StateError if nothing is open or `arm`
  // differs from the sampled arm.
  void record_loss(std::size_t arm, Loss loss);

  const std::optional<PullRecord>& pending() const { return pending_; }
  const std::vector<PullRecord>& history() const { return history_; }

  // Rebuilds a bandit from persisted state (used when loading records).
  static Exp3Bandit restore(double eta, std::vector<double> log_weights,
                            std::vector<PullRecord> history,
                            std::optional<PullRecord> pending);

 private:
  Exp3Bandit() = default;

  double eta_ = 0.0;
  std::vector<double> log_weights_;
  std::uint64_t resolved_ = 0;
  std::uint64_t next_t_ = 1;
  std::optional<PullRecord> pending_;
  std::vector<PullRecord> history_;
};

}  // namespace hintbandit
