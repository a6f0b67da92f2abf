#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hintbandit/embedding_store.hpp"
#include "hintbandit/session.hpp"

namespace hintbandit {

// -- per-session counts ---------------------------------------------------------
// All counts are over non-duplicate features.

std::size_t feature_count(const SessionRecord& record);
std::size_t token_count(const SessionRecord& record);
std::size_t word_type_count(const SessionRecord& record);
// Distinct types / tokens. Throws Error when the record has no tokens.
double type_density(const SessionRecord& record);

// -- distances ------------------------------------------------------------------

// Smallest pairwise distance between the two word sets. Words missing from
// the space are dropped; nullopt when either side has nothing left.
std::optional<double> min_linkage_distance(std::span<const std::string> x,
                                           std::span<const std::string> y,
                                           const EmbeddingSpace& space);

inline double zscore(double d, double mean, double sd) { return (d - mean) / sd; }

struct RelatednessCurve {
  std::vector<int> offsets;
  std::vector<double> mean_z;  // NaN where n == 0
  std::vector<std::size_t> n;
  std::size_t hints = 0;  // hints that contributed a window
};

struct CurveOptions {
  int window_lo = -5;
  int window_hi = 10;
  bool include_practice = false;
};

// Offset 0 is the first non-duplicate feature after a hint, -1 the last one
// before it. Every hint contributes its own window. The baseline for a hint
// is its distance to every unhinted feature of the same concept. Throws
// Error when a baseline has fewer than two usable features or zero spread.
RelatednessCurve relatedness_curve(std::span<const SessionRecord> corpus,
                                   const std::string& concept_word,
                                   const EmbeddingSpace& space, CurveOptions options = {});

// -- bandit summaries -----------------------------------------------------------

struct ArmPreferenceSummary {
  std::vector<std::string> arms;
  std::vector<double> mean_final_weight;  // normalized, averaged over records
  std::vector<std::size_t> wins;          // unique least-loss arm counts
  std::size_t records = 0;
  std::size_t unique_winners = 0;
  std::vector<std::string> participants;                  // per record
  std::vector<std::optional<std::size_t>> least_loss_arm;  // per record
};

// The least-loss arm is the one with the lowest mean loss among the arms
// pulled at least once; nullopt on ties or with no resolved pull.
std::optional<std::size_t> least_loss_arm(const Exp3Bandit& bandit);

// Hinted, non-practice records with at least one resolved pull.
ArmPreferenceSummary arm_preference_summary(std::span<const SessionRecord> corpus,
                                            bool include_practice = false);

// -- statistics -----------------------------------------------------------------

struct Describe {
  std::size_t n = 0;
  double mean = 0, sd = 0, median = 0;  // sample sd
};
Describe describe(std::span<const double> values);

struct Correlation {
  double r = 0;
  double p = 1;  // two-sided, t with n - 2 df
  std::size_t n = 0;
};
// Throws Error with fewer than three pairs or zero variance.
Correlation pearson(std::span<const double> x, std::span<const double> y);

struct TTest {
  double t = 0;
  double df = 0;
  double p = 1;  // two-sided
};
TTest paired_t_test(std::span<const double> x, std::span<const double> y);
TTest welch_t_test(std::span<const double> x, std::span<const double> y);

// P(X >= successes) for X ~ Binomial(trials, p).
double binomial_test_greater(std::size_t successes, std::size_t trials, double p = 1.0 / 3);

// Final normalized weight on `arm` against feature count, over hinted
// non-practice records.
Correlation weight_performance_correlation(std::span<const SessionRecord> corpus,
                                           const std::string& arm);

// Drops records whose feature count exceeds mean + k * sd of the given set.
std::vector<SessionRecord> filter_outliers(std::span<const SessionRecord> corpus,
                                           double k = 3.5);

// Analysis input by default: no practice sessions and no aborted runs,
// sorted by participant then block so reductions are order-independent.
std::vector<SessionRecord> analysis_records(std::span<const SessionRecord> corpus,
                                            bool include_practice = false,
                                            bool include_incomplete = false);

// -- CSV ------------------------------------------------------------------------
// RFC 4180: CRLF line ends, fields quoted only when needed.

std::string csv_field(const std::string& value);

// One row per session.
void export_csv(std::span<const SessionRecord> corpus, std::ostream& out);
void export_csv(std::span<const SessionRecord> corpus, const std::filesystem::path& path);

// participant, concept, condition, block, <metric> with metric one of
// features | types | density.
void write_metric_csv(std::span<const SessionRecord> corpus, const std::string& metric,
                      std::ostream& out);
void write_curve_csv(const RelatednessCurve& curve, std::ostream& out);
void write_arms_csv(const ArmPreferenceSummary& summary, std::ostream& out);
void write_correlation_csv(const std::vector<std::pair<std::string, Correlation>>& rows,
                           std::ostream& out);

}  // namespace hintbandit
