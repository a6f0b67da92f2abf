#include "hintbandit/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "hintbandit/arms.hpp"
#include "hintbandit/errors.hpp"

namespace hintbandit {

namespace {

std::vector<const FeatureEvent*> fresh_features(const SessionRecord& record) {
  std::vector<const FeatureEvent*> out;
  for (const auto* f : record.features()) {
    if (!f->is_duplicate) out.push_back(f);
  }
  return out;
}

double two_sided_t(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << "\r\n";
}

}  // namespace

// -- counts -------------------------------------------------------------------

std::size_t feature_count(const SessionRecord& record) {
  return fresh_features(record).size();
}

std::size_t token_count(const SessionRecord& record) {
  std::size_t n = 0;
  for (const auto* f : fresh_features(record)) n += f->word_types.size();
  return n;
}

std::size_t word_type_count(const SessionRecord& record) {
  std::set<std::string> types;
  for (const auto* f : fresh_features(record)) types.insert(f->word_types.begin(), f->word_types.end());
  return types.size();
}

double type_density(const SessionRecord& record) {
  const std::size_t tokens = token_count(record);
  if (tokens == 0) throw Error("type density is undefined for a record without words");
  return static_cast<double>(word_type_count(record)) / static_cast<double>(tokens);
}

// -- distances ----------------------------------------------------------------

std::optional<double> min_linkage_distance(std::span<const std::string> x,
                                           std::span<const std::string> y,
                                           const EmbeddingSpace& space) {
  std::vector<std::size_t> xs, ys;
  for (const auto& w : x) {
    if (auto i = space.index_of(w)) xs.push_back(*i);
  }
  for (const auto& w : y) {
    if (auto i = space.index_of(w)) ys.push_back(*i);
  }
  if (xs.empty() || ys.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (auto i : xs) {
    for (auto j : ys) best = std::min(best, space.squared_distance_at(i, j));
  }
  return std::sqrt(best);
}

RelatednessCurve relatedness_curve(std::span<const SessionRecord> corpus,
                                   const std::string& concept_word,
                                   const EmbeddingSpace& space, CurveOptions options) {
  if (options.window_lo > options.window_hi) throw Error("empty offset window");
  const std::string target = fold_case(concept_word);
  auto wanted = [&](const SessionRecord& r, Condition c) {
    return r.config.condition == c && r.config.concept_word == target &&
           (options.include_practice || !r.config.practice);
  };

  std::vector<const FeatureEvent*> baseline_features;
  for (const auto& r : corpus) {
    if (!wanted(r, Condition::kUnhinted)) continue;
    for (const auto* f : fresh_features(r)) baseline_features.push_back(f);
  }

  struct Stats {
    double mean, sd;
  };
  std::map<std::vector<std::string>, Stats> baselines;
  auto baseline_for = [&](const std::vector<std::string>& hint_words) -> const Stats& {
    auto it = baselines.find(hint_words);
    if (it != baselines.end()) return it->second;
    std::vector<double> d;
    for (const auto* f : baseline_features) {
      if (auto v = min_linkage_distance(f->vocab_words, hint_words, space)) d.push_back(*v);
    }
    if (d.size() < 2) {
      throw Error("baseline for concept '" + target + "' has fewer than two usable features");
    }
    const double m = mean_of(d);
    const double sd = sample_sd(d, m);
    if (!(sd > 0.0)) throw Error("baseline distances have zero spread");
    return baselines.emplace(hint_words, Stats{m, sd}).first->second;
  };

  const std::size_t width = static_cast<std::size_t>(options.window_hi - options.window_lo + 1);
  std::vector<double> sum(width, 0.0);
  RelatednessCurve curve;
  curve.n.assign(width, 0);
  for (int o = options.window_lo; o <= options.window_hi; ++o) curve.offsets.push_back(o);

  for (const auto& r : corpus) {
    if (!wanted(r, Condition::kHinted)) continue;
    const auto features = fresh_features(r);
    for (const auto* h : r.hints()) {
      if (!min_linkage_distance(h->words, h->words, space)) continue;
      const auto first_after = static_cast<long>(
          std::partition_point(features.begin(), features.end(),
                               [&](const FeatureEvent* f) { return f->t_ms < h->t_ms; }) -
          features.begin());
      const Stats& base = baseline_for(h->words);
      ++curve.hints;
      for (int o = options.window_lo; o <= options.window_hi; ++o) {
        const long k = first_after + o;
        if (k < 0 || k >= static_cast<long>(features.size())) continue;
        auto d = min_linkage_distance(features[k]->vocab_words, h->words, space);
        if (!d) continue;
        const auto slot = static_cast<std::size_t>(o - options.window_lo);
        sum[slot] += zscore(*d, base.mean, base.sd);
        ++curve.n[slot];
      }
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    curve.mean_z.push_back(curve.n[i] ? sum[i] / static_cast<double>(curve.n[i])
                                      : std::numeric_limits<double>::quiet_NaN());
  }
  return curve;
}

// -- bandit summaries ---------------------------------------------------------

std::optional<std::size_t> least_loss_arm(const Exp3Bandit& bandit) {
  std::vector<long> losses(bandit.arm_count(), 0), pulls(bandit.arm_count(), 0);
  for (const auto& p : bandit.history()) {
    if (!p.loss) continue;
    losses[p.arm] += p.loss->value();
    ++pulls[p.arm];
  }
  std::optional<std::size_t> best;
  bool tied = false;
  for (std::size_t a = 0; a < losses.size(); ++a) {
    if (pulls[a] == 0) continue;
    if (!best) {
      best = a;
      continue;
    }
    // Compare mean losses exactly: l_a / n_a against l_b / n_b.
    const long lhs = losses[a] * pulls[*best];
    const long rhs = losses[*best] * pulls[a];
    if (lhs < rhs) {
      best = a;
      tied = false;
    } else if (lhs == rhs) {
      tied = true;
    }
  }
  if (tied) return std::nullopt;
  return best;
}

ArmPreferenceSummary arm_preference_summary(std::span<const SessionRecord> corpus,
                                            bool include_practice) {
  ArmPreferenceSummary s;
  for (const auto& arm : default_arms()) s.arms.push_back(arm.name);
  s.mean_final_weight.assign(s.arms.size(), 0.0);
  s.wins.assign(s.arms.size(), 0);
  for (const auto& r : corpus) {
    if (r.config.condition != Condition::kHinted || !r.bandit) continue;
    if (r.config.practice && !include_practice) continue;
    if (r.bandit->history().empty()) continue;
    const auto p = r.bandit->probabilities();
    for (std::size_t a = 0; a < s.arms.size(); ++a) s.mean_final_weight[a] += p[a];
    const auto winner = least_loss_arm(*r.bandit);
    if (winner) {
      ++s.wins[*winner];
      ++s.unique_winners;
    }
    s.participants.push_back(r.config.participant_id);
    s.least_loss_arm.push_back(winner);
    ++s.records;
  }
  if (s.records) {
    for (double& w : s.mean_final_weight) w /= static_cast<double>(s.records);
  }
  return s;
}

// -- statistics ---------------------------------------------------------------

Describe describe(std::span<const double> values) {
  Describe d;
  d.n = values.size();
  if (d.n == 0) return d;
  d.mean = mean_of(values);
  d.sd = d.n > 1 ? sample_sd(values, d.mean) : 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  d.median = d.n % 2 ? sorted[d.n / 2] : 0.5 * (sorted[d.n / 2 - 1] + sorted[d.n / 2]);
  return d;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: samples differ in length");
  if (x.size() < 3) throw Error("pearson: need at least three pairs");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: zero variance");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(c.n - 2);
  if (std::abs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    c.p = two_sided_t(c.r * std::sqrt(df / (1.0 - c.r * c.r)), df);
  }
  return c;
}

TTest paired_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("paired t-test: samples differ in length");
  if (x.size() < 2) throw Error("paired t-test: need at least two pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  const double m = mean_of(d);
  const double sd = sample_sd(d, m);
  if (sd == 0.0) throw Error("paired t-test: zero variance in differences");
  TTest t;
  t.df = static_cast<double>(d.size() - 1);
  t.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
  t.p = two_sided_t(t.t, t.df);
  return t;
}

TTest welch_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2) throw Error("welch t-test: need two values per group");
  const double mx = mean_of(x), my = mean_of(y);
  const double vx = std::pow(sample_sd(x, mx), 2) / static_cast<double>(x.size());
  const double vy = std::pow(sample_sd(y, my), 2) / static_cast<double>(y.size());
  if (vx + vy == 0.0) throw Error("welch t-test: zero variance");
  TTest t;
  t.t = (mx - my) / std::sqrt(vx + vy);
  t.df = (vx + vy) * (vx + vy) /
         (vx * vx / static_cast<double>(x.size() - 1) + vy * vy / static_cast<double>(y.size() - 1));
  t.p = two_sided_t(t.t, t.df);
  return t;
}

double binomial_test_greater(std::size_t successes, std::size_t trials, double p) {
  if (successes > trials) throw Error("binomial test: more successes than trials");
  if (successes == 0) return 1.0;
  boost::math::binomial dist(static_cast<double>(trials), p);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(successes - 1)));
}

Correlation weight_performance_correlation(std::span<const SessionRecord> corpus,
                                           const std::string& arm) {
  const std::size_t a = arm_index(arm);
  std::vector<double> w, f;
  for (const auto& r : corpus) {
    if (r.config.condition != Condition::kHinted || !r.bandit || r.config.practice) continue;
    w.push_back(r.bandit->probabilities()[a]);
    f.push_back(static_cast<double>(feature_count(r)));
  }
  return pearson(w, f);
}

std::vector<SessionRecord> filter_outliers(std::span<const SessionRecord> corpus, double k) {
  std::vector<double> counts;
  for (const auto& r : corpus) counts.push_back(static_cast<double>(feature_count(r)));
  if (counts.size() < 2) return {corpus.begin(), corpus.end()};
  const auto d = describe(counts);
  const double limit = d.mean + k * d.sd;
  std::vector<SessionRecord> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (counts[i] <= limit) out.push_back(corpus[i]);
  }
  return out;
}

std::vector<SessionRecord> analysis_records(std::span<const SessionRecord> corpus,
                                            bool include_practice, bool include_incomplete) {
  std::vector<SessionRecord> out;
  for (const auto& r : corpus) {
    if (!include_practice && r.config.practice) continue;
    if (!include_incomplete && !r.complete) continue;
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const SessionRecord& a, const SessionRecord& b) {
    return std::tie(a.config.participant_id, a.config.block) <
           std::tie(b.config.participant_id, b.config.block);
  });
  return out;
}

// -- CSV ----------------------------------------------------------------------

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void export_csv(std::span<const SessionRecord> corpus, std::ostream& out) {
  std::vector<std::string> header = {"participant_id", "concept",         "condition",
                                     "block",          "practice",        "source",
                                     "complete",       "feature_count",   "word_type_count",
                                     "token_count",    "type_density",    "hint_count"};
  for (const auto& arm : default_arms()) header.push_back("weight_" + arm.name);
  write_row(out, header);
  for (const auto& r : corpus) {
    const std::size_t tokens = token_count(r);
    std::vector<std::string> row = {
        r.config.participant_id,
        r.config.concept_word,
        std::string(to_string(r.config.condition)),
        std::to_string(r.config.block),
        r.config.practice ? "true" : "false",
        r.config.source,
        r.complete ? "true" : "false",
        std::to_string(feature_count(r)),
        std::to_string(word_type_count(r)),
        std::to_string(tokens),
        tokens ? format_double(type_density(r)) : "",
        std::to_string(r.hints().size())};
    if (r.bandit) {
      for (double p : r.bandit->probabilities()) row.push_back(format_double(p));
    } else {
      row.resize(row.size() + default_arms().size());
    }
    write_row(out, row);
  }
}

void export_csv(std::span<const SessionRecord> corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write CSV: " + path.string());
  export_csv(corpus, out);
  if (!out) throw IoError("write failed: " + path.string());
}

void write_metric_csv(std::span<const SessionRecord> corpus, const std::string& metric,
                      std::ostream& out) {
  if (metric != "features" && metric != "types" && metric != "density") {
    throw Error("unknown metric '" + metric + "'");
  }
  write_row(out, {"participant_id", "concept", "condition", "block", metric});
  for (const auto& r : corpus) {
    std::string value;
    if (metric == "features") {
      value = std::to_string(feature_count(r));
    } else if (metric == "types") {
      value = std::to_string(word_type_count(r));
    } else {
      value = token_count(r) ? format_double(type_density(r)) : "";
    }
    write_row(out, {r.config.participant_id, r.config.concept_word,
                    std::string(to_string(r.config.condition)), std::to_string(r.config.block),
                    value});
  }
}

void write_curve_csv(const RelatednessCurve& curve, std::ostream& out) {
  write_row(out, {"offset", "mean_z", "n"});
  for (std::size_t i = 0; i < curve.offsets.size(); ++i) {
    write_row(out, {std::to_string(curve.offsets[i]), format_double(curve.mean_z[i]),
                    std::to_string(curve.n[i])});
  }
}

void write_arms_csv(const ArmPreferenceSummary& s, std::ostream& out) {
  write_row(out, {"arm", "mean_final_weight", "wins", "unique_winners", "records",
                  "binomial_p"});
  for (std::size_t a = 0; a < s.arms.size(); ++a) {
    write_row(out, {s.arms[a], format_double(s.mean_final_weight[a]), std::to_string(s.wins[a]),
                    std::to_string(s.unique_winners), std::to_string(s.records),
                    format_double(binomial_test_greater(s.wins[a], s.unique_winners,
                                                        1.0 / static_cast<double>(s.arms.size())))});
  }
}

void write_correlation_csv(const std::vector<std::pair<std::string, Correlation>>& rows,
                           std::ostream& out) {
  write_row(out, {"arm", "n", "r", "p"});
  for (const auto& [arm, c] : rows) {
    write_row(out, {arm, std::to_string(c.n), format_double(c.r), format_double(c.p)});
  }
}

}  // namespace hintbandit
