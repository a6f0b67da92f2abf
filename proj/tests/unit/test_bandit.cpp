#include <cmath>
#include <numeric>

#include "doctest.h"
#include "hintbandit/bandit.hpp"
#include "hintbandit/errors.hpp"

using namespace hintbandit;

namespace {

// Straight transcription of the textbook update on raw weights, kept apart
// from the log-space implementation under test.
struct NaiveExp3 {
  std::vector<double> w;
  double eta;
  NaiveExp3(int k, double T) : w(k, 1.0), eta(std::sqrt(2.0 * std::log(double(k)) / (T * k))) {}
  std::vector<double> p() const {
    double s = 0;
    for (double x : w) s += x;
    std::vector<double> out;
    for (double x : w) out.push_back(x / s);
    return out;
  }
  void update(int arm, int loss) {
    auto probs = p();
    for (int i = 0; i < int(w.size()); ++i) {
      double indicator = (i == arm) ? 1.0 : 0.0;
      w[i] *= std::exp(-eta * indicator / probs[i] * loss);
    }
  }
};

std::vector<double> frequencies(Exp3Bandit& b, Rng& rng, int draws) {
  std::vector<double> counts(b.arm_count(), 0.0);
  for (int i = 0; i < draws; ++i) {
    counts[b.sample(rng)] += 1;
    b.cancel_pending();
  }
  for (double& c : counts) c /= draws;
  return counts;
}

}  // namespace

TEST_SUITE("bandit") {

TEST_CASE("step size from the horizon") {
  CHECK(Exp3Bandit(3, 20).eta() == doctest::Approx(0.191364598665141).epsilon(1e-12));
  CHECK(Exp3Bandit(3, 300).eta() == doctest::Approx(0.049410126912250).epsilon(1e-12));
  CHECK(Exp3Bandit(2, 2.0 * std::log(2.0)).eta() ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(Exp3Bandit(1, 20), Error);
  CHECK_THROWS_AS(Exp3Bandit(3, 0), Error);
}

TEST_CASE("fresh state") {
  Exp3Bandit b(3, 20);
  CHECK(b.t() == 0);
  for (double w : b.weights()) CHECK(w == 1.0);
  for (double p : b.probabilities()) CHECK(p == doctest::Approx(1.0 / 3));
}

TEST_CASE("probabilities from explicit weights") {
  auto b = Exp3Bandit::restore(0.1, {std::log(2.0), 0.0, 0.0}, {}, std::nullopt);
  auto p = b.probabilities();
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.25));
  CHECK(p[2] == doctest::Approx(0.25));
}

TEST_CASE("one loss on arm 0 from a fresh state") {
  Exp3Bandit b(3, 20);
  Rng rng(0);
  // Resample until arm 0 comes up; its pull probability is 1/3 regardless.
  std::size_t arm;
  do {
    b.cancel_pending();
    arm = b.sample(rng);
  } while (arm != 0);
  b.record_loss(0, Loss::one());
  auto w = b.weights();
  CHECK(w[0] == doctest::Approx(0.563215025330495).epsilon(1e-12));
  CHECK(w[1] == 1.0);
  CHECK(w[2] == 1.0);
  auto p = b.probabilities();
  CHECK(p[0] == doctest::Approx(0.219730).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.390135).epsilon(1e-5));
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.t() == 1);
}

TEST_CASE("loss 0 leaves weights unchanged") {
  Exp3Bandit b(3, 20);
  Rng rng(3);
  auto arm = b.sample(rng);
  b.record_loss(arm, Loss::zero());
  for (double w : b.weights()) CHECK(w == 1.0);
}

TEST_CASE("two-phase protocol errors") {
  Exp3Bandit b(3, 20);
  Rng rng(1);
  CHECK_THROWS_AS(b.record_loss(0, Loss::one()), StateError);
  auto arm = b.sample(rng);
  CHECK_THROWS_AS(b.sample(rng), StateError);
  CHECK_THROWS_AS(b.record_loss((arm + 1) % 3, Loss::one()), StateError);
  b.record_loss(arm, Loss::one());
  CHECK_THROWS_AS(b.record_loss(arm, Loss::one()), StateError);
  CHECK_THROWS_AS(Loss::from_int(2), Error);
}

TEST_CASE("sampling frequencies follow the probabilities") {
  Rng rng(2024);
  Exp3Bandit fresh(3, 20);
  for (double f : frequencies(fresh, rng, 10000)) CHECK(std::abs(f - 1.0 / 3) <= 0.02);

  auto skewed = Exp3Bandit::restore(0.1, {std::log(2.0), 0.0, 0.0}, {}, std::nullopt);
  auto f = frequencies(skewed, rng, 10000);
  CHECK(std::abs(f[0] - 0.5) <= 0.02);
  CHECK(std::abs(f[1] - 0.25) <= 0.02);
  CHECK(std::abs(f[2] - 0.25) <= 0.02);

  auto degenerate = Exp3Bandit::restore(0.1, {0.0, -1000.0, -1000.0}, {}, std::nullopt);
  CHECK(frequencies(degenerate, rng, 1000)[0] == 1.0);
}

TEST_CASE("masked sampling renormalizes over available arms") {
  Exp3Bandit b(3, 20);
  Rng rng(8);
  const bool mask[] = {false, true, true};
  for (int i = 0; i < 200; ++i) {
    auto arm = b.sample(rng, mask);
    CHECK(arm != 0);
    CHECK(b.pending()->probabilities[0] == 0.0);
    CHECK(b.pending()->probabilities[1] == doctest::Approx(0.5));
    b.cancel_pending();
  }
  const bool none[] = {false, false, false};
  CHECK_THROWS_AS(b.sample(rng, none), StateError);
}

TEST_CASE("log-space weights match a naive implementation on random loss sequences") {
  Rng env(77);
  for (int rep = 0; rep < 100; ++rep) {
    Exp3Bandit b(3, 20);
    NaiveExp3 naive(3, 20);
    Rng rng(rep);
    for (int t = 0; t < 50; ++t) {
      const auto arm = b.sample(rng);
      const int loss = env.uniform01() < 0.5 ? 1 : 0;
      b.record_loss(arm, Loss::from_int(loss));
      naive.update(int(arm), loss);
      auto w = b.weights();
      for (int i = 0; i < 3; ++i) {
        REQUIRE(std::abs(w[i] - naive.w[i]) <= 1e-9 * naive.w[i]);
      }
      auto p = b.probabilities();
      REQUIRE(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("weights stay positive and unpulled arms never move") {
  Exp3Bandit b(3, 20);
  Rng rng(42);
  for (int t = 0; t < 2000; ++t) {
    auto before = b.log_weights();
    auto arm = b.sample(rng);
    b.record_loss(arm, Loss::one());
    auto after = b.log_weights();
    for (std::size_t i = 0; i < 3; ++i) {
      if (i == arm) {
        CHECK(after[i] < before[i]);
      } else {
        CHECK(after[i] == before[i]);
      }
    }
  }
  // Raw weights would have underflowed by now; probabilities must not.
  auto p = b.probabilities();
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : p) CHECK(x > 0.0);
}

TEST_CASE("identical seed and losses give identical trajectories") {
  auto run = [] {
    Exp3Bandit b(3, 20);
    Rng rng(5);
    std::vector<std::size_t> arms;
    for (int t = 0; t < 40; ++t) {
      auto arm = b.sample(rng);
      arms.push_back(arm);
      b.record_loss(arm, Loss::from_int(t % 3 == 0));
    }
    return std::make_pair(arms, b.log_weights());
  };
  CHECK(run() == run());
}

}  // TEST_SUITE
