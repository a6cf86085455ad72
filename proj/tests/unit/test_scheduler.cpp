#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pnerf/numerics/tensor.hpp"
#include "pnerf/scheduler/scheduler.hpp"

using namespace pnerf;
using namespace pnerf::sched;
using pnerf::num::Rng;

namespace {

std::vector<std::size_t> all_classes(std::size_t k) {
  std::vector<std::size_t> v(k);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

TEST_CASE("record_ray_loss: single ray, mean, carry-forward") {
  ClassLossStats stats(4);
  record_ray_loss(stats, 2, 0.5, 0.3);
  record_ray_loss(stats, 1, 0.4, 0.0);
  record_ray_loss(stats, 1, 0.2, 0.4);
  record_ray_loss(stats, 3, 1.0, 1.0);
  stats.end_epoch();
  CHECK(stats.average(2) == doctest::Approx(0.8));
  CHECK(stats.average(1) == doctest::Approx(0.5));
  CHECK(stats.average(3) == doctest::Approx(2.0));
  record_ray_loss(stats, 2, 0.1, 0.1);
  stats.end_epoch();
  CHECK(stats.average(2) == doctest::Approx(0.2));
  CHECK(stats.average(3) == doctest::Approx(2.0));  // no rays this epoch
}

TEST_CASE("record_ray_loss: unknown class or bad loss is a contract error") {
  ClassLossStats stats(4);
  CHECK_THROWS_AS(record_ray_loss(stats, 4, 0.1, 0.1), ContractError);
  CHECK_THROWS_AS(record_ray_loss(stats, 0, -0.1, 0.1), ContractError);
  CHECK_THROWS_AS(record_ray_loss(stats, 0, std::nan(""), 0.1), ContractError);
}

TEST_CASE("allocate: worked examples") {
  const auto four = all_classes(4);
  CHECK(allocate(std::vector<double>{1, 1, 1, 1}, 1024, four).counts == std::vector<std::size_t>{256, 256, 256, 256});
  CHECK(allocate(std::vector<double>{1, 3}, 1024, all_classes(2)).counts == std::vector<std::size_t>{256, 768});
  const auto p = allocate(std::vector<double>{1, 1, 2}, 10, all_classes(3));
  CHECK(p.shares == std::vector<double>{2.5, 2.5, 5.0});
  CHECK(p.counts == std::vector<std::size_t>{3, 2, 5});
}

TEST_CASE("allocate: absent classes get nothing, present classes at least one") {
  const std::vector<std::size_t> present{0, 2};
  const auto p = allocate(std::vector<double>{1e-9, 5, 100, 7}, 50, present);
  CHECK(p.counts[1] == 0);
  CHECK(p.counts[3] == 0);
  CHECK(p.counts[0] >= 1);
  CHECK(p.counts[0] + p.counts[2] == 50);
}

TEST_CASE("allocate: zero losses split evenly; too small a budget is an error") {
  CHECK(allocate(std::vector<double>{0, 0, 0}, 9, all_classes(3)).counts == std::vector<std::size_t>{3, 3, 3});
  CHECK_THROWS_AS(allocate(std::vector<double>{1, 1, 1}, 2, all_classes(3)), ContractError);
  CHECK_THROWS_AS(allocate(std::vector<double>{1, 1}, 2, std::vector<std::size_t>{}), ContractError);
}

TEST_CASE("allocate: exactness, proportionality and monotonicity on random inputs") {
  Rng rng(1);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    std::vector<double> loss(k);
    for (auto& l : loss) l = std::pow(10.0, rng.uniform(-4, 1));
    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < k; ++c)
      if (rng.uniform() < 0.8) present.push_back(c);
    if (present.empty()) present.push_back(rng.below(k));
    const std::size_t total = present.size() + rng.below(trial % 2 ? 40 : 2000);
    const auto p = allocate(loss, total, present);
    REQUIRE(std::accumulate(p.counts.begin(), p.counts.end(), std::size_t{0}) == total);
    REQUIRE(std::accumulate(p.rounded.begin(), p.rounded.end(), std::size_t{0}) == total);
    for (std::size_t c : present) {
      REQUIRE(std::abs(static_cast<double>(p.rounded[c]) - p.shares[c]) < 1.0);
      REQUIRE(p.counts[c] >= 1);
    }
    const std::size_t i = present[rng.below(present.size())];
    auto bumped = loss;
    bumped[i] *= 1.0 + rng.uniform() * 3.0;
    const auto q = allocate(bumped, total, present);
    INFO("trial " << trial);
    REQUIRE(q.counts[i] >= p.counts[i]);
  }
}

TEST_CASE("allocate: allocation does not depend on class area") {
  // Averages are per ray, so duplicating rays of a class changes nothing.
  ClassLossStats a(3), b(3);
  for (int r = 0; r < 10; ++r) record_ray_loss(a, 0, 0.3, 0.1);
  for (int r = 0; r < 20; ++r) record_ray_loss(b, 0, 0.3, 0.1);
  for (auto* s : {&a, &b}) {
    record_ray_loss(*s, 1, 0.2, 0.2);
    record_ray_loss(*s, 2, 0.9, 0.0);
    s->end_epoch();
  }
  const auto present = all_classes(3);
  CHECK(allocate(a, 100, present).counts == allocate(b, 100, present).counts);
}

TEST_CASE("select_pixels: labels match, zero allocation honoured") {
  std::vector<std::uint8_t> labels(100);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i < 60 ? 0 : i < 90 ? 1 : 2);
  AllocationPlan plan;
  plan.counts = {10, 0, 15};  // class 2 has only 10 pixels
  plan.total = 25;
  Rng rng(2);
  const auto px = select_pixels(plan, labels, rng);
  REQUIRE(px.size() == 25);
  for (std::size_t j = 0; j < 10; ++j) CHECK(labels[px[j]] == 0);
  for (std::size_t j = 10; j < 25; ++j) CHECK(labels[px[j]] == 2);
  std::vector<std::size_t> first(px.begin(), px.begin() + 10);
  std::sort(first.begin(), first.end());
  CHECK(std::adjacent_find(first.begin(), first.end()) == first.end());  // no repeats
}

TEST_CASE("select_pixels: per-pixel frequency within a class is uniform") {
  std::vector<std::uint8_t> labels(40);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 3 == 0 ? 1 : 0);
  AllocationPlan plan;
  plan.counts = {5, 5};
  plan.total = 10;
  Rng rng(3);
  const int epochs = 10000;
  std::vector<double> hits(labels.size(), 0.0);
  for (int e = 0; e < epochs; ++e)
    for (std::size_t p : select_pixels(plan, labels, rng)) hits[p] += 1;
  std::vector<double> area(2, 0.0);
  for (auto l : labels) area[l] += 1;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const double prob = 5.0 / area[labels[p]];
    const double sd = std::sqrt(epochs * prob * (1 - prob));
    CHECK(std::abs(hits[p] - epochs * prob) < 3 * sd);
  }
}

TEST_CASE("select_uniform draws distinct pixels") {
  Rng rng(4);
  auto px = select_uniform(50, 64, rng);
  std::sort(px.begin(), px.end());
  CHECK(std::adjacent_find(px.begin(), px.end()) == px.end());
  CHECK(px.back() < 64);
}

TEST_CASE("present_classes lists labels in order") {
  const std::vector<std::uint8_t> labels{3, 0, 3, 1};
  CHECK(present_classes(labels, 4) == std::vector<std::size_t>{0, 1, 3});
  CHECK_THROWS_AS(present_classes(labels, 3), ContractError);
}
