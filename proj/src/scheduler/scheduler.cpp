#include "pnerf/scheduler/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::sched {

ClassLossStats::ClassLossStats(std::size_t classes) : sums_(classes, 0.0), counts_(classes, 0), averages_(classes, 0.0) {}

void ClassLossStats::record(std::size_t class_id, double rgb_loss, double semantic_loss) {
  if (class_id >= sums_.size()) throw ContractError("record_ray_loss: unknown class " + std::to_string(class_id));
  if (!(std::isfinite(rgb_loss) && std::isfinite(semantic_loss) && rgb_loss >= 0.0 && semantic_loss >= 0.0)) {
    throw ContractError("record_ray_loss: losses must be finite and non-negative");
  }
  sums_[class_id] += rgb_loss + semantic_loss;
  ++counts_[class_id];
}

void ClassLossStats::end_epoch() {
  for (std::size_t i = 0; i < sums_.size(); ++i) {
    if (counts_[i] > 0) averages_[i] = sums_[i] / static_cast<double>(counts_[i]);
    sums_[i] = 0.0;
    counts_[i] = 0;
  }
}

void record_ray_loss(ClassLossStats& stats, std::size_t class_id, double rgb_loss, double semantic_loss) {
  stats.record(class_id, rgb_loss, semantic_loss);
}

AllocationPlan allocate(std::span<const double> averages, std::size_t total, std::span<const std::size_t> present) {
  const std::size_t k = averages.size();
  if (present.empty()) throw ContractError("allocate: no class present");
  if (total < present.size()) {
    throw ContractError("allocate: budget " + std::to_string(total) + " is smaller than the " +
                        std::to_string(present.size()) + " present classes");
  }
  double loss_sum = 0.0;
  for (std::size_t c : present) {
    if (c >= k) throw ContractError("allocate: unknown class " + std::to_string(c));
    if (!(averages[c] >= 0.0 && std::isfinite(averages[c]))) throw ContractError("allocate: bad average loss");
    loss_sum += averages[c];
  }

  AllocationPlan plan;
  plan.total = total;
  plan.shares.assign(k, 0.0);
  plan.rounded.assign(k, 0);
  const double n = static_cast<double>(total);
  for (std::size_t c : present) {
    plan.shares[c] = loss_sum > 0.0 ? averages[c] / loss_sum * n : n / static_cast<double>(present.size());
  }

  std::size_t assigned = 0;
  for (std::size_t c : present) {
    plan.rounded[c] = static_cast<std::size_t>(std::floor(plan.shares[c]));
    assigned += plan.rounded[c];
  }
  // Guard against shares whose floors overshoot through rounding error.
  while (assigned > total) {
    const auto it = std::max_element(present.begin(), present.end(),
                                     [&](std::size_t a, std::size_t b) { return plan.rounded[a] < plan.rounded[b]; });
    --plan.rounded[*it];
    --assigned;
  }
  std::vector<std::size_t> order(present.begin(), present.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = plan.shares[a] - static_cast<double>(plan.rounded[a]);
    const double rb = plan.shares[b] - static_cast<double>(plan.rounded[b]);
    return ra != rb ? ra > rb : a < b;
  });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size(), ++assigned) ++plan.rounded[order[i]];

  plan.counts = plan.rounded;
  for (std::size_t c : present) {
    if (plan.counts[c] > 0) continue;
    std::size_t donor = k;
    double surplus = 0.0;
    for (std::size_t d : present) {
      if (plan.counts[d] < 2) continue;
      const double s = static_cast<double>(plan.counts[d]) - plan.shares[d];
      if (donor == k || s > surplus) {
        donor = d;
        surplus = s;
      }
    }
    --plan.counts[donor];
    ++plan.counts[c];
  }
  return plan;
}

AllocationPlan allocate(const ClassLossStats& stats, std::size_t total, std::span<const std::size_t> present) {
  return allocate(stats.averages(), total, present);
}

std::vector<std::size_t> present_classes(std::span<const std::uint8_t> labels, std::size_t classes) {
  std::vector<bool> seen(classes, false);
  for (auto l : labels) {
    if (l >= classes) throw ContractError("present_classes: label " + std::to_string(l) + " out of range");
    seen[l] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes; ++c)
    if (seen[c]) out.push_back(c);
  return out;
}

namespace {

// Appends `count` entries of `pool` to `out`: a partial Fisher-Yates shuffle
// when the pool is large enough, otherwise independent draws.
void draw(std::vector<std::size_t>& pool, std::size_t count, num::Rng& rng, std::vector<std::size_t>& out) {
  if (count == 0) return;
  if (pool.empty()) throw ContractError("select_pixels: rays allocated to a class with no pixels");
  if (pool.size() >= count) {
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      out.push_back(pool[i]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[rng.below(pool.size())]);
  }
}

}  // namespace

std::vector<std::size_t> select_pixels(const AllocationPlan& plan, std::span<const std::uint8_t> labels,
                                       num::Rng& rng) {
  std::vector<std::vector<std::size_t>> pools(plan.counts.size());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] >= pools.size()) throw ContractError("select_pixels: label out of range");
    pools[labels[p]].push_back(p);
  }
  std::vector<std::size_t> out;
  out.reserve(plan.total);
  for (std::size_t c = 0; c < pools.size(); ++c) draw(pools[c], plan.counts[c], rng, out);
  return out;
}

std::vector<std::size_t> select_uniform(std::size_t count, std::size_t pixels, num::Rng& rng) {
  std::vector<std::size_t> pool(pixels);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(count);
  draw(pool, count, rng, out);
  return out;
}

}  // namespace pnerf::sched
