#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pnerf/numerics/rng.hpp"

namespace pnerf::sched {

// Per-class loss accumulators for the running epoch, and the averages frozen
// at the last epoch boundary. A class that saw no rays keeps its previous
// average.
class ClassLossStats {
 public:
  explicit ClassLossStats(std::size_t classes = 0);

  std::size_t classes() const { return sums_.size(); }
  // Adds rgb_loss + semantic_loss to the class accumulator. Throws
  // ContractError for an unknown class or a negative / non-finite loss.
  void record(std::size_t class_id, double rgb_loss, double semantic_loss);
  // Freezes averages for classes with rays this epoch and resets the
  // accumulators.
  void end_epoch();

  double average(std::size_t class_id) const { return averages_.at(class_id); }
  const std::vector<double>& averages() const { return averages_; }
  const std::vector<double>& sums() const { return sums_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

 private:
  std::vector<double> sums_;
  std::vector<std::uint64_t> counts_;
  std::vector<double> averages_;
};

void record_ray_loss(ClassLossStats& stats, std::size_t class_id, double rgb_loss, double semantic_loss);

struct AllocationPlan {
  std::vector<std::size_t> counts;  // final N_i, summing to total
  std::vector<double> shares;       // real-valued L_i / sum L * total over present classes
  std::vector<std::size_t> rounded;  // largest-remainder counts before the min-1 adjustment
  std::size_t total = 0;
};

// Splits `total` rays over the present classes in proportion to their
// average losses, rounded by largest remainder (ties to the lower class
// index). Present classes left with zero rays then take one ray each from the
// class most rounded up relative to its share. When every present class has
// zero average loss the shares are equal. Throws ContractError when total is
// smaller than the number of present classes or no class is present.
AllocationPlan allocate(std::span<const double> averages, std::size_t total,
                        std::span<const std::size_t> present_classes);
AllocationPlan allocate(const ClassLossStats& stats, std::size_t total, std::span<const std::size_t> present_classes);

// Classes occurring in a label map, ascending.
std::vector<std::size_t> present_classes(std::span<const std::uint8_t> labels, std::size_t classes);

// Draws plan.counts[i] pixels of class i, uniformly without replacement (with
// replacement when the class has fewer pixels than rays). Output is grouped
// by class in ascending order.
std::vector<std::size_t> select_pixels(const AllocationPlan& plan, std::span<const std::uint8_t> labels, num::Rng& rng);

// Uniform-over-image draw without replacement (with replacement if the
// image has fewer pixels than `count`).
std::vector<std::size_t> select_uniform(std::size_t count, std::size_t pixels, num::Rng& rng);

}  // namespace pnerf::sched
