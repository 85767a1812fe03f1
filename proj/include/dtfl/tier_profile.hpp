#pragma once

#include <cstddef>
#include <vector>

#include "dtfl/split_model.hpp"

namespace dtfl {

/// Converts layer shapes into reference seconds and wire bytes. Compute cost
/// of a dense layer on a batch is 6 * batch * in * out floating-point
/// operations (2 forward, 4 backward).
struct CostModel {
  double client_flops_per_s = 1e9;  // reference client, cpu_factor = 1.0
  double server_flops_per_s = 1e10;
  double value_bytes = 4.0;  // per activation or parameter on the wire
  double label_bytes = 8.0;
};

struct TierProfile {
  int tier = 0;
  double transfer_bytes_per_batch = 0.0;  // D_size(m): activations at the cut + labels
  double client_model_bytes = 0.0;        // P_c(m): client blocks + aux head
  double client_seconds_per_batch = 0.0;  // T^{c_p}(m)
  double server_seconds_per_batch = 0.0;  // T^{s_p}(m)
};

/// Per-tier transfer sizes and reference compute times, plus the whole-model
/// figures used by the FedAvg baseline.
struct TierProfileTable {
  std::size_t batch_size = 0;
  std::vector<TierProfile> tiers;
  double full_model_bytes = 0.0;
  double full_seconds_per_batch = 0.0;

  int tier_count() const noexcept { return static_cast<int>(tiers.size()); }
  const TierProfile& at(int tier) const;
  /// Throws InputError unless client times strictly increase, server times
  /// strictly decrease and everything is positive.
  void validate() const;
};

double dense_flops(std::size_t batch, std::size_t in, std::size_t out);

/// Profiles every tier of `layout` on a standard batch of `batch_size` rows.
TierProfileTable profile_tiers(const BlockStack& global, const TierLayout& layout, std::size_t batch_size,
                               const CostModel& cost);

}  // namespace dtfl
