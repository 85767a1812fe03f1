#include "dtfl/tier_profile.hpp"

#include <string>

#include "dtfl/errors.hpp"

namespace dtfl {

const TierProfile& TierProfileTable::at(int tier) const {
  if (tier < 1 || tier > tier_count())
    throw InputError("tier " + std::to_string(tier) + " outside [1, " + std::to_string(tier_count()) + "]");
  return tiers[static_cast<std::size_t>(tier - 1)];
}

void TierProfileTable::validate() const {
  if (tiers.empty()) throw InputError("empty tier profile table");
  for (std::size_t i = 0; i < tiers.size(); ++i) {
    const auto& t = tiers[i];
    if (!(t.client_seconds_per_batch > 0.0 && t.server_seconds_per_batch > 0.0 &&
          t.transfer_bytes_per_batch > 0.0 && t.client_model_bytes > 0.0))
      throw InputError("tier profile entries must be positive");
    if (i > 0 && !(t.client_seconds_per_batch > tiers[i - 1].client_seconds_per_batch))
      throw InputError("client-side profile times must increase with the tier");
    if (i > 0 && !(t.server_seconds_per_batch < tiers[i - 1].server_seconds_per_batch))
      throw InputError("server-side profile times must decrease with the tier");
  }
}

double dense_flops(std::size_t batch, std::size_t in, std::size_t out) {
  return 6.0 * static_cast<double>(batch) * static_cast<double>(in) * static_cast<double>(out);
}

TierProfileTable profile_tiers(const BlockStack& global, const TierLayout& layout, std::size_t batch_size,
                               const CostModel& cost) {
  if (batch_size == 0) throw InputError("profile_tiers: batch size must be positive");
  if (!(cost.client_flops_per_s > 0.0 && cost.server_flops_per_s > 0.0 && cost.value_bytes > 0.0 &&
        cost.label_bytes >= 0.0))
    throw InputError("profile_tiers: cost model rates and sizes must be positive");

  const auto& blocks = global.blocks();
  std::vector<double> block_flops;
  for (const auto& b : blocks) {
    double f = 0.0;
    for (const auto& layer : b.layers) f += dense_flops(batch_size, layer.in_dim(), layer.out_dim());
    block_flops.push_back(f);
  }
  const std::size_t classes = global.classes();
  const double classifier_flops = dense_flops(batch_size, global.classifier().in_dim(), classes);
  const double batch = static_cast<double>(batch_size);

  TierProfileTable table;
  table.batch_size = batch_size;
  for (int m = 1; m <= layout.tiers(); ++m) {
    const std::size_t cut = layout.cut(m);
    const std::size_t width = global.width_after(cut);
    double client = dense_flops(batch_size, width, classes);  // aux head
    double server = classifier_flops;
    double client_params = static_cast<double>(width * classes + classes);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (b < cut) {
        client += block_flops[b];
        client_params += static_cast<double>(blocks[b].parameter_count());
      } else {
        server += block_flops[b];
      }
    }
    TierProfile p;
    p.tier = m;
    p.transfer_bytes_per_batch = batch * static_cast<double>(width) * cost.value_bytes + batch * cost.label_bytes;
    p.client_model_bytes = client_params * cost.value_bytes;
    p.client_seconds_per_batch = client / cost.client_flops_per_s;
    p.server_seconds_per_batch = server / cost.server_flops_per_s;
    table.tiers.push_back(p);
  }

  double full = classifier_flops;
  for (double f : block_flops) full += f;
  table.full_seconds_per_batch = full / cost.client_flops_per_s;
  table.full_model_bytes = static_cast<double>(global.parameter_count()) * cost.value_bytes;
  table.validate();
  return table;
}

}  // namespace dtfl
