#pragma once

#include <cstddef>
#include <cstdint>
#include <map>

#include "dtfl/rng.hpp"
#include "dtfl/tensor.hpp"

namespace dtfl {

struct PrivacyConfig {
  double alpha = 0.0;  // weight of the distance-correlation term, in [0, 1]
  bool patch_shuffle = false;
  std::size_t patch_size = 1;
  std::map<int, double> client_alpha;  // per-client overrides of alpha

  double alpha_for(int client) const;
  /// Throws InputError on alpha outside [0,1] or patch_size == 0.
  void validate() const;
};

/// Sample distance correlation between the rows of X (n x d) and Z (n x h),
/// from double-centred pairwise Euclidean distance matrices A and B:
///   dCor = sqrt( mean(A.B) / sqrt(mean(A.A) * mean(B.B)) ).
/// Defined as 0 when either distance variance vanishes. Throws InputError for n < 2.
double dcor(const Tensor& x, const Tensor& z);

/// grad_scale * d dCor(X, Z) / dZ. Zero wherever dcor() returns 0 by convention.
Tensor dcor_backward(const Tensor& x, const Tensor& z, double grad_scale = 1.0);

/// (1 - alpha) * task_loss + alpha * dCor(X, Z).
double private_client_loss(double task_loss, const Tensor& x, const Tensor& z, double alpha);

/// Permutes contiguous feature segments of width `patch_size` independently in
/// every row. A trailing segment shorter than `patch_size` stays in place.
Tensor patch_shuffle(const Tensor& z, std::size_t patch_size, Rng& rng);

}  // namespace dtfl
