#include "dtfl/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dtfl/errors.hpp"
#include "dtfl/kernels.hpp"

namespace dtfl {

double PrivacyConfig::alpha_for(int client) const {
  auto it = client_alpha.find(client);
  return it == client_alpha.end() ? alpha : it->second;
}

void PrivacyConfig::validate() const {
  auto check = [](double a) {
    if (!(a >= 0.0 && a <= 1.0)) throw InputError("privacy alpha must lie in [0, 1]");
  };
  check(alpha);
  for (const auto& [client, a] : client_alpha) check(a);
  if (patch_size == 0) throw InputError("patch_size must be positive");
}

namespace {

// Double-centred distance matrix, stored in place of the raw distances.
Tensor centred_distances(const Tensor& x) {
  Tensor d = kernels::pairwise_distances(x);
  const std::size_t n = d.rows();
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row_mean[i] += d(i, j);
    grand += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n * n);
  // d is symmetric, so column means equal row means.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = d(i, j) - row_mean[i] - row_mean[j] + grand;
  return d;
}

double mean_product(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

struct DcorTerms {
  Tensor a;  // centred distances of X
  Tensor b;  // centred distances of Z
  double cross = 0.0;
  double var_x = 0.0;
  double var_z = 0.0;
  double value = 0.0;
};

DcorTerms dcor_terms(const Tensor& x, const Tensor& z) {
  if (x.rank() != 2 || z.rank() != 2 || x.rows() != z.rows())
    throw DimensionError("dcor: X and Z need the same number of rows");
  if (x.rows() < 2) throw InputError("dcor: need at least 2 samples");
  DcorTerms t;
  t.a = centred_distances(x);
  t.b = centred_distances(z);
  t.cross = mean_product(t.a, t.b);
  t.var_x = mean_product(t.a, t.a);
  t.var_z = mean_product(t.b, t.b);
  if (t.var_x > 0.0 && t.var_z > 0.0 && t.cross > 0.0)
    t.value = std::sqrt(t.cross / std::sqrt(t.var_x * t.var_z));
  return t;
}

}  // namespace

double dcor(const Tensor& x, const Tensor& z) { return dcor_terms(x, z).value; }

Tensor dcor_backward(const Tensor& x, const Tensor& z, double grad_scale) {
  DcorTerms t = dcor_terms(x, z);
  const std::size_t n = z.rows();
  const std::size_t h = z.cols();
  Tensor grad = Tensor::matrix(n, h);
  if (t.value == 0.0) return grad;

  // With A double-centred, sum(A.B) = sum(A.b) for the raw distances b, so
  //   d cross / d b_ij = A_ij / n^2,   d var_z / d b_ij = 2 B_ij / n^2.
  // dCor^2 = cross / sqrt(var_x var_z), and d dCor = d(dCor^2) / (2 dCor).
  const double n2 = static_cast<double>(n * n);
  const double root = std::sqrt(t.var_x * t.var_z);
  const double coef_a = 1.0 / (root * n2);
  const double coef_b = t.cross / (root * t.var_z * n2);
  const double outer = grad_scale / (2.0 * t.value);

  const Tensor raw = kernels::pairwise_distances(z);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || raw(i, j) == 0.0) continue;
      // Entries (i,j) and (j,i) both depend on ||z_i - z_j||.
      const double g = 2.0 * outer * (coef_a * t.a(i, j) - coef_b * t.b(i, j)) / raw(i, j);
      for (std::size_t k = 0; k < h; ++k) grad(i, k) += g * (z(i, k) - z(j, k));
    }
  }
  return grad;
}

double private_client_loss(double task_loss, const Tensor& x, const Tensor& z, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
  if (alpha == 0.0) return task_loss;
  const double d = dcor(x, z);
  if (alpha == 1.0) return d;
  return (1.0 - alpha) * task_loss + alpha * d;
}

Tensor patch_shuffle(const Tensor& z, std::size_t patch_size, Rng& rng) {
  if (patch_size == 0) throw InputError("patch_shuffle: patch_size must be positive");
  Tensor out = z;
  const std::size_t width = z.cols();
  const std::size_t patches = width / patch_size;
  if (patches < 2) return out;
  std::vector<std::size_t> order(patches);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    auto src = z.row(i);
    auto dst = out.row(i);
    for (std::size_t p = 0; p < patches; ++p)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(order[p] * patch_size), patch_size,
                  dst.begin() + static_cast<std::ptrdiff_t>(p * patch_size));
  }
  return out;
}

}  // namespace dtfl
