#pragma once

#include "dtfl/tensor.hpp"

// Dense linear-algebra kernels used by the layers and the distance-correlation
// regularizer. Every kernel has a serial reference and an OpenMP version. The
// parallel versions split work over independent output rows and keep the
// per-element summation order of the serial loop, so both produce bitwise
// identical results; tests hold them to that.

namespace dtfl::kernels {

enum class Exec { Serial, Parallel };

/// Work (multiply-adds) below which Exec::Parallel falls back to the serial
/// loop; thread start-up dominates for the small matrices of the block model.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

/// y[i,o] = sum_k x[i,k] * w[o,k] + b[o]   (x: n x in, w: out x in, b: out)
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b, Exec exec = Exec::Parallel);

/// gx[i,k] = sum_o g[i,o] * w[o,k]   (g: n x out, w: out x in)
Tensor matmul_grad_input(const Tensor& g, const Tensor& w, Exec exec = Exec::Parallel);

/// gw[o,k] = sum_i g[i,o] * x[i,k]   (g: n x out, x: n x in)
Tensor matmul_grad_weight(const Tensor& g, const Tensor& x, Exec exec = Exec::Parallel);

/// d[i,j] = || x_i - x_j ||_2 for the rows of x.
Tensor pairwise_distances(const Tensor& x, Exec exec = Exec::Parallel);

}  // namespace dtfl::kernels
