#pragma once

#include "sgdnet/tape.hpp"
#include "sgdnet/tensor.hpp"

namespace sgdnet {

// Elementwise, shapes must agree.
Var add(Var a, Var b);
Var sub(Var a, Var b);

// a * factor for a fixed constant.
Var scale(Var a, double factor);

// s * a where s is a single-element node (e.g. a learnable scalar).
Var scalar_mul(Var s, Var a);

Var reshape(Var a, Shape shape);

/// Same-padded 2-D convolution (cross-correlation, zero borders).
///
/// `x` is H x W (one channel) or C x H x W; `kernels` is Cout x Cin x kh x kw
/// with odd kh, kw; `bias` has Cout elements. The result is Cout x H x W.
Var conv2d(Var x, Var kernels, Var bias);

// max(0, x) + a * min(0, x) with a single learnable slope `a`.
Var prelu(Var x, Var slope);

// Sum of squared entries; single-element result.
Var sum_squares(Var a);

// Sum of single-element nodes, times `factor`.
Var sum_scalars(const std::vector<Var>& terms, double factor = 1.0);

namespace kernels {

// Raw same-padded convolution, accumulating into `out` (Cout*H*W).
void conv2d_forward(const double* x, std::size_t cin, std::size_t h, std::size_t w, const double* k,
                    std::size_t cout, std::size_t kh, std::size_t kw, double* out);

// gx += conv2d^T(gout) for fixed kernels.
void conv2d_backward_input(const double* gout, std::size_t cin, std::size_t h, std::size_t w,
                           const double* k, std::size_t cout, std::size_t kh, std::size_t kw, double* gx);

// gk += d<gout, conv2d(x)>/dk.
void conv2d_backward_kernels(const double* gout, const double* x, std::size_t cin, std::size_t h,
                             std::size_t w, std::size_t cout, std::size_t kh, std::size_t kw, double* gk);

}  // namespace kernels

}  // namespace sgdnet
