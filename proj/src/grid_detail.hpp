#pragma once

// Per-slot interpolation kernels shared by the single-point reference path
// (grids.cpp) and the batched kernels (grid_kernels.cpp).

#include <cmath>

#include "tilted/grids.hpp"

namespace tilted::detail {

inline void rotate(const Mat3& R, const double* p, int dim, double* out) {
  if (dim == 2) {
    out[0] = R[0][0] * p[0] + R[0][1] * p[1];
    out[1] = R[1][0] * p[0] + R[1][1] * p[1];
    out[2] = 0.0;
  } else {
    for (int i = 0; i < 3; ++i) out[i] = R[i][0] * p[0] + R[i][1] * p[1] + R[i][2] * p[2];
  }
}

// value[c] for the slot at rotated coordinates q (length 3).
inline void interp_slot(const FactorSlot& slot, const double* data, const double* q,
                        BoundaryMode boundary, double* out) {
  const int C = slot.channels;
  const FactorShape& s = slot.shape;
  const LinearStencil su = linear_stencil(s.nodes[0], q[s.axes[0]], boundary);
  if (s.rank == 1) {
    const double* a = data + static_cast<std::size_t>(su.i0) * C;
    const double* b = a + C;
    const double w = su.w;
    for (int c = 0; c < C; ++c) out[c] = a[c] + w * (b[c] - a[c]);
    return;
  }
  const LinearStencil sv = linear_stencil(s.nodes[1], q[s.axes[1]], boundary);
  const std::size_t row = static_cast<std::size_t>(s.nodes[0]) * C;
  const double* A = data + static_cast<std::size_t>(sv.i0) * row + static_cast<std::size_t>(su.i0) * C;
  const double* B = A + C;
  const double* Cc = A + row;
  const double* D = Cc + C;
  const double wu = su.w, wv = sv.w;
  for (int c = 0; c < C; ++c) {
    const double top = A[c] + wu * (B[c] - A[c]);
    const double bottom = Cc[c] + wu * (D[c] - Cc[c]);
    out[c] = top + wv * (bottom - top);
  }
}

// Scatters grad_out into grad_data and accumulates dL/dq into grad_q.
inline void interp_slot_vjp(const FactorSlot& slot, const double* data, const double* q,
                            BoundaryMode boundary, const double* grad_out, double* grad_data,
                            double* grad_q) {
  const int C = slot.channels;
  const FactorShape& s = slot.shape;
  const LinearStencil su = linear_stencil(s.nodes[0], q[s.axes[0]], boundary);
  if (s.rank == 1) {
    const std::size_t off = static_cast<std::size_t>(su.i0) * C;
    const double* a = data + off;
    const double* b = a + C;
    double* ga = grad_data + off;
    double* gb = ga + C;
    const double w = su.w;
    double du = 0.0;
    for (int c = 0; c < C; ++c) {
      const double g = grad_out[c];
      ga[c] += (1.0 - w) * g;
      gb[c] += w * g;
      du += g * (b[c] - a[c]);
    }
    grad_q[s.axes[0]] += du * su.dw_dx;
    return;
  }
  const LinearStencil sv = linear_stencil(s.nodes[1], q[s.axes[1]], boundary);
  const std::size_t row = static_cast<std::size_t>(s.nodes[0]) * C;
  const std::size_t off = static_cast<std::size_t>(sv.i0) * row + static_cast<std::size_t>(su.i0) * C;
  const double* A = data + off;
  const double* B = A + C;
  const double* Cc = A + row;
  const double* D = Cc + C;
  double* gA = grad_data + off;
  double* gB = gA + C;
  double* gC = gA + row;
  double* gD = gC + C;
  const double wu = su.w, wv = sv.w;
  const double w00 = (1 - wu) * (1 - wv), w01 = wu * (1 - wv), w10 = (1 - wu) * wv, w11 = wu * wv;
  double du = 0.0, dv = 0.0;
  for (int c = 0; c < C; ++c) {
    const double g = grad_out[c];
    gA[c] += w00 * g;
    gB[c] += w01 * g;
    gC[c] += w10 * g;
    gD[c] += w11 * g;
    du += g * ((1 - wv) * (B[c] - A[c]) + wv * (D[c] - Cc[c]));
    dv += g * ((1 - wu) * (Cc[c] - A[c]) + wu * (D[c] - B[c]));
  }
  grad_q[s.axes[0]] += du * su.dw_dx;
  grad_q[s.axes[1]] += dv * sv.dw_dx;
}

// G += g p^T with p embedded in R^3.
inline void accumulate_outer(Mat3& G, const double* g, const double* p, int dim) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < dim; ++j) G[i][j] += g[i] * p[j];
}

}  // namespace tilted::detail
