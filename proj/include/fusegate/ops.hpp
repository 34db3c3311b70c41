#pragma once

#include <span>
#include <vector>

#include "fusegate/tape.hpp"
#include "fusegate/tensor.hpp"

namespace fusegate {

// Differentiable primitives. Every op validates shapes, computes the value,
// and (when tape != nullptr and some input requires grad) records a pull
// closure on the tape. Passing tape == nullptr runs pure inference.

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape);

// Fully connected: w [m x n], bias [m], x [n] -> [m]. One fused record.
Tensor linear(const Tensor& w, const Tensor& bias, const Tensor& x,
              Tape* tape);

// Valid (unpadded) cross-correlation. x [C_in x T], kernels
// [C_out x C_in x K], bias [C_out] -> [C_out x T_out],
// T_out = floor((T-K)/stride)+1.
Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, Tape* tape);

// Per-channel windowed maximum; ties route the adjoint to the first
// occurrence. x [C x T] -> [C x T_out].
Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride,
                 Tape* tape);

Tensor relu(const Tensor& x, Tape* tape);

// Softmax over a rank-1 tensor; outputs sum to 1 per the gating contract.
Tensor softmax(const Tensor& x, Tape* tape);

// Concatenation along axis 0. Rank-1 inputs chain extents; rank-2 inputs
// stack rows and must share the trailing extent.
Tensor concat(std::span<const Tensor> xs, Tape* tape);

// Inverse of concat: extents must sum to the axis-0 extent.
std::vector<Tensor> split(const Tensor& x, std::span<const std::size_t> extents,
                          Tape* tape);

// Row gather from a rank-2 tensor (group assembly); adjoint scatters back.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows,
                   Tape* tape);

// Elementwise product. Shapes must match, or one operand may be a scalar
// (size 1), which broadcasts across the other.
Tensor hadamard(const Tensor& a, const Tensor& b, Tape* tape);

// Elementwise sum of two same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b, Tape* tape);

// Elementwise sum of k same-shape tensors (batch loss accumulation).
Tensor add_n(std::span<const Tensor> xs, Tape* tape);

// Multiplication by a compile-time constant (not a tape tensor).
Tensor scale(const Tensor& x, double c, Tape* tape);

// Row-major copy into rank-1; channel-major for [C x T] inputs.
Tensor flatten(const Tensor& x, Tape* tape);

// Stable softmax cross-entropy on logits [C] against a class index.
Tensor cross_entropy_loss(const Tensor& logits, std::size_t label, Tape* tape);

}  // namespace fusegate
