#include "fusegate/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fusegate/errors.hpp"

namespace fusegate {

namespace {

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_rank(const Tensor& t, std::size_t rank, const char* op,
                const char* operand) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + operand + " must have rank " +
                         std::to_string(rank) + ", got " +
                         shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  check_rank(a, 2, "matmul", "lhs");
  check_rank(b, 2, "matmul", "rhs");
  const std::size_t m = a.extent(0), k = a.extent(1);
  const std::size_t k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw DimensionError("matmul: inner extents disagree, " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  const bool rg = tape && wants_grad({&a, &b});
  Tensor c = make_tensor({m, n}, rg);
  {
    auto av = a.data();
    auto bv = b.data();
    auto cv = c.data_mut();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        for (std::size_t j = 0; j < n; ++j) cv[i * n + j] += aip * bv[p * n + j];
      }
    }
  }
  if (rg) {
    auto an = a.node(), bn = b.node(), cn = c.node();
    tape->record({an, bn, cn}, [an, bn, cn, m, k, n] {
      const auto& dc = cn->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
              s += dc[i * n + j] * bn->value[p * n + j];
            an->grad[i * k + p] += s;
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i)
              s += an->value[i * k + p] * dc[i * n + j];
            bn->grad[p * n + j] += s;
          }
      }
    });
  }
  return c;
}

Tensor linear(const Tensor& w, const Tensor& bias, const Tensor& x,
              Tape* tape) {
  check_rank(w, 2, "linear", "weight");
  check_rank(bias, 1, "linear", "bias");
  check_rank(x, 1, "linear", "input");
  const std::size_t m = w.extent(0), n = w.extent(1);
  if (x.extent(0) != n || bias.extent(0) != m) {
    throw DimensionError("linear: weight " + shape_to_string(w.shape()) +
                         " incompatible with input " +
                         shape_to_string(x.shape()) + " and bias " +
                         shape_to_string(bias.shape()));
  }
  const bool rg = tape && wants_grad({&w, &bias, &x});
  Tensor y = make_tensor({m}, rg);
  {
    auto wv = w.data();
    auto xv = x.data();
    auto bv = bias.data();
    auto yv = y.data_mut();
    for (std::size_t i = 0; i < m; ++i) {
      double s = bv[i];
      const double* row = wv.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * xv[j];
      yv[i] = s;
    }
  }
  if (rg) {
    auto wn = w.node(), bn = bias.node(), xn = x.node(), yn = y.node();
    tape->record({wn, bn, xn, yn}, [wn, bn, xn, yn, m, n] {
      const auto& dy = yn->grad;
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) bn->grad[i] += dy[i];
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          const double dyi = dy[i];
          double* row = wn->grad.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += dyi * xn->value[j];
        }
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          const double dyi = dy[i];
          const double* row = wn->value.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) xn->grad[j] += dyi * row[j];
        }
      }
    });
  }
  return y;
}

Tensor conv1d(const Tensor& x, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, Tape* tape) {
  check_rank(x, 2, "conv1d", "input");
  check_rank(kernels, 3, "conv1d", "kernels");
  check_rank(bias, 1, "conv1d", "bias");
  if (stride == 0) throw ConfigError("conv1d: stride must be positive");
  const std::size_t c_in = x.extent(0), t_len = x.extent(1);
  const std::size_t c_out = kernels.extent(0), k_in = kernels.extent(1),
                    k = kernels.extent(2);
  if (k_in != c_in) {
    throw DimensionError("conv1d: kernel input channels " +
                         std::to_string(k_in) + " != input channels " +
                         std::to_string(c_in));
  }
  if (bias.extent(0) != c_out) {
    throw DimensionError("conv1d: bias extent " +
                         std::to_string(bias.extent(0)) +
                         " != output channels " + std::to_string(c_out));
  }
  if (k > t_len) {
    throw WindowError("conv1d: kernel size " + std::to_string(k) +
                      " exceeds input length " + std::to_string(t_len));
  }
  const std::size_t t_out = (t_len - k) / stride + 1;
  const bool rg = tape && wants_grad({&x, &kernels, &bias});
  Tensor y = make_tensor({c_out, t_out}, rg);
  {
    auto xv = x.data();
    auto kv = kernels.data();
    auto bv = bias.data();
    auto yv = y.data_mut();
    for (std::size_t o = 0; o < c_out; ++o) {
      for (std::size_t t = 0; t < t_out; ++t) {
        double s = bv[o];
        const std::size_t base = t * stride;
        for (std::size_t c = 0; c < c_in; ++c) {
          const double* xr = xv.data() + c * t_len + base;
          const double* kr = kv.data() + (o * c_in + c) * k;
          for (std::size_t j = 0; j < k; ++j) s += kr[j] * xr[j];
        }
        yv[o * t_out + t] = s;
      }
    }
  }
  if (rg) {
    auto xn = x.node(), kn = kernels.node(), bn = bias.node(), yn = y.node();
    tape->record({xn, kn, bn, yn},
                 [xn, kn, bn, yn, c_in, c_out, t_len, t_out, k, stride] {
      const auto& dy = yn->grad;
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t o = 0; o < c_out; ++o) {
          double s = 0.0;
          for (std::size_t t = 0; t < t_out; ++t) s += dy[o * t_out + t];
          bn->grad[o] += s;
        }
      }
      if (kn->requires_grad) {
        kn->ensure_grad();
        for (std::size_t o = 0; o < c_out; ++o)
          for (std::size_t t = 0; t < t_out; ++t) {
            const double d = dy[o * t_out + t];
            const std::size_t base = t * stride;
            for (std::size_t c = 0; c < c_in; ++c) {
              const double* xr = xn->value.data() + c * t_len + base;
              double* kr = kn->grad.data() + (o * c_in + c) * k;
              for (std::size_t j = 0; j < k; ++j) kr[j] += d * xr[j];
            }
          }
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        for (std::size_t o = 0; o < c_out; ++o)
          for (std::size_t t = 0; t < t_out; ++t) {
            const double d = dy[o * t_out + t];
            const std::size_t base = t * stride;
            for (std::size_t c = 0; c < c_in; ++c) {
              double* xr = xn->grad.data() + c * t_len + base;
              const double* kr = kn->value.data() + (o * c_in + c) * k;
              for (std::size_t j = 0; j < k; ++j) xr[j] += d * kr[j];
            }
          }
      }
    });
  }
  return y;
}

Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride,
                 Tape* tape) {
  check_rank(x, 2, "maxpool1d", "input");
  if (window == 0 || stride == 0) {
    throw ConfigError("maxpool1d: window and stride must be positive");
  }
  const std::size_t c = x.extent(0), t_len = x.extent(1);
  if (window > t_len) {
    throw WindowError("maxpool1d: window " + std::to_string(window) +
                      " exceeds input length " + std::to_string(t_len));
  }
  const std::size_t t_out = (t_len - window) / stride + 1;
  const bool rg = tape && x.requires_grad();
  Tensor y = make_tensor({c, t_out}, rg);
  // argmax per output cell; first occurrence wins on ties (determinism).
  auto argmax = std::make_shared<std::vector<std::size_t>>(c * t_out);
  {
    auto xv = x.data();
    auto yv = y.data_mut();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < t_out; ++t) {
        std::size_t best = ch * t_len + t * stride;
        double best_v = xv[best];
        for (std::size_t j = 1; j < window; ++j) {
          const std::size_t idx = ch * t_len + t * stride + j;
          if (xv[idx] > best_v) {
            best_v = xv[idx];
            best = idx;
          }
        }
        yv[ch * t_out + t] = best_v;
        (*argmax)[ch * t_out + t] = best;
      }
    }
  }
  if (rg) {
    auto xn = x.node(), yn = y.node();
    tape->record({xn, yn}, [xn, yn, argmax] {
      xn->ensure_grad();
      const auto& dy = yn->grad;
      for (std::size_t i = 0; i < dy.size(); ++i)
        xn->grad[(*argmax)[i]] += dy[i];
    });
  }
  return y;
}

Tensor relu(const Tensor& x, Tape* tape) {
  const bool rg = tape && x.requires_grad();
  Tensor y = make_tensor(x.shape(), rg);
  {
    auto xv = x.data();
    auto yv = y.data_mut();
    for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  }
  if (rg) {
    auto xn = x.node(), yn = y.node();
    tape->record({xn, yn}, [xn, yn] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < xn->value.size(); ++i) {
        if (xn->value[i] > 0.0) xn->grad[i] += yn->grad[i];
      }
    });
  }
  return y;
}

Tensor softmax(const Tensor& x, Tape* tape) {
  check_rank(x, 1, "softmax", "input");
  const std::size_t n = x.extent(0);
  const bool rg = tape && x.requires_grad();
  Tensor y = make_tensor({n}, rg);
  {
    auto xv = x.data();
    auto yv = y.data_mut();
    const double mx = *std::max_element(xv.begin(), xv.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      yv[i] = std::exp(xv[i] - mx);
      sum += yv[i];
    }
    for (std::size_t i = 0; i < n; ++i) yv[i] /= sum;
  }
  if (rg) {
    auto xn = x.node(), yn = y.node();
    tape->record({xn, yn}, [xn, yn, n] {
      xn->ensure_grad();
      const auto& yv = yn->value;
      const auto& dy = yn->grad;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += yv[i] * dy[i];
      for (std::size_t i = 0; i < n; ++i) xn->grad[i] += yv[i] * (dy[i] - dot);
    });
  }
  return y;
}

Tensor concat(std::span<const Tensor> xs, Tape* tape) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  const std::size_t rank = xs.front().rank();
  if (rank != 1 && rank != 2) {
    throw DimensionError("concat: inputs must be rank 1 or 2, got " +
                         shape_to_string(xs.front().shape()));
  }
  std::size_t rows = 0;
  const std::size_t trailing = rank == 2 ? xs.front().extent(1) : 1;
  bool rg = false;
  for (const Tensor& t : xs) {
    if (t.rank() != rank || (rank == 2 && t.extent(1) != trailing)) {
      throw DimensionError("concat: mismatched input shapes, " +
                           shape_to_string(xs.front().shape()) + " vs " +
                           shape_to_string(t.shape()));
    }
    rows += t.extent(0);
    rg = rg || t.requires_grad();
  }
  rg = rg && tape;
  Tensor y = rank == 1 ? make_tensor({rows}, rg)
                       : make_tensor({rows, trailing}, rg);
  {
    auto yv = y.data_mut();
    std::size_t offset = 0;
    for (const Tensor& t : xs) {
      auto tv = t.data();
      std::copy(tv.begin(), tv.end(), yv.begin() + offset);
      offset += tv.size();
    }
  }
  if (rg) {
    std::vector<detail::NodePtr> nodes;
    nodes.reserve(xs.size() + 1);
    for (const Tensor& t : xs) nodes.push_back(t.node());
    auto yn = y.node();
    auto inputs = std::make_shared<std::vector<detail::NodePtr>>(nodes);
    nodes.push_back(yn);
    tape->record(std::move(nodes), [inputs, yn] {
      const auto& dy = yn->grad;
      std::size_t offset = 0;
      for (const detail::NodePtr& xn : *inputs) {
        const std::size_t len = xn->value.size();
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t i = 0; i < len; ++i) xn->grad[i] += dy[offset + i];
        }
        offset += len;
      }
    });
  }
  return y;
}

std::vector<Tensor> split(const Tensor& x,
                          std::span<const std::size_t> extents, Tape* tape) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("split: input must be rank 1 or 2, got " +
                         shape_to_string(x.shape()));
  }
  std::size_t total = 0;
  for (std::size_t e : extents) total += e;
  if (total != x.extent(0)) {
    throw DimensionError("split: extents sum to " + std::to_string(total) +
                         " but axis 0 of " + shape_to_string(x.shape()) +
                         " has " + std::to_string(x.extent(0)));
  }
  const std::size_t trailing = x.rank() == 2 ? x.extent(1) : 1;
  const bool rg = tape && x.requires_grad();
  std::vector<Tensor> parts;
  parts.reserve(extents.size());
  std::size_t offset = 0;
  auto xn = x.node();
  for (std::size_t e : extents) {
    Tensor part = x.rank() == 1 ? make_tensor({e}, rg)
                                : make_tensor({e, trailing}, rg);
    auto pv = part.data_mut();
    auto xv = x.data();
    std::copy(xv.begin() + static_cast<std::ptrdiff_t>(offset),
              xv.begin() + static_cast<std::ptrdiff_t>(offset + e * trailing),
              pv.begin());
    if (rg) {
      auto pn = part.node();
      const std::size_t off = offset;
      tape->record({xn, pn}, [xn, pn, off] {
        xn->ensure_grad();
        for (std::size_t i = 0; i < pn->value.size(); ++i)
          xn->grad[off + i] += pn->grad[i];
      });
    }
    offset += e * trailing;
    parts.push_back(std::move(part));
  }
  return parts;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows,
                   Tape* tape) {
  check_rank(x, 2, "gather_rows", "input");
  if (rows.empty()) throw DimensionError("gather_rows: no rows requested");
  const std::size_t t_len = x.extent(1);
  for (std::size_t r : rows) {
    if (r >= x.extent(0)) {
      throw DimensionError("gather_rows: row " + std::to_string(r) +
                           " out of range for " + shape_to_string(x.shape()));
    }
  }
  const bool rg = tape && x.requires_grad();
  Tensor y = make_tensor({rows.size(), t_len}, rg);
  {
    auto xv = x.data();
    auto yv = y.data_mut();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[i] * t_len),
                  t_len, yv.begin() + static_cast<std::ptrdiff_t>(i * t_len));
    }
  }
  if (rg) {
    auto xn = x.node(), yn = y.node();
    auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(),
                                                          rows.end());
    tape->record({xn, yn}, [xn, yn, idx, t_len] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < idx->size(); ++i)
        for (std::size_t j = 0; j < t_len; ++j)
          xn->grad[(*idx)[i] * t_len + j] += yn->grad[i * t_len + j];
    });
  }
  return y;
}

Tensor hadamard(const Tensor& a, const Tensor& b, Tape* tape) {
  const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw DimensionError("hadamard: shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()) +
                         " neither match nor broadcast");
  }
  // Normalize so the scalar (if any) is the gate side.
  const Tensor& gate = a_scalar && !b_scalar ? a : b;
  const Tensor& vec = a_scalar && !b_scalar ? b : a;
  const bool broadcast = gate.size() == 1 && vec.size() != 1;
  const bool rg = tape && wants_grad({&a, &b});
  Tensor y = make_tensor(vec.shape(), rg);
  {
    auto gv = gate.data();
    auto vv = vec.data();
    auto yv = y.data_mut();
    if (broadcast) {
      const double g = gv[0];
      for (std::size_t i = 0; i < vv.size(); ++i) yv[i] = g * vv[i];
    } else {
      for (std::size_t i = 0; i < vv.size(); ++i) yv[i] = gv[i] * vv[i];
    }
  }
  if (rg) {
    auto gn = gate.node(), vn = vec.node(), yn = y.node();
    tape->record({gn, vn, yn}, [gn, vn, yn, broadcast] {
      const auto& dy = yn->grad;
      if (broadcast) {
        if (gn->requires_grad) {
          gn->ensure_grad();
          double s = 0.0;
          for (std::size_t i = 0; i < dy.size(); ++i) s += dy[i] * vn->value[i];
          gn->grad[0] += s;
        }
        if (vn->requires_grad) {
          vn->ensure_grad();
          const double g = gn->value[0];
          for (std::size_t i = 0; i < dy.size(); ++i) vn->grad[i] += g * dy[i];
        }
      } else {
        if (gn->requires_grad) {
          gn->ensure_grad();
          for (std::size_t i = 0; i < dy.size(); ++i)
            gn->grad[i] += dy[i] * vn->value[i];
        }
        if (vn->requires_grad) {
          vn->ensure_grad();
          for (std::size_t i = 0; i < dy.size(); ++i)
            vn->grad[i] += dy[i] * gn->value[i];
        }
      }
    });
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()) + " differ");
  }
  const bool rg = tape && wants_grad({&a, &b});
  Tensor y = make_tensor(a.shape(), rg);
  {
    auto av = a.data();
    auto bv = b.data();
    auto yv = y.data_mut();
    for (std::size_t i = 0; i < av.size(); ++i) yv[i] = av[i] + bv[i];
  }
  if (rg) {
    auto an = a.node(), bn = b.node(), yn = y.node();
    tape->record({an, bn, yn}, [an, bn, yn] {
      for (const auto& n : {an, bn}) {
        if (n->requires_grad) {
          n->ensure_grad();
          for (std::size_t i = 0; i < yn->grad.size(); ++i)
            n->grad[i] += yn->grad[i];
        }
      }
    });
  }
  return y;
}

Tensor add_n(std::span<const Tensor> xs, Tape* tape) {
  if (xs.empty()) throw DimensionError("add_n: no inputs");
  const Shape& shape = xs.front().shape();
  bool rg = false;
  for (const Tensor& t : xs) {
    if (t.shape() != shape) {
      throw DimensionError("add_n: shapes " + shape_to_string(shape) +
                           " and " + shape_to_string(t.shape()) + " differ");
    }
    rg = rg || t.requires_grad();
  }
  rg = rg && tape;
  Tensor y = make_tensor(shape, rg);
  {
    auto yv = y.data_mut();
    for (const Tensor& t : xs) {
      auto tv = t.data();
      for (std::size_t i = 0; i < tv.size(); ++i) yv[i] += tv[i];
    }
  }
  if (rg) {
    std::vector<detail::NodePtr> nodes;
    nodes.reserve(xs.size() + 1);
    for (const Tensor& t : xs) nodes.push_back(t.node());
    auto yn = y.node();
    auto inputs = std::make_shared<std::vector<detail::NodePtr>>(nodes);
    nodes.push_back(yn);
    tape->record(std::move(nodes), [inputs, yn] {
      for (const detail::NodePtr& xn : *inputs) {
        if (!xn->requires_grad) continue;
        xn->ensure_grad();
        for (std::size_t i = 0; i < yn->grad.size(); ++i)
          xn->grad[i] += yn->grad[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& x, double c, Tape* tape) {
  const bool rg = tape && x.requires_grad();
  Tensor y = make_tensor(x.shape(), rg);
  {
    auto xv = x.data();
    auto yv = y.data_mut();
    for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = c * xv[i];
  }
  if (rg) {
    auto xn = x.node(), yn = y.node();
    tape->record({xn, yn}, [xn, yn, c] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < yn->grad.size(); ++i)
        xn->grad[i] += c * yn->grad[i];
    });
  }
  return y;
}

Tensor flatten(const Tensor& x, Tape* tape) {
  const bool rg = tape && x.requires_grad();
  Tensor y = make_tensor({x.size()}, rg);
  {
    auto xv = x.data();
    std::copy(xv.begin(), xv.end(), y.data_mut().begin());
  }
  if (rg) {
    auto xn = x.node(), yn = y.node();
    tape->record({xn, yn}, [xn, yn] {
      xn->ensure_grad();
      for (std::size_t i = 0; i < yn->grad.size(); ++i)
        xn->grad[i] += yn->grad[i];
    });
  }
  return y;
}

Tensor cross_entropy_loss(const Tensor& logits, std::size_t label,
                          Tape* tape) {
  check_rank(logits, 1, "cross_entropy_loss", "logits");
  const std::size_t n = logits.extent(0);
  if (label >= n) {
    throw LabelError("cross_entropy_loss: class index " +
                     std::to_string(label) + " out of range for " +
                     std::to_string(n) + " classes");
  }
  const bool rg = tape && logits.requires_grad();
  Tensor y = make_tensor({1}, rg);
  {
    auto lv = logits.data();
    const double mx = *std::max_element(lv.begin(), lv.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(lv[i] - mx);
    y.data_mut()[0] = std::log(sum) + mx - lv[label];
  }
  if (rg) {
    auto ln = logits.node(), yn = y.node();
    tape->record({ln, yn}, [ln, yn, label, n] {
      ln->ensure_grad();
      const double d = yn->grad[0];
      const double mx = *std::max_element(ln->value.begin(), ln->value.end());
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += std::exp(ln->value[i] - mx);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::exp(ln->value[i] - mx) / sum;
        ln->grad[i] += d * (p - (i == label ? 1.0 : 0.0));
      }
    });
  }
  return y;
}

}  // namespace fusegate
