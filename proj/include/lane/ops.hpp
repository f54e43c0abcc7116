#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lane/tensor.hpp"

// Tape operations.  The set is deliberately small: matmul, bias add,
// elementwise arithmetic and nonlinearities, row-wise broadcasts, softmax,
// reductions, and segment ops for ragged per-ray quadrature.  No general
// broadcasting.

namespace lane::ad {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

namespace detail {

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  LANE_CHECK(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
inline std::pair<int, int> matrix_dims(const Tensor<T>& x, const char* op) {
  const auto& s = x.shape();
  LANE_CHECK(s.size() == 2, std::string(op) + ": expected a 2-D tensor, got " + shape_str(s));
  return {s[0], s[1]};
}

}  // namespace detail

// ---- elementwise binary ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = n.parents[k];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    if (n.parents[0]->requires_grad) {
      n.parents[0]->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) n.parents[0]->grad[i] += n.grad[i];
    }
    if (n.parents[1]->requires_grad) {
      n.parents[1]->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) n.parents[1]->grad[i] -= n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<T> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->value[i];
    }
  });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "div");
  std::vector<T> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  return make_op<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& n) {
    auto& pa = n.parents[0];
    auto& pb = n.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] / pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i)
        pb->grad[i] -= n.grad[i] * pa->value[i] / (pb->value[i] * pb->value[i]);
    }
  });
}

// y = a*x + b, elementwise with scalar coefficients.  Covers negate, scale,
// shift and one-minus without extra node types.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T a, T b) {
  std::vector<T> out(x.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a * x.data()[i] + b;
  return make_op<T>(x.shape(), std::move(out), {x.node()}, [a](Node<T>& n) {
    auto& p = n.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += a * n.grad[i];
  });
}

// ---- elementwise unary ----

namespace detail {

template <typename T, typename FwdFn, typename GradFn>
Tensor<T> unary_op(const Tensor<T>& x, FwdFn fwd, GradFn dfwd) {
  std::vector<T> out(x.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.data()[i]);
  std::vector<T> saved = out;  // most of our unaries differentiate via the output
  return make_op<T>(x.shape(), std::move(out), {x.node()},
                    [dfwd, saved = std::move(saved)](Node<T>& n) {
                      auto& p = n.parents[0];
                      p->ensure_grad();
                      for (size_t i = 0; i < n.grad.size(); ++i)
                        p->grad[i] += n.grad[i] * dfwd(p->value[i], saved[i]);
                    });
}

}  // namespace detail

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary_op(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary_op(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::unary_op(
      x,
      [](T v) {
        if (v > T(30)) return v;
        if (v < T(-30)) return std::exp(v);
        return std::log1p(std::exp(v));
      },
      [](T v, T) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <typename T>
Tensor<T> exp_(const Tensor<T>& x) {
  return detail::unary_op(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> sin_(const Tensor<T>& x) {
  return detail::unary_op(
      x, [](T v) { return std::sin(v); }, [](T v, T) { return std::cos(v); });
}

template <typename T>
Tensor<T> cos_(const Tensor<T>& x) {
  return detail::unary_op(
      x, [](T v) { return std::cos(v); }, [](T v, T) { return -std::sin(v); });
}

// max(x, c) elementwise with a constant; subgradient 0 at the kink.
template <typename T>
Tensor<T> max_scalar(const Tensor<T>& x, T c) {
  return detail::unary_op(
      x, [c](T v) { return v > c ? v : c; }, [c](T v, T) { return v > c ? T(1) : T(0); });
}

// ---- matrix ops ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  auto [m, k] = detail::matrix_dims(a, "matmul");
  auto [k2, n] = detail::matrix_dims(b, "matmul");
  LANE_CHECK(k == k2, "matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
  std::vector<T> out(static_cast<size_t>(m) * n);
  ECMap<T> A(a.data().data(), m, k);
  ECMap<T> B(b.data().data(), k, n);
  EMap<T>(out.data(), m, n).noalias() = A * B;
  return make_op<T>({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node<T>& n_) {
    auto& pa = n_.parents[0];
    auto& pb = n_.parents[1];
    ECMap<T> G(n_.grad.data(), m, n);
    if (pa->requires_grad) {
      pa->ensure_grad();
      ECMap<T> B(pb->value.data(), k, n);
      EMap<T>(pa->grad.data(), m, k).noalias() += G * B.transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      ECMap<T> A(pa->value.data(), m, k);
      EMap<T>(pb->grad.data(), k, n).noalias() += A.transpose() * G;
    }
  });
}

// X [m,n] + b [n], broadcast over rows.
template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& b) {
  auto [m, n] = detail::matrix_dims(x, "add_row_bias");
  LANE_CHECK(b.shape().size() == 1 && b.shape()[0] == n,
             "add_row_bias: bias must be a length-" + std::to_string(n) + " vector");
  std::vector<T> out(x.data().size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(i) * n + j] = x.data()[static_cast<size_t>(i) * n + j] + b.data()[j];
  return make_op<T>({m, n}, std::move(out), {x.node(), b.node()}, [m, n](Node<T>& nd) {
    if (nd.parents[0]->requires_grad) {
      auto& p = nd.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < nd.grad.size(); ++i) p->grad[i] += nd.grad[i];
    }
    if (nd.parents[1]->requires_grad) {
      auto& p = nd.parents[1];
      p->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) p->grad[j] += nd.grad[static_cast<size_t>(i) * n + j];
    }
  });
}

// Per-row dot product of two [m,n] matrices -> [m].
template <typename T>
Tensor<T> rowwise_dot(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "rowwise_dot");
  auto [m, n] = detail::matrix_dims(a, "rowwise_dot");
  std::vector<T> out(m, T(0));
  for (int i = 0; i < m; ++i) {
    T s = 0;
    for (int j = 0; j < n; ++j)
      s += a.data()[static_cast<size_t>(i) * n + j] * b.data()[static_cast<size_t>(i) * n + j];
    out[i] = s;
  }
  return make_op<T>({m}, std::move(out), {a.node(), b.node()}, [m, n](Node<T>& nd) {
    auto& pa = nd.parents[0];
    auto& pb = nd.parents[1];
    for (int i = 0; i < m; ++i) {
      T g = nd.grad[i];
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (int j = 0; j < n; ++j)
          pa->grad[static_cast<size_t>(i) * n + j] += g * pb->value[static_cast<size_t>(i) * n + j];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int j = 0; j < n; ++j)
          pb->grad[static_cast<size_t>(i) * n + j] += g * pa->value[static_cast<size_t>(i) * n + j];
      }
    }
  });
}

// ---- row-wise broadcasts and selections ----

// v [d] -> [m,d] with v in every row.
template <typename T>
Tensor<T> repeat_row(const Tensor<T>& v, int m) {
  LANE_CHECK(v.shape().size() == 1, "repeat_row: expected a vector");
  const int d = v.shape()[0];
  std::vector<T> out(static_cast<size_t>(m) * d);
  for (int i = 0; i < m; ++i)
    std::copy(v.data().begin(), v.data().end(), out.begin() + static_cast<size_t>(i) * d);
  return make_op<T>({m, d}, std::move(out), {v.node()}, [m, d](Node<T>& nd) {
    auto& p = nd.parents[0];
    p->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) p->grad[j] += nd.grad[static_cast<size_t>(i) * d + j];
  });
}

// X [m,c] with row i scaled by s[i].
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s) {
  auto [m, c] = detail::matrix_dims(x, "scale_rows");
  LANE_CHECK(s.shape().size() == 1 && s.shape()[0] == m,
             "scale_rows: scale must be a length-" + std::to_string(m) + " vector");
  std::vector<T> out(x.data().size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(i) * c + j] = x.data()[static_cast<size_t>(i) * c + j] * s.data()[i];
  return make_op<T>({m, c}, std::move(out), {x.node(), s.node()}, [m, c](Node<T>& nd) {
    auto& px = nd.parents[0];
    auto& ps = nd.parents[1];
    if (px->requires_grad) {
      px->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < c; ++j)
          px->grad[static_cast<size_t>(i) * c + j] +=
              nd.grad[static_cast<size_t>(i) * c + j] * ps->value[i];
    }
    if (ps->requires_grad) {
      ps->ensure_grad();
      for (int i = 0; i < m; ++i) {
        T g = 0;
        for (int j = 0; j < c; ++j)
          g += nd.grad[static_cast<size_t>(i) * c + j] * px->value[static_cast<size_t>(i) * c + j];
        ps->grad[i] += g;
      }
    }
  });
}

// Rows of X selected by idx (repeats allowed); backward scatter-adds.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::vector<int> idx) {
  auto [m, c] = detail::matrix_dims(x, "gather_rows");
  for (int i : idx) LANE_CHECK(i >= 0 && i < m, "gather_rows: index out of range");
  const int k = static_cast<int>(idx.size());
  std::vector<T> out(static_cast<size_t>(k) * c);
  for (int i = 0; i < k; ++i)
    std::copy(x.data().begin() + static_cast<size_t>(idx[i]) * c,
              x.data().begin() + static_cast<size_t>(idx[i] + 1) * c,
              out.begin() + static_cast<size_t>(i) * c);
  return make_op<T>({k, c}, std::move(out), {x.node()},
                    [idx = std::move(idx), c](Node<T>& nd) {
                      auto& p = nd.parents[0];
                      p->ensure_grad();
                      for (size_t i = 0; i < idx.size(); ++i)
                        for (int j = 0; j < c; ++j)
                          p->grad[static_cast<size_t>(idx[i]) * c + j] += nd.grad[i * c + j];
                    });
}

// [m,c] filled with `fill`, rows idx overwritten by V's rows (idx must be unique).
template <typename T>
Tensor<T> scatter_rows(int m, const std::vector<int>& idx, const Tensor<T>& v, T fill) {
  auto [k, c] = detail::matrix_dims(v, "scatter_rows");
  LANE_CHECK(static_cast<int>(idx.size()) == k, "scatter_rows: index count must match rows of V");
  std::vector<T> out(static_cast<size_t>(m) * c, fill);
  for (int i = 0; i < k; ++i) {
    LANE_CHECK(idx[i] >= 0 && idx[i] < m, "scatter_rows: index out of range");
    std::copy(v.data().begin() + static_cast<size_t>(i) * c,
              v.data().begin() + static_cast<size_t>(i + 1) * c,
              out.begin() + static_cast<size_t>(idx[i]) * c);
  }
  return make_op<T>({m, c}, std::move(out), {v.node()}, [idx, c](Node<T>& nd) {
    auto& p = nd.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < c; ++j)
        p->grad[i * static_cast<size_t>(c) + j] +=
            nd.grad[static_cast<size_t>(idx[i]) * c + j];
  });
}

// ---- concatenation ----

// Stack along rows.  All inputs must share the column count (vectors allowed).
template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& xs) {
  LANE_CHECK(!xs.empty(), "concat_rows: empty input list");
  const bool is_mat = xs[0].shape().size() == 2;
  const int c = is_mat ? xs[0].shape()[1] : 1;
  int total = 0;
  for (const auto& x : xs) {
    LANE_CHECK(x.shape().size() == xs[0].shape().size() && x.cols() == c,
               "concat_rows: inconsistent shapes");
    total += x.rows();
  }
  std::vector<T> out;
  out.reserve(static_cast<size_t>(total) * c);
  std::vector<NodePtr<T>> parents;
  std::vector<int> row_counts;
  for (const auto& x : xs) {
    out.insert(out.end(), x.data().begin(), x.data().end());
    parents.push_back(x.node());
    row_counts.push_back(x.rows());
  }
  std::vector<int> shape = is_mat ? std::vector<int>{total, c} : std::vector<int>{total};
  return make_op<T>(std::move(shape), std::move(out), std::move(parents),
                    [row_counts, c](Node<T>& nd) {
                      size_t off = 0;
                      for (size_t k = 0; k < nd.parents.size(); ++k) {
                        auto& p = nd.parents[k];
                        const size_t len = static_cast<size_t>(row_counts[k]) * c;
                        if (p->requires_grad) {
                          p->ensure_grad();
                          for (size_t i = 0; i < len; ++i) p->grad[i] += nd.grad[off + i];
                        }
                        off += len;
                      }
                    });
}

// Side-by-side concat of two matrices with equal row counts.
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  auto [m, ca] = detail::matrix_dims(a, "concat_cols");
  auto [mb, cb] = detail::matrix_dims(b, "concat_cols");
  LANE_CHECK(m == mb, "concat_cols: row counts differ");
  std::vector<T> out(static_cast<size_t>(m) * (ca + cb));
  for (int i = 0; i < m; ++i) {
    std::copy(a.data().begin() + static_cast<size_t>(i) * ca,
              a.data().begin() + static_cast<size_t>(i + 1) * ca,
              out.begin() + static_cast<size_t>(i) * (ca + cb));
    std::copy(b.data().begin() + static_cast<size_t>(i) * cb,
              b.data().begin() + static_cast<size_t>(i + 1) * cb,
              out.begin() + static_cast<size_t>(i) * (ca + cb) + ca);
  }
  return make_op<T>({m, ca + cb}, std::move(out), {a.node(), b.node()},
                    [m, ca, cb](Node<T>& nd) {
                      auto& pa = nd.parents[0];
                      auto& pb = nd.parents[1];
                      const int c = ca + cb;
                      if (pa->requires_grad) {
                        pa->ensure_grad();
                        for (int i = 0; i < m; ++i)
                          for (int j = 0; j < ca; ++j)
                            pa->grad[static_cast<size_t>(i) * ca + j] +=
                                nd.grad[static_cast<size_t>(i) * c + j];
                      }
                      if (pb->requires_grad) {
                        pb->ensure_grad();
                        for (int i = 0; i < m; ++i)
                          for (int j = 0; j < cb; ++j)
                            pb->grad[static_cast<size_t>(i) * cb + j] +=
                                nd.grad[static_cast<size_t>(i) * c + ca + j];
                      }
                    });
}

// Copying reshape; total element count must be preserved.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> shape) {
  LANE_CHECK(numel_of(shape) == x.numel(), "reshape: element count mismatch");
  std::vector<T> out = x.data();
  return make_op<T>(std::move(shape), std::move(out), {x.node()}, [](Node<T>& nd) {
    auto& p = nd.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < nd.grad.size(); ++i) p->grad[i] += nd.grad[i];
  });
}

// ---- reductions ----

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  return make_op<T>({1}, {s}, {x.node()}, [](Node<T>& nd) {
    auto& p = nd.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += nd.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const T inv = T(1) / static_cast<T>(x.numel());
  T s = 0;
  for (T v : x.data()) s += v;
  return make_op<T>({1}, {s * inv}, {x.node()}, [inv](Node<T>& nd) {
    auto& p = nd.parents[0];
    p->ensure_grad();
    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += nd.grad[0] * inv;
  });
}

// ---- softmax ----

// Numerically stable softmax along each row of [m,n].
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  auto [m, n] = detail::matrix_dims(x, "softmax_rows");
  std::vector<T> out(x.data().size());
  for (int i = 0; i < m; ++i) {
    const T* row = x.data().data() + static_cast<size_t>(i) * n;
    T* orow = out.data() + static_cast<size_t>(i) * n;
    T mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T s = 0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      s += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= s;
  }
  std::vector<T> saved = out;
  return make_op<T>({m, n}, std::move(out), {x.node()},
                    [m, n, saved = std::move(saved)](Node<T>& nd) {
                      auto& p = nd.parents[0];
                      p->ensure_grad();
                      for (int i = 0; i < m; ++i) {
                        const T* y = saved.data() + static_cast<size_t>(i) * n;
                        const T* g = nd.grad.data() + static_cast<size_t>(i) * n;
                        T dot = 0;
                        for (int j = 0; j < n; ++j) dot += g[j] * y[j];
                        T* pg = p->grad.data() + static_cast<size_t>(i) * n;
                        for (int j = 0; j < n; ++j) pg[j] += y[j] * (g[j] - dot);
                      }
                    });
}

// ---- segment ops (ragged per-ray batching) ----
// offsets has R+1 entries; segment r covers [offsets[r], offsets[r+1]).

namespace detail {
inline void check_offsets(const std::vector<int>& offsets, int m) {
  LANE_CHECK(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == m,
             "segment offsets must start at 0 and end at the element count");
  for (size_t i = 1; i < offsets.size(); ++i)
    LANE_CHECK(offsets[i] >= offsets[i - 1], "segment offsets must be non-decreasing");
}
}  // namespace detail

// y_i = sum_{j < i, same segment} x_j
template <typename T>
Tensor<T> segment_exclusive_cumsum(const Tensor<T>& x, std::vector<int> offsets) {
  LANE_CHECK(x.shape().size() == 1, "segment_exclusive_cumsum: expected a vector");
  const int m = x.shape()[0];
  detail::check_offsets(offsets, m);
  std::vector<T> out(m);
  for (size_t r = 0; r + 1 < offsets.size(); ++r) {
    T acc = 0;
    for (int i = offsets[r]; i < offsets[r + 1]; ++i) {
      out[i] = acc;
      acc += x.data()[i];
    }
  }
  return make_op<T>({m}, std::move(out), {x.node()},
                    [offsets = std::move(offsets)](Node<T>& nd) {
                      auto& p = nd.parents[0];
                      p->ensure_grad();
                      for (size_t r = 0; r + 1 < offsets.size(); ++r) {
                        T acc = 0;
                        for (int i = offsets[r + 1] - 1; i >= offsets[r]; --i) {
                          p->grad[i] += acc;
                          acc += nd.grad[i];
                        }
                      }
                    });
}

template <typename T>
Tensor<T> segment_sum(const Tensor<T>& x, std::vector<int> offsets) {
  LANE_CHECK(x.shape().size() == 1, "segment_sum: expected a vector");
  const int m = x.shape()[0];
  detail::check_offsets(offsets, m);
  const int R = static_cast<int>(offsets.size()) - 1;
  std::vector<T> out(R, T(0));
  for (int r = 0; r < R; ++r)
    for (int i = offsets[r]; i < offsets[r + 1]; ++i) out[r] += x.data()[i];
  return make_op<T>({R}, std::move(out), {x.node()},
                    [offsets = std::move(offsets)](Node<T>& nd) {
                      auto& p = nd.parents[0];
                      p->ensure_grad();
                      for (size_t r = 0; r + 1 < offsets.size(); ++r)
                        for (int i = offsets[r]; i < offsets[r + 1]; ++i)
                          p->grad[i] += nd.grad[r];
                    });
}

template <typename T>
Tensor<T> segment_sum_rows(const Tensor<T>& x, std::vector<int> offsets) {
  auto [m, c] = detail::matrix_dims(x, "segment_sum_rows");
  detail::check_offsets(offsets, m);
  const int R = static_cast<int>(offsets.size()) - 1;
  std::vector<T> out(static_cast<size_t>(R) * c, T(0));
  for (int r = 0; r < R; ++r)
    for (int i = offsets[r]; i < offsets[r + 1]; ++i)
      for (int j = 0; j < c; ++j)
        out[static_cast<size_t>(r) * c + j] += x.data()[static_cast<size_t>(i) * c + j];
  return make_op<T>({R, c}, std::move(out), {x.node()},
                    [offsets = std::move(offsets), c](Node<T>& nd) {
                      auto& p = nd.parents[0];
                      p->ensure_grad();
                      for (size_t r = 0; r + 1 < offsets.size(); ++r)
                        for (int i = offsets[r]; i < offsets[r + 1]; ++i)
                          for (int j = 0; j < c; ++j)
                            p->grad[static_cast<size_t>(i) * c + j] +=
                                nd.grad[r * static_cast<size_t>(c) + j];
                    });
}

// Mean squared error over all entries of two same-shape tensors.
template <typename T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
  Tensor<T> d = sub(pred, target);
  return mean(mul(d, d));
}

}  // namespace lane::ad
