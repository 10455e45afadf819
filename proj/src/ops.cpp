#include "disfl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace disfl::tc {

namespace {

template <class T>
Tensor<T>* grad_of(Node<T>& node, std::size_t i) {
  Node<T>* p = node.parents[i].get();
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

template <class T>
const Tensor<T>& value_of(Node<T>& node, std::size_t i) {
  return node.parents[i]->value;
}

template <class T>
void require_rank2(const Var<T>& x, const char* op) {
  if (x.value().rank() != 2) {
    fail(ErrorCode::ShapeError, std::string(op) + " expects a matrix, got " + shape_string(x.shape()));
  }
}

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::ShapeError,
         std::string(op) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
}

template <class T>
T gelu_value(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <class T>
T gelu_slope(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

// log(1 + exp(x)) without overflow.
template <class T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    fail(ErrorCode::ShapeError, "matmul: " + shape_string(a.shape()) + " . " + shape_string(b.shape()));
  }
  Tensor<T> out({m, n});
  const T* A = a.value().data();
  const T* B = b.value().data();
  T* C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = A[i * k + p];
      const T* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += s * brow[j];
    }
  }
  return make_op<T>(std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    const T* G = self.grad.data();
    const T* A = value_of(self, 0).data();
    const T* B = value_of(self, 1).data();
    if (auto* ga = grad_of(self, 0)) {
      T* dA = ga->data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* g = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = B + p * n;
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += g[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = grad_of(self, 1)) {
      T* dB = gb->data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* g = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T s = A[i * k + p];
          T* drow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += s * g[j];
        }
      }
    }
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t side = 0; side < 2; ++side) {
      if (auto* g = grad_of(self, side)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  require_rank2(a, "add_row");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (row.value().size() != n || row.value().rank() != 1) {
    fail(ErrorCode::ShapeError, "add_row: row " + shape_string(row.shape()) + " vs " + shape_string(a.shape()));
  }
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += row.value()[j];
  }
  return make_op<T>(std::move(out), {a, row}, [m, n](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad.at(i, j);
      }
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  return make_op<T>(std::move(out), {a}, [factor](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += factor * self.grad[i];
    }
  });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    const auto& xv = value_of(self, 0);
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (xv[i] > T(0)) (*g)[i] += self.grad[i];
      }
    }
  });
}

template <class T>
Var<T> gelu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = gelu_value(v);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    const auto& xv = value_of(self, 0);
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * gelu_slope(xv[i]);
    }
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = stable_sigmoid(v);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const T s = self.value[i];
        (*g)[i] += self.grad[i] * s * (T(1) - s);
      }
    }
  });
}

template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  require_rank2(x, "layer_norm");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (gain.value().size() != n || bias.value().size() != n) {
    fail(ErrorCode::ShapeError, "layer_norm: gain/bias must have " + std::to_string(n) + " entries");
  }
  Tensor<T> out({m, n});
  Tensor<T> normalized({m, n});
  std::vector<T> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    T mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += x.value().at(i, j);
    mu /= T(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const T d = x.value().at(i, j) - mu;
      var += d * d;
    }
    var /= T(n);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const T xhat = (x.value().at(i, j) - mu) * inv_std[i];
      normalized.at(i, j) = xhat;
      out.at(i, j) = gain.value()[j] * xhat + bias.value()[j];
    }
  }
  return make_op<T>(std::move(out), {x, gain, bias},
                    [m, n, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node<T>& self) {
                      const auto& gv = value_of(self, 1);
                      auto* gx = grad_of(self, 0);
                      auto* gg = grad_of(self, 1);
                      auto* gb = grad_of(self, 2);
                      std::vector<T> dxhat(n);
                      for (std::size_t i = 0; i < m; ++i) {
                        T mean_d = 0, mean_dx = 0;
                        for (std::size_t j = 0; j < n; ++j) {
                          const T dy = self.grad.at(i, j);
                          const T xhat = normalized.at(i, j);
                          if (gg) (*gg)[j] += dy * xhat;
                          if (gb) (*gb)[j] += dy;
                          dxhat[j] = dy * gv[j];
                          mean_d += dxhat[j];
                          mean_dx += dxhat[j] * xhat;
                        }
                        if (!gx) continue;
                        mean_d /= T(n);
                        mean_dx /= T(n);
                        for (std::size_t j = 0; j < n; ++j) {
                          gx->at(i, j) += inv_std[i] * (dxhat[j] - mean_d - normalized.at(i, j) * mean_dx);
                        }
                      }
                    });
}

template <class T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  require_rank2(x, "softmax");
  if (axis > 1) fail(ErrorCode::ShapeError, "softmax axis must be 0 or 1");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  // Walk "lines" along the chosen axis: count, length, stride between lines,
  // stride within a line.
  const std::size_t lines = axis == 1 ? rows : cols;
  const std::size_t len = axis == 1 ? cols : rows;
  const std::size_t line_stride = axis == 1 ? cols : 1;
  const std::size_t step = axis == 1 ? 1 : cols;
  Tensor<T> out(x.shape());
  for (std::size_t l = 0; l < lines; ++l) {
    const T* in = x.value().data() + l * line_stride;
    T* o = out.data() + l * line_stride;
    T mx = in[0];
    for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, in[j * step]);
    T total = 0;
    for (std::size_t j = 0; j < len; ++j) {
      o[j * step] = std::exp(in[j * step] - mx);
      total += o[j * step];
    }
    for (std::size_t j = 0; j < len; ++j) o[j * step] /= total;
  }
  return make_op<T>(std::move(out), {x}, [lines, len, line_stride, step](Node<T>& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t l = 0; l < lines; ++l) {
      const T* y = self.value.data() + l * line_stride;
      const T* dy = self.grad.data() + l * line_stride;
      T* dx = g->data() + l * line_stride;
      T dot = 0;
      for (std::size_t j = 0; j < len; ++j) dot += dy[j * step] * y[j * step];
      for (std::size_t j = 0; j < len; ++j) dx[j * step] += y[j * step] * (dy[j * step] - dot);
    }
  });
}

template <class T>
Var<T> embedding_lookup(const Var<T>& table, std::span<const std::int32_t> ids) {
  require_rank2(table, "embedding_lookup");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  Tensor<T> out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      fail(ErrorCode::ShapeError, "embedding id " + std::to_string(ids[r]) + " outside table of " +
                                      std::to_string(vocab) + " rows");
    }
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[r]) * d, d, out.data() + r * d);
  }
  return make_op<T>(std::move(out), {table},
                    [d, rows = std::vector<std::int32_t>(ids.begin(), ids.end())](Node<T>& self) {
                      auto* g = grad_of(self, 0);
                      if (!g) return;
                      for (std::size_t r = 0; r < rows.size(); ++r) {
                        T* dst = g->data() + static_cast<std::size_t>(rows[r]) * d;
                        const T* src = self.grad.data() + r * d;
                        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                      }
                    });
}

template <class T>
Var<T> mean_pool(const Var<T>& x, std::span<const std::uint8_t> mask, std::size_t groups) {
  require_rank2(x, "mean_pool");
  const std::size_t m = x.shape()[0], d = x.shape()[1];
  if (groups == 0 || m % groups != 0 || mask.size() != m) {
    fail(ErrorCode::ShapeError, "mean_pool: " + std::to_string(m) + " rows, " + std::to_string(mask.size()) +
                                    " mask entries, " + std::to_string(groups) + " groups");
  }
  const std::size_t len = m / groups;
  Tensor<T> out({groups, d});
  std::vector<T> inv_count(groups, T(0));
  for (std::size_t g = 0; g < groups; ++g) {
    std::size_t count = 0;
    for (std::size_t r = g * len; r < (g + 1) * len; ++r) {
      if (!mask[r]) continue;
      ++count;
      for (std::size_t j = 0; j < d; ++j) out.at(g, j) += x.value().at(r, j);
    }
    if (count == 0) continue;
    inv_count[g] = T(1) / T(count);
    for (std::size_t j = 0; j < d; ++j) out.at(g, j) *= inv_count[g];
  }
  return make_op<T>(std::move(out), {x},
                    [len, d, groups, inv_count = std::move(inv_count),
                     rows = std::vector<std::uint8_t>(mask.begin(), mask.end())](Node<T>& self) {
                      auto* gx = grad_of(self, 0);
                      if (!gx) return;
                      for (std::size_t g = 0; g < groups; ++g) {
                        for (std::size_t r = g * len; r < (g + 1) * len; ++r) {
                          if (!rows[r]) continue;
                          for (std::size_t j = 0; j < d; ++j) gx->at(r, j) += self.grad.at(g, j) * inv_count[g];
                        }
                      }
                    });
}

template <class T>
Var<T> mean_rows(const Var<T>& x) {
  require_rank2(x, "mean_rows");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (m == 0) fail(ErrorCode::ShapeError, "mean_rows of an empty matrix");
  Tensor<T> out({1, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += x.value().at(i, j);
  }
  for (auto& v : out.values()) v /= T(m);
  return make_op<T>(std::move(out), {x}, [m, n](Node<T>& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g->at(i, j) += self.grad[j] / T(m);
    }
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::ShapeError, "concat of nothing");
  if (axis > 1) fail(ErrorCode::ShapeError, "concat axis must be 0 or 1");
  for (const auto& p : parts) require_rank2(p, "concat");
  const std::size_t keep = axis == 0 ? 1 : 0;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.shape()[keep] != parts.front().shape()[keep]) {
      fail(ErrorCode::ShapeError, "concat: mismatched " + shape_string(p.shape()) + " vs " +
                                      shape_string(parts.front().shape()));
    }
    total += p.shape()[axis];
  }
  Shape shape = parts.front().shape();
  shape[axis] = total;
  Tensor<T> out(shape);
  const std::size_t cols = shape[1];
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t pr = p.shape()[0], pc = p.shape()[1];
    for (std::size_t i = 0; i < pr; ++i) {
      for (std::size_t j = 0; j < pc; ++j) {
        const std::size_t r = axis == 0 ? offset + i : i;
        const std::size_t c = axis == 0 ? j : offset + j;
        out[r * cols + c] = p.value().at(i, j);
      }
    }
    offset += p.shape()[axis];
  }
  return make_op<T>(std::move(out), parts, [axis, cols, offsets = std::move(offsets)](Node<T>& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto* g = grad_of(self, k);
      if (!g) continue;
      const std::size_t pr = g->shape()[0], pc = g->shape()[1];
      for (std::size_t i = 0; i < pr; ++i) {
        for (std::size_t j = 0; j < pc; ++j) {
          const std::size_t r = axis == 0 ? offsets[k] + i : i;
          const std::size_t c = axis == 0 ? j : offsets[k] + j;
          g->at(i, j) += self.grad[r * cols + c];
        }
      }
    }
  });
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

template <class T>
Var<T> slice_rows(const Var<T>& x, std::size_t start, std::size_t count) {
  require_rank2(x, "slice_rows");
  const std::size_t n = x.shape()[1];
  if (start + count > x.shape()[0]) {
    fail(ErrorCode::ShapeError, "slice_rows past the end of " + shape_string(x.shape()));
  }
  Tensor<T> out({count, n});
  std::copy_n(x.value().data() + start * n, count * n, out.data());
  return make_op<T>(std::move(out), {x}, [start, n](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[start * n + i] += self.grad[i];
    }
  });
}

template <class T>
Var<T> sum(const Var<T>& x) {
  T total = 0;
  for (T v : x.value().values()) total += v;
  return make_op<T>(Tensor<T>::scalar(total), {x}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (auto& v : g->values()) v += self.grad[0];
    }
  });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / T(x.value().size()));
}

template <class T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> mask) {
  require_rank2(logits, "cross_entropy");
  const std::size_t n = logits.shape()[0], classes = logits.shape()[1];
  if (targets.size() != n || mask.size() != n) {
    fail(ErrorCode::ShapeError, "cross_entropy: " + std::to_string(n) + " rows, " +
                                    std::to_string(targets.size()) + " targets, " + std::to_string(mask.size()) +
                                    " mask entries");
  }
  Tensor<T> probs({n, classes});
  std::size_t count = 0;
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= classes) {
      fail(ErrorCode::ShapeError, "cross_entropy target out of range");
    }
    ++count;
    const T* z = logits.value().data() + i * classes;
    T mx = z[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, z[c]);
    T denom = 0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - mx);
    const T log_denom = std::log(denom) + mx;
    for (std::size_t c = 0; c < classes; ++c) probs.at(i, c) = std::exp(z[c] - log_denom);
    total += log_denom - z[static_cast<std::size_t>(targets[i])];
  }
  const T inv = count == 0 ? T(0) : T(1) / T(count);
  return make_op<T>(
      Tensor<T>::scalar(total * inv), {logits},
      [classes, inv, probs = std::move(probs), t = std::vector<std::int32_t>(targets.begin(), targets.end()),
       m = std::vector<std::uint8_t>(mask.begin(), mask.end())](Node<T>& self) {
        auto* g = grad_of(self, 0);
        if (!g) return;
        const T upstream = self.grad[0] * inv;
        for (std::size_t i = 0; i < m.size(); ++i) {
          if (!m[i]) continue;
          for (std::size_t c = 0; c < classes; ++c) {
            const T onehot = static_cast<std::size_t>(t[i]) == c ? T(1) : T(0);
            g->at(i, c) += upstream * (probs.at(i, c) - onehot);
          }
        }
      });
}

template <class T>
Var<T> binary_cross_entropy(const Var<T>& prob, std::span<const T> targets) {
  const std::size_t n = prob.value().size();
  if (targets.size() != n || n == 0) fail(ErrorCode::ShapeError, "binary_cross_entropy: target count mismatch");
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T p = prob.value()[i];
    if (!(p > T(0) && p < T(1))) fail(ErrorCode::NumericError, "binary_cross_entropy needs p in (0, 1)");
    total -= targets[i] * std::log(p) + (T(1) - targets[i]) * std::log(T(1) - p);
  }
  return make_op<T>(Tensor<T>::scalar(total / T(n)), {prob},
                    [n, t = std::vector<T>(targets.begin(), targets.end())](Node<T>& self) {
                      auto* g = grad_of(self, 0);
                      if (!g) return;
                      const auto& pv = value_of(self, 0);
                      for (std::size_t i = 0; i < n; ++i) {
                        const T p = pv[i];
                        (*g)[i] += self.grad[0] / T(n) * (-t[i] / p + (T(1) - t[i]) / (T(1) - p));
                      }
                    });
}

template <class T>
Var<T> binary_cross_entropy_with_logits(const Var<T>& logits, std::span<const T> targets) {
  const std::size_t n = logits.value().size();
  if (targets.size() != n || n == 0) {
    fail(ErrorCode::ShapeError, "binary_cross_entropy_with_logits: target count mismatch");
  }
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T z = logits.value()[i];
    // -[t log s(z) + (1-t) log(1-s(z))] = t*softplus(-z) + (1-t)*softplus(z)
    total += targets[i] * softplus(-z) + (T(1) - targets[i]) * softplus(z);
  }
  return make_op<T>(Tensor<T>::scalar(total / T(n)), {logits},
                    [n, t = std::vector<T>(targets.begin(), targets.end())](Node<T>& self) {
                      auto* g = grad_of(self, 0);
                      if (!g) return;
                      const auto& zv = value_of(self, 0);
                      for (std::size_t i = 0; i < n; ++i) {
                        (*g)[i] += self.grad[0] / T(n) * (stable_sigmoid(zv[i]) - t[i]);
                      }
                    });
}

template <class T>
Var<T> l2_squared(const Var<T>& x) {
  T total = 0;
  for (T v : x.value().values()) total += v * v;
  return make_op<T>(Tensor<T>::scalar(total), {x}, [](Node<T>& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    const auto& xv = value_of(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += T(2) * xv[i] * self.grad[0];
  });
}

template <class T>
Var<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                            std::span<const std::uint8_t> key_mask, std::size_t groups, std::size_t heads) {
  require_rank2(q, "multi_head_attention");
  require_same_shape(q, k, "multi_head_attention");
  require_same_shape(q, v, "multi_head_attention");
  const std::size_t rows = q.shape()[0], d = q.shape()[1];
  if (groups == 0 || rows % groups != 0 || key_mask.size() != rows || heads == 0 || d % heads != 0) {
    fail(ErrorCode::ShapeError, "multi_head_attention: " + std::to_string(rows) + " rows, d=" + std::to_string(d) +
                                    ", " + std::to_string(groups) + " groups, " + std::to_string(heads) + " heads");
  }
  const std::size_t len = rows / groups;
  const std::size_t dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));

  // probs[(g*heads + h)*len*len + i*len + j]; zero for masked keys.
  std::vector<T> probs(groups * heads * len * len, T(0));
  Tensor<T> out({rows, d});
  const T* Q = q.value().data();
  const T* K = k.value().data();
  const T* V = v.value().data();
  std::vector<std::size_t> live;
  live.reserve(len);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * len;
    live.clear();
    for (std::size_t j = 0; j < len; ++j) {
      if (key_mask[base + j]) live.push_back(j);
    }
    if (live.empty()) continue;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t col = h * dh;
      T* P = probs.data() + (g * heads + h) * len * len;
      for (std::size_t i = 0; i < len; ++i) {
        const T* qi = Q + (base + i) * d + col;
        T* pi = P + i * len;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j : live) {
          const T* kj = K + (base + j) * d + col;
          T s = 0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          pi[j] = s * inv_sqrt;
          mx = std::max(mx, pi[j]);
        }
        T total = 0;
        for (std::size_t j : live) {
          pi[j] = std::exp(pi[j] - mx);
          total += pi[j];
        }
        T* oi = out.data() + (base + i) * d + col;
        for (std::size_t j : live) {
          pi[j] /= total;
          const T* vj = V + (base + j) * d + col;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += pi[j] * vj[c];
        }
      }
    }
  }

  return make_op<T>(
      std::move(out), {q, k, v},
      [groups, heads, len, d, dh, inv_sqrt, probs = std::move(probs),
       mask = std::vector<std::uint8_t>(key_mask.begin(), key_mask.end())](Node<T>& self) {
        const T* Q = value_of(self, 0).data();
        const T* K = value_of(self, 1).data();
        const T* V = value_of(self, 2).data();
        auto* gq = grad_of(self, 0);
        auto* gk = grad_of(self, 1);
        auto* gv = grad_of(self, 2);
        const T* G = self.grad.data();
        std::vector<std::size_t> live;
        std::vector<T> dp(len);
        for (std::size_t g = 0; g < groups; ++g) {
          const std::size_t base = g * len;
          live.clear();
          for (std::size_t j = 0; j < len; ++j) {
            if (mask[base + j]) live.push_back(j);
          }
          if (live.empty()) continue;
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t col = h * dh;
            const T* P = probs.data() + (g * heads + h) * len * len;
            for (std::size_t i = 0; i < len; ++i) {
              const T* gi = G + (base + i) * d + col;
              const T* pi = P + i * len;
              T dot = 0;
              for (std::size_t j : live) {
                const T* vj = V + (base + j) * d + col;
                T s = 0;
                for (std::size_t c = 0; c < dh; ++c) s += gi[c] * vj[c];
                dp[j] = s;
                dot += pi[j] * s;
                if (gv) {
                  T* dvj = gv->data() + (base + j) * d + col;
                  for (std::size_t c = 0; c < dh; ++c) dvj[c] += pi[j] * gi[c];
                }
              }
              const T* qi = Q + (base + i) * d + col;
              for (std::size_t j : live) {
                const T ds = pi[j] * (dp[j] - dot) * inv_sqrt;
                const T* kj = K + (base + j) * d + col;
                if (gq) {
                  T* dqi = gq->data() + (base + i) * d + col;
                  for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
                }
                if (gk) {
                  T* dkj = gk->data() + (base + j) * d + col;
                  for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

#define DISFL_INSTANTIATE_OPS(T)                                                                            \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                                    \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> scale(const Var<T>&, T);                                                                  \
  template Var<T> relu(const Var<T>&);                                                                      \
  template Var<T> gelu(const Var<T>&);                                                                      \
  template Var<T> sigmoid(const Var<T>&);                                                                   \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                               \
  template Var<T> softmax(const Var<T>&, std::size_t);                                                      \
  template Var<T> embedding_lookup(const Var<T>&, std::span<const std::int32_t>);                           \
  template Var<T> mean_pool(const Var<T>&, std::span<const std::uint8_t>, std::size_t);                     \
  template Var<T> mean_rows(const Var<T>&);                                                                 \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                                          \
  template Var<T> reshape(const Var<T>&, Shape);                                                            \
  template Var<T> slice_rows(const Var<T>&, std::size_t, std::size_t);                                      \
  template Var<T> sum(const Var<T>&);                                                                       \
  template Var<T> mean(const Var<T>&);                                                                      \
  template Var<T> cross_entropy(const Var<T>&, std::span<const std::int32_t>, std::span<const std::uint8_t>); \
  template Var<T> binary_cross_entropy(const Var<T>&, std::span<const T>);                                  \
  template Var<T> binary_cross_entropy_with_logits(const Var<T>&, std::span<const T>);                      \
  template Var<T> l2_squared(const Var<T>&);                                                                \
  template Var<T> multi_head_attention(const Var<T>&, const Var<T>&, const Var<T>&,                         \
                                       std::span<const std::uint8_t>, std::size_t, std::size_t);

DISFL_INSTANTIATE_OPS(float)
DISFL_INSTANTIATE_OPS(double)

#undef DISFL_INSTANTIATE_OPS

}  // namespace disfl::tc
