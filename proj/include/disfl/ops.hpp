#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "disfl/autodiff.hpp"

namespace disfl::tc {

// All ops check operand shapes (SHAPE_ERROR) and reject non-finite forward
// values (NUMERIC_ERROR). Matrices are rank-2, row-major.

/// [m x k] . [k x n]
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

/// Same-shape sum.
template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);

/// [m x n] + broadcast row vector [n].
template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& row);

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b);

/// Elementwise product.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> scale(const Var<T>& a, T factor);

template <class T>
Var<T> relu(const Var<T>& x);

/// Exact (erf) GELU.
template <class T>
Var<T> gelu(const Var<T>& x);

template <class T>
Var<T> sigmoid(const Var<T>& x);

/// Row-wise normalization of [m x n] with gain/bias [n].
template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));

/// Softmax of a rank-2 tensor along `axis` (0 = columns, 1 = rows).
template <class T>
Var<T> softmax(const Var<T>& x, std::size_t axis = 1);

/// Rows of `table` [V x d] picked by `ids`: result [n x d].
template <class T>
Var<T> embedding_lookup(const Var<T>& table, std::span<const std::int32_t> ids);

/// x holds `groups` consecutive blocks of rows; each block is averaged over
/// rows whose mask is 1, giving [groups x d]. A block with no unmasked row
/// pools to zero. Masked rows never influence the result.
template <class T>
Var<T> mean_pool(const Var<T>& x, std::span<const std::uint8_t> mask, std::size_t groups);

/// Average over all rows: [m x n] -> [1 x n].
template <class T>
Var<T> mean_rows(const Var<T>& x);

/// Concatenation of rank-2 tensors along axis 0 (rows) or 1 (columns).
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape);

/// Rows [start, start + count) of a rank-2 tensor.
template <class T>
Var<T> slice_rows(const Var<T>& x, std::size_t start, std::size_t count);

template <class T>
Var<T> sum(const Var<T>& x);

template <class T>
Var<T> mean(const Var<T>& x);

/// Mean over rows with mask 1 of -log softmax(logits)[target]. Zero when the
/// mask is empty. logits [n x C], targets/mask length n.
template <class T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> mask);

/// Mean of -[t log p + (1-t) log(1-p)] over elements; p must lie in (0, 1).
template <class T>
Var<T> binary_cross_entropy(const Var<T>& prob, std::span<const T> targets);

/// Same loss computed from logits (p = sigmoid(z)), stable for large |z|.
template <class T>
Var<T> binary_cross_entropy_with_logits(const Var<T>& logits, std::span<const T> targets);

/// Sum of squares.
template <class T>
Var<T> l2_squared(const Var<T>& x);

/// Masked multi-head scaled dot-product attention. q, k, v are
/// [groups*len x d]; row blocks of `len` rows are independent sequences.
/// Keys whose mask is 0 get exactly zero weight.
template <class T>
Var<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                            std::span<const std::uint8_t> key_mask, std::size_t groups, std::size_t heads);

}  // namespace disfl::tc
