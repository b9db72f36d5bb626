#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "vcg/ad/tensor.hpp"

namespace vcg::ad {

enum class Reduction { kSum, kMean };

/// Records operations in creation order (a valid topological order) and runs
/// reverse-mode differentiation over them. A tape and its intermediates belong
/// to one thread; leaves (parameters) may be shared read-only between tapes
/// only if no tape calls backward on them concurrently.
template <class T>
class Tape {
 public:
  Tape();

  /// When on, every op output is scanned for NaN and throws std::domain_error.
  /// Defaults to on in builds without NDEBUG.
  void set_check_nan(bool on) { check_nan_ = on; }

  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);     // [m,k]x[k,n]
  Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);  // [m,k]x[n,k]^T
  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);  // bias [n] over rows of [m,n]
  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> scale(const Tensor<T>& a, T s);
  Tensor<T> sum(const Tensor<T>& a);

  Tensor<T> concat_rows(std::span<const Tensor<T>> parts);
  Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end);
  Tensor<T> concat_cols(std::span<const Tensor<T>> parts);
  Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end);

  /// Rows of `table` selected by `ids`; a negative id yields a zero row.
  Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids);
  Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const int> ids) {
    return gather_rows(table, ids);
  }

  Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-5));
  Tensor<T> gelu(const Tensor<T>& x);  // tanh approximation
  Tensor<T> softmax_lastdim(const Tensor<T>& x);

  /// Entries where mask != 0 are replaced by `fill`; gradient is blocked there.
  Tensor<T> masked_fill(const Tensor<T>& x, std::span<const std::uint8_t> mask, T fill);

  /// Token-level negative log-likelihood. targets[i] < 0 or == ignore_id is skipped.
  /// kMean divides by the number of counted rows (0 rows gives 0).
  Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets, int ignore_id = -1,
                          Reduction reduction = Reduction::kMean);

  /// Fills dLoss/dLeaf into every requires_grad leaf reachable from `loss`.
  /// Leaf gradients accumulate across calls; intermediate gradients are reset.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  Tensor<T> record(Shape shape, std::vector<T> value, bool requires_grad);
  void check(const Tensor<T>& t) const;

  std::vector<std::shared_ptr<Node<T>>> nodes_;
  bool check_nan_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace vcg::ad
