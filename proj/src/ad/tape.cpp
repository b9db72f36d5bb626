#include "vcg/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "vcg/simd/kernels.hpp"

namespace vcg::ad {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

namespace {

template <class T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 1 && t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected rank 1 or 2, got " + shape_str(t.shape()));
}

template <class T>
[[noreturn]] void mismatch(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

template <class T>
bool wants(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad;
}

}  // namespace

template <class T>
Tape<T>::Tape() {
#ifdef NDEBUG
  check_nan_ = false;
#else
  check_nan_ = true;
#endif
}

template <class T>
Tensor<T> Tape<T>::record(Shape shape, std::vector<T> value, bool requires_grad) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), T(0));
  nodes_.push_back(node);
  Tensor<T> t(node);
  check(t);
  return t;
}

template <class T>
void Tape<T>::check(const Tensor<T>& t) const {
  if (!check_nan_) return;
  for (T v : t.data())
    if (std::isnan(v)) throw std::domain_error("NaN produced in tensor of shape " + shape_str(t.shape()));
}

template <class T>
Tensor<T> Tape<T>::matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) mismatch("matmul", a, b);
  std::vector<T> out(m * n, T(0));
  simd::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data());
  auto pa = a.node_ptr(), pb = b.node_ptr();
  auto r = record({m, n}, std::move(out), wants(pa) || wants(pb));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa, pb, m, n, k] {
      if (pa->requires_grad) simd::gemm_nt(m, k, n, o->grad.data(), pb->value.data(), pa->grad.data());
      if (pb->requires_grad) simd::gemm_tn(k, n, m, pa->value.data(), o->grad.data(), pb->grad.data());
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) mismatch("matmul_nt", a, b);
  std::vector<T> out(m * n, T(0));
  simd::gemm_nt(m, n, k, a.data().data(), b.data().data(), out.data());
  auto pa = a.node_ptr(), pb = b.node_ptr();
  auto r = record({m, n}, std::move(out), wants(pa) || wants(pb));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa, pb, m, n, k] {
      if (pa->requires_grad) simd::gemm_nn(m, k, n, o->grad.data(), pb->value.data(), pa->grad.data());
      if (pb->requires_grad) simd::gemm_tn(n, k, m, o->grad.data(), pa->value.data(), pb->grad.data());
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) mismatch("add", a, b);
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto pa = a.node_ptr(), pb = b.node_ptr();
  auto r = record(a.shape(), std::move(out), wants(pa) || wants(pb));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa, pb] {
      for (auto* p : {pa.get(), pb.get()})
        if (p->requires_grad)
          for (std::size_t i = 0; i < o->grad.size(); ++i) p->grad[i] += o->grad[i];
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n || bias.rank() != 1) mismatch("add_bias", x, bias);
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  auto px = x.node_ptr(), pb = bias.node_ptr();
  auto r = record(x.shape(), std::move(out), wants(px) || wants(pb));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, px, pb, m, n] {
      if (px->requires_grad)
        for (std::size_t i = 0; i < o->grad.size(); ++i) px->grad[i] += o->grad[i];
      if (pb->requires_grad)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) pb->grad[j] += o->grad[i * n + j];
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) mismatch("mul", a, b);
  std::vector<T> out(a.size());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  auto pa = a.node_ptr(), pb = b.node_ptr();
  auto r = record(a.shape(), std::move(out), wants(pa) || wants(pb));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa, pb] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        if (pa->requires_grad) pa->grad[i] += o->grad[i] * pb->value[i];
        if (pb->requires_grad) pb->grad[i] += o->grad[i] * pa->value[i];
      }
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  auto pa = a.node_ptr();
  auto r = record(a.shape(), std::move(out), wants(pa));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa, s] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[i] += o->grad[i] * s;
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::sum(const Tensor<T>& a) {
  T acc = 0;
  for (T v : a.data()) acc += v;
  auto pa = a.node_ptr();
  auto r = record({1}, {acc}, wants(pa));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa] {
      for (auto& g : pa->grad) g += o->grad[0];
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  bool grad = false;
  std::vector<std::shared_ptr<Node<T>>> ps;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != n) mismatch("concat_rows", parts[0], p);
    m += p.rows();
    grad = grad || p.requires_grad();
    ps.push_back(p.node_ptr());
  }
  std::vector<T> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  auto r = record({m, n}, std::move(out), grad);
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, ps] {
      std::size_t off = 0;
      for (const auto& p : ps) {
        if (p->requires_grad)
          for (std::size_t i = 0; i < p->value.size(); ++i) p->grad[i] += o->grad[off + i];
        off += p->value.size();
      }
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_rows");
  if (begin > end || end > a.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + shape_str(a.shape()));
  const std::size_t n = a.cols();
  std::vector<T> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                     a.data().begin() + static_cast<std::ptrdiff_t>(end * n));
  auto pa = a.node_ptr();
  auto r = record({end - begin, n}, std::move(out), wants(pa));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa, begin, n] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) pa->grad[begin * n + i] += o->grad[i];
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::concat_cols(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  bool grad = false;
  std::vector<std::shared_ptr<Node<T>>> ps;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) mismatch("concat_cols", parts[0], p);
    n += p.cols();
    grad = grad || p.requires_grad();
    ps.push_back(p.node_ptr());
    widths.push_back(p.cols());
  }
  std::vector<T> out(m * n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(i * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>(i * n + off));
    off += w;
  }
  auto r = record({m, n}, std::move(out), grad);
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, ps, widths, m, n] {
      std::size_t off = 0;
      for (std::size_t p = 0; p < ps.size(); ++p) {
        const std::size_t w = widths[p];
        if (ps[p]->requires_grad)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) ps[p]->grad[i * w + j] += o->grad[i * n + off + j];
        off += w;
      }
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_cols");
  if (begin > end || end > a.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<T> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a.data()[i * n + begin + j];
  auto pa = a.node_ptr();
  auto r = record({m, w}, std::move(out), wants(pa));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pa, m, n, w, begin] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) pa->grad[i * n + begin + j] += o->grad[i * w + j];
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::gather_rows(const Tensor<T>& table, std::span<const int> ids) {
  require_matrix(table, "gather_rows");
  const std::size_t rows = table.rows(), n = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<T> out(idx.size() * n, T(0));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    if (static_cast<std::size_t>(idx[i]) >= rows)
      throw ShapeError("gather_rows: id " + std::to_string(idx[i]) + " out of range for table " +
                       shape_str(table.shape()));
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  auto pt = table.node_ptr();
  auto r = record({idx.size(), n}, std::move(out), wants(pt));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pt, idx = std::move(idx), n] {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0) continue;
        for (std::size_t j = 0; j < n; ++j) pt->grad[idx[i] * n + j] += o->grad[i * n + j];
      }
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n) mismatch("layer_norm", x, gain);
  if (bias.size() != n) mismatch("layer_norm", x, bias);
  std::vector<T> out(m * n), xhat(m * n), rstd(m);
  const auto xd = x.data(), gd = gain.data(), bd = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += xd[i * n + j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const T d = xd[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(n);
    rstd[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xd[i * n + j] - mean) * rstd[i];
      out[i * n + j] = gd[j] * xhat[i * n + j] + bd[j];
    }
  }
  auto px = x.node_ptr(), pg = gain.node_ptr(), pb = bias.node_ptr();
  auto r = record(x.shape(), std::move(out), wants(px) || wants(pg) || wants(pb));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, px, pg, pb, m, n, xhat = std::move(xhat), rstd = std::move(rstd)] {
      std::vector<T> dxhat(n);
      for (std::size_t i = 0; i < m; ++i) {
        const T* dy = o->grad.data() + i * n;
        const T* xh = xhat.data() + i * n;
        if (pg->requires_grad)
          for (std::size_t j = 0; j < n; ++j) pg->grad[j] += dy[j] * xh[j];
        if (pb->requires_grad)
          for (std::size_t j = 0; j < n; ++j) pb->grad[j] += dy[j];
        if (!px->requires_grad) continue;
        T mean_d = 0, mean_dx = 0;
        for (std::size_t j = 0; j < n; ++j) {
          dxhat[j] = dy[j] * pg->value[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xh[j];
        }
        mean_d /= static_cast<T>(n);
        mean_dx /= static_cast<T>(n);
        for (std::size_t j = 0; j < n; ++j)
          px->grad[i * n + j] += rstd[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
      }
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::gelu(const Tensor<T>& x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T a = static_cast<T>(0.044715);
  std::vector<T> out(x.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xd[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
  }
  auto px = x.node_ptr();
  auto r = record(x.shape(), std::move(out), wants(px));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, px] {
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        const T v = px->value[i];
        const T t = std::tanh(c * (v + a * v * v * v));
        const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * a * v * v);
        px->grad[i] += o->grad[i] * d;
      }
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::softmax_lastdim(const Tensor<T>& x) {
  require_matrix(x, "softmax_lastdim");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * n);
  const auto xd = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xd[i * n + j]);
    T total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(xd[i * n + j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  auto px = x.node_ptr();
  auto r = record(x.shape(), std::move(out), wants(px));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, px, m, n] {
      for (std::size_t i = 0; i < m; ++i) {
        const T* y = o->value.data() + i * n;
        const T* dy = o->grad.data() + i * n;
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) px->grad[i * n + j] += y[j] * (dy[j] - dot);
      }
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::masked_fill(const Tensor<T>& x, std::span<const std::uint8_t> mask, T fill) {
  if (mask.size() != x.size())
    throw ShapeError("masked_fill: mask has " + std::to_string(mask.size()) + " entries for " +
                     shape_str(x.shape()));
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = fill;
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  auto px = x.node_ptr();
  auto r = record(x.shape(), std::move(out), wants(px));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, px, keep = std::move(keep)] {
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        if (!keep[i]) px->grad[i] += o->grad[i];
    };
  }
  return r;
}

template <class T>
Tensor<T> Tape<T>::cross_entropy(const Tensor<T>& logits, std::span<const int> targets, int ignore_id,
                                 Reduction reduction) {
  require_matrix(logits, "cross_entropy");
  const std::size_t m = logits.rows(), n = logits.cols();
  if (targets.size() != m)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_str(logits.shape()));
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<T> probs(m * n, T(0));
  const auto ld = logits.data();
  T total = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (tg[i] < 0 || tg[i] == ignore_id) continue;
    if (static_cast<std::size_t>(tg[i]) >= n)
      throw ShapeError("cross_entropy: target " + std::to_string(tg[i]) + " out of range for " +
                       std::to_string(n) + " classes");
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, ld[i * n + j]);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[i * n + j] = std::exp(ld[i * n + j] - mx);
      z += probs[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
    total += (mx + std::log(z)) - ld[i * n + static_cast<std::size_t>(tg[i])];
    ++count;
  }
  const T norm = (reduction == Reduction::kMean && count > 0) ? T(1) / static_cast<T>(count) : T(1);
  auto pl = logits.node_ptr();
  auto r = record({1}, {total * norm}, wants(pl));
  if (r.requires_grad()) {
    Node<T>* o = r.node();
    o->backward = [o, pl, tg = std::move(tg), probs = std::move(probs), norm, m, n, ignore_id] {
      const T g = o->grad[0] * norm;
      for (std::size_t i = 0; i < m; ++i) {
        if (tg[i] < 0 || tg[i] == ignore_id) continue;
        for (std::size_t j = 0; j < n; ++j) pl->grad[i * n + j] += g * probs[i * n + j];
        pl->grad[i * n + static_cast<std::size_t>(tg[i])] -= g;
      }
    };
  }
  return r;
}

template <class T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  auto it = std::find(nodes_.begin(), nodes_.end(), loss.node_ptr());
  if (it == nodes_.end()) throw std::logic_error("backward: loss was not recorded on this tape");
  for (auto& n : nodes_)
    if (n->requires_grad) std::fill(n->grad.begin(), n->grad.end(), T(0));
  (*it)->grad[0] = T(1);
  for (auto rit = std::make_reverse_iterator(it + 1); rit != nodes_.rend(); ++rit) {
    auto& node = *rit;
    if (node->requires_grad && node->backward) node->backward();
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace vcg::ad
