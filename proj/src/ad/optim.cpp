#include "vcg/ad/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vcg::ad {

AdamState::AdamState(std::span<Tensor<float>* const> params, AdamHyper hyper) : hyper_(hyper) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto* p : params) {
    m_.emplace_back(p->size(), 0.0f);
    v_.emplace_back(p->size(), 0.0f);
  }
  initialized_ = true;
}

void AdamState::step(std::span<Tensor<float>* const> params) {
  if (!initialized_) throw std::logic_error("adam_step: optimizer state not initialized");
  if (params.size() != m_.size())
    throw std::invalid_argument("adam_step: parameter count changed since initialization");
  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(hyper_.beta1);
  const float b2 = static_cast<float>(hyper_.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    if (p.size() != m_[k].size()) throw ShapeError("adam_step: moment shape does not match parameter");
    if (!p.requires_grad()) continue;
    auto w = p.data();
    auto g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= static_cast<float>(hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps));
    }
  }
}

void adam_step(std::span<Tensor<float>* const> params, AdamState& state) { state.step(params); }

GradCheckReport grad_check(const ScalarFn& f, Tensor<double>& x, double h, double tol,
                           std::size_t max_entries) {
  if (!x.requires_grad()) x.set_requires_grad(true);
  x.zero_grad();
  {
    Tape<double> tape;
    auto loss = f(tape, x);
    tape.backward(loss);
  }
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());

  auto eval = [&] {
    Tape<double> tape;
    return f(tape, x).item();
  };

  GradCheckReport report;
  const std::size_t n = x.size();
  const std::size_t stride = (max_entries == 0 || max_entries >= n) ? 1 : (n + max_entries - 1) / max_entries;
  auto data = x.data();
  for (std::size_t i = 0; i < n; i += stride) {
    const double saved = data[i];
    data[i] = saved + h;
    const double up = eval();
    data[i] = saved - h;
    const double down = eval();
    data[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace vcg::ad
