#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "vcg/ad/optim.hpp"
#include "vcg/ad/tape.hpp"
#include "vcg/util/rng.hpp"

using namespace vcg;
using namespace vcg::ad;

namespace {

Tensor<double> rand_d(Shape s, std::uint64_t seed, bool grad = false) {
  Rng r(seed);
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = r.normal();
  return Tensor<double>::leaf(std::move(s), std::move(v), grad);
}

void expect_pass(const ScalarFn& f, Tensor<double> x, double tol = 1e-4) {
  const auto rep = grad_check(f, x, 1e-5, tol);
  CAPTURE(rep.max_rel_error);
  CAPTURE(rep.worst_index);
  CHECK(rep.passed);
}

// A fixed random projection turns any tensor into a scalar with a non-trivial gradient.
Tensor<double> probe(Tape<double>& t, const Tensor<double>& y) {
  auto w = rand_d(y.shape(), 999);
  return t.sum(t.mul(y, w));
}

}  // namespace

TEST_CASE("analytic identities") {
  Tape<double> t;
  auto z = Tensor<double>::leaf({1, 2}, {0, 0});
  auto s = t.softmax_lastdim(z);
  CHECK(s.data()[0] == doctest::Approx(0.5));
  CHECK(s.data()[1] == doctest::Approx(0.5));

  const int V = 7;
  auto logits = Tensor<double>::zeros({3, V});
  std::vector<int> targets{1, 4, 6};
  CHECK(t.cross_entropy(logits, targets).item() == doctest::Approx(std::log(V)));

  auto c = Tensor<double>::leaf({1, 4}, {3, 3, 3, 3});
  auto g = Tensor<double>::leaf({4}, {1, 1, 1, 1});
  auto b = Tensor<double>::zeros({4});
  for (double v : t.layer_norm(c, g, b).data()) CHECK(std::abs(v) < 1e-3);
}

TEST_CASE("sum of squares has gradient 2x") {
  auto x = rand_d({3, 4}, 1, true);
  Tape<double> t;
  t.backward(t.sum(t.mul(x, x)));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.data()[i]));
}

TEST_CASE("projection onto one entry gives a unit gradient") {
  auto x = rand_d({1, 5}, 2, true);
  Tape<double> t;
  t.backward(t.sum(t.slice_cols(x, 0, 1)));
  CHECK(x.grad()[0] == 1.0);
  for (std::size_t i = 1; i < 5; ++i) CHECK(x.grad()[i] == 0.0);
}

TEST_CASE("disconnected leaf keeps a zero gradient") {
  auto x = rand_d({2, 2}, 3, true);
  auto y = rand_d({2, 2}, 4, true);
  Tape<double> t;
  t.backward(t.sum(t.mul(x, x)));
  for (double g : y.grad()) CHECK(g == 0.0);
}

TEST_CASE("matmul chain matches central differences to 1e-6") {
  auto b = rand_d({4, 3}, 5);
  auto c = rand_d({3, 2}, 6);
  expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.matmul(t.matmul(x, b), c)); },
              rand_d({2, 4}, 7), 1e-6);
}

TEST_CASE("every primitive passes grad_check") {
  auto other = rand_d({3, 4}, 10);
  auto other_t = rand_d({5, 4}, 11);
  auto bias = rand_d({4}, 12);
  auto gain = rand_d({4}, 13);
  const auto x0 = rand_d({3, 4}, 14);

  SUBCASE("matmul left and right") {
    auto w = rand_d({4, 5}, 15);
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.matmul(x, w)); }, x0.clone());
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.matmul(other, x)); },
                rand_d({4, 2}, 16));
  }
  SUBCASE("matmul_nt") {
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.matmul_nt(x, other_t)); }, x0.clone());
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.matmul_nt(other, x)); },
                rand_d({5, 4}, 17));
  }
  SUBCASE("add, mul, scale, add_bias") {
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.add(x, other)); }, x0.clone());
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.mul(x, x)); }, x0.clone());
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.scale(x, -1.7)); }, x0.clone());
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.add_bias(other, x)); },
                rand_d({4}, 18));
  }
  SUBCASE("concat and slice") {
    expect_pass(
        [&](Tape<double>& t, const Tensor<double>& x) {
          std::vector<Tensor<double>> parts{x, other};
          return probe(t, t.slice_rows(t.concat_rows(parts), 1, 5));
        },
        x0.clone());
    expect_pass(
        [&](Tape<double>& t, const Tensor<double>& x) {
          std::vector<Tensor<double>> parts{other, x};
          return probe(t, t.slice_cols(t.concat_cols(parts), 2, 7));
        },
        x0.clone());
  }
  SUBCASE("gather_rows with a repeated and a negative id") {
    std::vector<int> ids{2, 0, -1, 2};
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.gather_rows(x, ids)); }, x0.clone());
  }
  SUBCASE("layer_norm over input, gain and bias") {
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.layer_norm(x, gain, bias)); },
                x0.clone());
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.layer_norm(other, x, bias)); },
                rand_d({4}, 19));
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.layer_norm(other, gain, x)); },
                rand_d({4}, 20));
  }
  SUBCASE("gelu") {
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return t.sum(t.gelu(x)); }, x0.clone());
  }
  SUBCASE("softmax") {
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.softmax_lastdim(x)); }, x0.clone());
  }
  SUBCASE("masked_fill") {
    std::vector<std::uint8_t> mask{0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 1};
    expect_pass(
        [&](Tape<double>& t, const Tensor<double>& x) { return probe(t, t.softmax_lastdim(t.masked_fill(x, mask, -1e9))); },
        x0.clone());
  }
  SUBCASE("cross_entropy mean and sum with ignored rows") {
    std::vector<int> targets{1, -1, 3};
    expect_pass([&](Tape<double>& t, const Tensor<double>& x) { return t.cross_entropy(x, targets); }, x0.clone());
    expect_pass(
        [&](Tape<double>& t, const Tensor<double>& x) { return t.cross_entropy(x, targets, -1, Reduction::kSum); },
        x0.clone());
  }
}

TEST_CASE("masked_fill blocks gradient at masked entries") {
  auto x = rand_d({1, 3}, 21, true);
  std::vector<std::uint8_t> mask{0, 1, 0};
  Tape<double> t;
  t.backward(probe(t, t.masked_fill(x, mask, 0.0)));
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[0] != 0.0);
}

TEST_CASE("shape errors are reported") {
  Tape<double> t;
  CHECK_THROWS_AS(t.matmul(rand_d({2, 3}, 1), rand_d({2, 3}, 2)), ShapeError);
  CHECK_THROWS_AS(t.add(rand_d({2, 3}, 1), rand_d({3, 2}, 2)), ShapeError);
}

TEST_CASE("adam leaves parameters alone on a zero gradient") {
  auto w = Tensor<float>::leaf({3}, {1, -2, 3}, true);
  std::vector<Tensor<float>*> ps{&w};
  AdamState st(ps, {});
  w.zero_grad();
  st.step(ps);
  CHECK(w.data()[0] == 1.0f);
  CHECK(w.data()[1] == -2.0f);
  CHECK(w.data()[2] == 3.0f);
}

TEST_CASE("adam minimises the squared norm like the scalar recurrence") {
  // Oracle: the same recurrence in double, coordinate by coordinate.
  std::vector<double> ref{0.6, -0.8};
  std::vector<double> m(2, 0), v(2, 0);
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 200; ++t)
    for (int i = 0; i < 2; ++i) {
      const double g = 2 * ref[i];
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      ref[i] -= lr * (m[i] / (1 - std::pow(b1, t))) / (std::sqrt(v[i] / (1 - std::pow(b2, t))) + eps);
    }

  auto w = Tensor<float>::leaf({2}, {0.6f, -0.8f}, true);
  std::vector<Tensor<float>*> ps{&w};
  AdamState st(ps, {.lr = 0.1});
  for (int step = 0; step < 200; ++step) {
    w.zero_grad();
    Tape<float> t;
    t.backward(t.sum(t.mul(w, w)));
    st.step(ps);
  }
  const double norm = std::hypot(w.data()[0], w.data()[1]);
  CHECK(norm < 1e-2);
  CHECK(std::hypot(ref[0], ref[1]) < 1e-2);
  CHECK(std::abs(w.data()[0] - ref[0]) < 1e-3);
  CHECK(std::abs(w.data()[1] - ref[1]) < 1e-3);
}
