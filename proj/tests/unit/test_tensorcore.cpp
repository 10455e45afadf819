#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "disfl/checkpoint.hpp"
#include "disfl/errors.hpp"
#include "disfl/gradcheck.hpp"
#include "disfl/ops.hpp"
#include "disfl/optim.hpp"
#include "disfl/rng.hpp"

using namespace disfl;
using namespace disfl::tc;

namespace {

template <class T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(normal(rng));
  return t;
}

Parameter<double> param(const std::string& name, Shape shape, std::uint64_t seed, double scale = 1.0) {
  return make_parameter(name, random_tensor<double>(std::move(shape), seed, scale));
}

double check(const std::function<Var<double>()>& f, const std::vector<Parameter<double>>& params) {
  return grad_check<double>(f, params, 1e-5, 1).max_rel_error;
}

}  // namespace

TEST_CASE("matmul with identity") {
  const auto a = Var<float>::constant(random_tensor<float>({3, 4}, 1));
  Tensor<float> eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0f;
  CHECK(matmul(a, Var<float>::constant(eye)).value() == a.value());
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("softmax rows and columns are normalized") {
  const auto x = Var<float>::constant(random_tensor<float>({5, 7}, 2, 3.0));
  const auto rows = softmax(x, 1).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) s += rows.at(r, c);
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  const auto cols = softmax(x, 0).value();
  for (std::size_t c = 0; c < 7; ++c) {
    double s = 0;
    for (std::size_t r = 0; r < 5; ++r) s += cols.at(r, c);
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("cross entropy limits and masking") {
  const auto confident = Var<double>::constant(Tensor<double>({2, 2}, {40.0, -40.0, -40.0, 40.0}));
  const std::vector<std::int32_t> targets{0, 1};
  const std::vector<std::uint8_t> mask{1, 1};
  CHECK(cross_entropy(confident, std::span<const std::int32_t>(targets), std::span<const std::uint8_t>(mask))
            .value()
            .item() < 1e-12);
  const std::vector<std::uint8_t> none{0, 0};
  CHECK(cross_entropy(confident, std::span<const std::int32_t>(targets), std::span<const std::uint8_t>(none))
            .value()
            .item() == 0.0);
  const auto even = Var<double>::constant(Tensor<double>({1, 2}, {0.3, 0.3}));
  const std::vector<std::int32_t> t1{1};
  const std::vector<std::uint8_t> m1{1};
  CHECK(cross_entropy(even, std::span<const std::int32_t>(t1), std::span<const std::uint8_t>(m1)).value().item() ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("grad check of sum of squares against the analytic gradient") {
  auto x = param("x", {4, 3}, 3);
  const auto report = grad_check<double>([&] { return l2_squared(x.var); }, {x}, 1e-4, 0);
  CHECK(report.max_rel_error < 1e-5);
  // Analytic gradient 2x.
  l2_squared(x.var).backward();
  for (std::size_t i = 0; i < x.value().size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.value()[i]));
}

TEST_CASE("grad check of a constant function") {
  auto x = param("x", {3}, 4);
  const auto report =
      grad_check<double>([&] { return Var<double>::constant(Tensor<double>::scalar(2.0)); }, {x}, 1e-4, 0);
  CHECK(report.max_rel_error == 0.0);
}

TEST_CASE("per-op gradients match finite differences") {
  auto a = param("a", {4, 3}, 10);
  auto b = param("b", {3, 5}, 11);
  auto c = param("c", {4, 3}, 12);
  auto row = param("row", {3}, 13);
  auto gain = param("gain", {3}, 14);
  auto bias = param("bias", {3}, 15);
  const auto w = Var<double>::constant(random_tensor<double>({4, 3}, 16));
  const auto w5 = Var<double>::constant(random_tensor<double>({4, 5}, 17));
  auto weighted = [&](const Var<double>& v) { return sum(mul(v, w)); };

  CHECK(check([&] { return sum(mul(matmul(a.var, b.var), w5)); }, {a, b}) < 1e-6);
  CHECK(check([&] { return weighted(add(a.var, c.var)); }, {a, c}) < 1e-6);
  CHECK(check([&] { return weighted(sub(a.var, c.var)); }, {a, c}) < 1e-6);
  CHECK(check([&] { return weighted(mul(a.var, c.var)); }, {a, c}) < 1e-6);
  CHECK(check([&] { return weighted(add_row(a.var, row.var)); }, {a, row}) < 1e-6);
  CHECK(check([&] { return weighted(scale(a.var, 0.7)); }, {a}) < 1e-6);
  CHECK(check([&] { return weighted(gelu(a.var)); }, {a}) < 1e-6);
  CHECK(check([&] { return weighted(sigmoid(a.var)); }, {a}) < 1e-6);
  CHECK(check([&] { return weighted(relu(a.var)); }, {a}) < 1e-5);
  CHECK(check([&] { return weighted(layer_norm(a.var, gain.var, bias.var)); }, {a, gain, bias}) < 1e-5);
  CHECK(check([&] { return weighted(softmax(a.var, 1)); }, {a}) < 1e-6);
  CHECK(check([&] { return weighted(softmax(a.var, 0)); }, {a}) < 1e-6);
  CHECK(check([&] { return mean(a.var); }, {a}) < 1e-6);
  CHECK(check([&] { return sum(mul(mean_rows(a.var), Var<double>::constant(random_tensor<double>({1, 3}, 5)))); },
              {a}) < 1e-6);
  CHECK(check([&] { return weighted(reshape(reshape(a.var, {3, 4}), {4, 3})); }, {a}) < 1e-6);
  CHECK(check([&] { return l2_squared(slice_rows(a.var, 1, 2)); }, {a}) < 1e-6);
  CHECK(check([&] { return l2_squared(concat<double>({a.var, c.var}, 0)); }, {a, c}) < 1e-6);
  CHECK(check([&] { return l2_squared(concat<double>({a.var, c.var}, 1)); }, {a, c}) < 1e-6);

  const std::vector<std::int32_t> ids{2, 0, 2, 1};
  auto table = param("table", {3, 3}, 18);
  CHECK(check([&] { return weighted(embedding_lookup(table.var, std::span<const std::int32_t>(ids))); }, {table}) <
        1e-6);

  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  CHECK(check([&] { return l2_squared(mean_pool(a.var, std::span<const std::uint8_t>(mask), 2)); }, {a}) < 1e-6);

  const std::vector<std::int32_t> targets{0, 2, 1, 1};
  CHECK(check([&] {
          return cross_entropy(a.var, std::span<const std::int32_t>(targets), std::span<const std::uint8_t>(mask));
        },
              {a}) < 1e-6);

  auto logits = param("logits", {5, 1}, 19);
  const std::vector<double> bt{1, 0, 1, 0, 1};
  CHECK(check([&] { return binary_cross_entropy_with_logits(logits.var, std::span<const double>(bt)); }, {logits}) <
        1e-6);
  CHECK(check([&] { return binary_cross_entropy(sigmoid(logits.var), std::span<const double>(bt)); }, {logits}) <
        1e-6);
}

TEST_CASE("attention gradients and masking") {
  const std::size_t groups = 2, len = 4, d = 6, heads = 2;
  auto q = param("q", {groups * len, d}, 20);
  auto k = param("k", {groups * len, d}, 21);
  auto v = param("v", {groups * len, d}, 22);
  const std::vector<std::uint8_t> mask{1, 1, 0, 0, 1, 1, 1, 0};
  const auto w = Var<double>::constant(random_tensor<double>({groups * len, d}, 23));
  auto f = [&] {
    return sum(mul(multi_head_attention(q.var, k.var, v.var, std::span<const std::uint8_t>(mask), groups, heads), w));
  };
  CHECK(check(f, {q, k, v}) < 1e-6);

  // Changing keys/values at masked positions changes nothing.
  const auto base = multi_head_attention(q.var, k.var, v.var, std::span<const std::uint8_t>(mask), groups, heads);
  auto k2 = Var<double>::constant(k.value());
  auto v2 = Var<double>::constant(v.value());
  for (std::size_t c = 0; c < d; ++c) {
    k2.mutable_value().at(2, c) = 100.0;
    v2.mutable_value().at(3, c) = -50.0;
    v2.mutable_value().at(7, c) = 9.0;
  }
  const auto moved = multi_head_attention(q.var, k2, v2, std::span<const std::uint8_t>(mask), groups, heads);
  CHECK(moved.value() == base.value());
}

TEST_CASE("grad mode switch") {
  auto x = param("x", {2}, 1);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    CHECK_FALSE(l2_squared(x.var).requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(l2_squared(x.var).requires_grad());
}

TEST_CASE("non-finite forward values raise NUMERIC_ERROR") {
  const auto x = Var<double>::constant(Tensor<double>({2}, {1e308, 1e308}));
  try {
    l2_squared(x);
    FAIL("expected NUMERIC_ERROR");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericError);
  }
}

TEST_CASE("adam first step moves by about lr") {
  auto p = make_parameter("p", Tensor<double>({1}, 1.0));
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam<double> opt({p}, cfg);
  p.grad()[0] = 1.0;
  opt.step();
  // t=1: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1, step = lr * 1 / (1 + eps).
  const double expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
  CHECK(std::abs(p.value()[0] - expected) < 1e-12);
  CHECK(opt.steps() == 1);

  auto q = make_parameter("q", Tensor<double>({2}, 3.0));
  Adam<double> still({q}, cfg);
  still.step();
  CHECK(q.value()[0] == 3.0);

  // Independent groups.
  auto a = make_parameter("a", Tensor<double>({1}, 0.0));
  auto b = make_parameter("b", Tensor<double>({1}, 0.0));
  Adam<double> oa({a}, cfg), ob({b}, cfg);
  a.grad()[0] = 1.0;
  oa.step();
  CHECK(b.value()[0] == 0.0);
  CHECK(a.value()[0] < 0.0);
  oa.zero_grad();
  CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("checkpoint encode/decode and atomic save") {
  std::vector<NamedTensor> tensors{{"w", random_tensor<float>({2, 3}, 1)}, {"s", Tensor<float>::scalar(4.5f)}};
  const std::string bytes = encode_checkpoint(tensors);
  CHECK(bytes.substr(0, 8) == "DSFLCKPT");
  CHECK(decode_checkpoint(bytes) == tensors);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), Error);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), Error);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), Error);

  const auto dir = std::filesystem::temp_directory_path() / "disfl_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "m.ckpt", tensors);
  CHECK(load_checkpoint(dir / "m.ckpt") == tensors);
  CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt.tmp"));
  std::filesystem::remove_all(dir);
}
