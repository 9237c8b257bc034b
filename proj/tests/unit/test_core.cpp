#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "crat/core/adam.hpp"
#include "crat/core/checkpoint.hpp"
#include "crat/core/errors.hpp"
#include "crat/core/gradcheck.hpp"
#include "crat/core/ops.hpp"
#include "support/builder_check.hpp"

using namespace crat;
using crat::testing::check_builder;
using crat::testing::random_array;

namespace {

double scalar(const ad::Var& v) { return v.value().data.at(0); }

}  // namespace

TEST_CASE("primitive examples") {
  ad::Graph g;
  CHECK(scalar(ad::sigmoid(g.constant(Array2(1, 1, 0.0)))) == 0.5);
  CHECK(scalar(ad::row_softmax(g.constant(Array2(1, 1, 3.7)))) == 1.0);
  CHECK(scalar(ad::softplus(g.constant(Array2(1, 1, 0.0)))) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(scalar(ad::softplus(g.constant(Array2(1, 1, 0.0)))) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Stable branch: large inputs pass through unchanged.
  CHECK(scalar(ad::softplus(g.constant(Array2(1, 1, 50.0)))) == 50.0);
  CHECK(std::isfinite(scalar(ad::softplus(g.constant(Array2(1, 1, 800.0))))));
}

TEST_CASE("shape mismatch is rejected with both shapes named") {
  ad::Graph g;
  auto a = g.constant(Array2(2, 3));
  auto b = g.constant(Array2(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
    CHECK(msg.find("matmul") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, g.constant(Array2(3, 2))), ShapeError);
  CHECK_THROWS_AS(ad::add_row(a, g.constant(Array2(1, 2))), ShapeError);
  CHECK_THROWS_AS(ad::group_norm(a, g.constant(Array2(1, 3)), g.constant(Array2(1, 3)), 2, 1e-5), ShapeError);
}

TEST_CASE("backward basics") {
  SUBCASE("x*x at 3 has gradient 6") {
    ad::Graph g;
    auto x = g.variable(Array2(1, 1, 3.0));
    auto loss = ad::mul(x, x);
    g.backward(loss);
    CHECK(x.grad().data[0] == 6.0);
  }
  SUBCASE("unreachable leaf gets zero gradient") {
    ad::Graph g;
    auto x = g.variable(Array2(1, 1, 2.0));
    auto y = g.variable(Array2(2, 2, 5.0));
    g.backward(ad::scale(x, 4.0));
    CHECK(x.grad().data[0] == 4.0);
    CHECK(y.grad() == Array2(2, 2, 0.0));
  }
  SUBCASE("non-scalar loss is rejected") {
    ad::Graph g;
    auto x = g.variable(Array2(2, 1, 1.0));
    CHECK_THROWS_AS(g.backward(x), ShapeError);
  }
  SUBCASE("repeated backward accumulates into leaves only") {
    ad::Graph g;
    auto x = g.variable(Array2(1, 1, 3.0));
    auto loss = ad::mul(ad::sigmoid(x), x);
    g.backward(loss);
    const double once = x.grad().data[0];
    g.backward(loss);
    CHECK(x.grad().data[0] == doctest::Approx(2.0 * once).epsilon(1e-15));
  }
}

TEST_CASE("sum(A*B) gradient matches central differences") {
  std::mt19937_64 rng(7);
  Array2 a = random_array(3, 4, rng);
  Array2 b = random_array(4, 2, rng);
  auto report = check_builder([](ad::Graph&, const std::vector<ad::Var>& v) { return ad::matmul(v[0], v[1]); },
                              {a, b}, 11);
  CHECK(report.max_rel_error < 1e-6);

  // Closed form: d/dA sum(AB) has every row equal to the row sums of B.
  ad::Graph g;
  auto av = g.variable(a);
  auto bv = g.constant(b);
  g.backward(ad::sum(ad::matmul(av, bv)));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(av.grad()(r, c) == doctest::Approx(b(c, 0) + b(c, 1)));
}

TEST_CASE("shared subexpression gradients equal the unshared equivalent") {
  std::mt19937_64 rng(3);
  const Array2 x0 = random_array(3, 3, rng);

  ad::Graph shared;
  auto xs = shared.variable(x0);
  auto s = ad::tanh(xs);
  shared.backward(ad::sum(ad::mul(s, ad::sigmoid(s))));

  ad::Graph unshared;
  auto xu = unshared.variable(x0);
  unshared.backward(ad::sum(ad::mul(ad::tanh(xu), ad::sigmoid(ad::tanh(xu)))));

  CHECK(max_abs_diff(xs.grad(), xu.grad()) < 1e-15);
}

TEST_CASE("every primitive passes finite differences on 100 random shapes") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  for (ad::Primitive op : ad::kAllPrimitives) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t r = dim(rng), c = dim(rng), k = dim(rng);
      std::vector<Array2> inputs;
      switch (op) {
        case ad::Primitive::matmul:
          inputs = {random_array(r, k, rng), random_array(k, c, rng)};
          break;
        case ad::Primitive::add:
        case ad::Primitive::elementwise_mul:
          inputs = {random_array(r, c, rng), random_array(r, c, rng)};
          break;
        case ad::Primitive::concat_cols:
          inputs = {random_array(r, c, rng), random_array(r, k, rng)};
          break;
        case ad::Primitive::relu: {
          Array2 a = random_array(r, c, rng, 0.01, 1.0);
          std::bernoulli_distribution neg(0.5);
          for (double& v : a.data)
            if (neg(rng)) v = -v;
          inputs = {a};
          break;
        }
        default:
          inputs = {random_array(r, c, rng, -3.0, 3.0)};
      }
      const double factor = -1.7;
      auto report = check_builder(
          [op, factor](ad::Graph&, const std::vector<ad::Var>& v) { return ad::forward_primitive(op, v, factor); },
          inputs, rng());
      worst = std::max(worst, report.max_rel_error);
    }
    INFO(ad::primitive_name(op));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("structural and normalization ops pass finite differences") {
  std::mt19937_64 rng(99);
  const std::vector<std::size_t> idx = {2, 0, 2, 1};
  auto check = [&](const crat::testing::Builder& b, std::vector<Array2> in) {
    auto report = check_builder(b, std::move(in), rng());
    CHECK(report.max_rel_error < 1e-6);
  };
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::gather_rows(v[0], idx); },
        {random_array(3, 4, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::scatter_add_rows(v[0], idx, 5); },
        {random_array(4, 3, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::slice_cols(v[0], 1, 3); },
        {random_array(3, 4, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::slice_rows(v[0], 1, 3); },
        {random_array(4, 2, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::concat_rows(v); },
        {random_array(2, 3, rng), random_array(1, 3, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::matmul_bt(v[0], v[1]); },
        {random_array(3, 4, rng), random_array(5, 4, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::add_row(v[0], v[1]); },
        {random_array(3, 4, rng), random_array(1, 4, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::sub(v[0], v[1]); },
        {random_array(3, 4, rng), random_array(3, 4, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::mean(v[0]); }, {random_array(3, 4, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::batch_norm_train(v[0], v[1], v[2], 1e-5); },
        {random_array(6, 4, rng), random_array(1, 4, rng, 0.5, 1.5), random_array(1, 4, rng)});
  Array2 rm = random_array(1, 4, rng);
  Array2 rv = random_array(1, 4, rng, 0.5, 2.0);
  check(
      [&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::batch_norm_eval(v[0], v[1], v[2], rm, rv, 1e-5); },
      {random_array(3, 4, rng), random_array(1, 4, rng, 0.5, 1.5), random_array(1, 4, rng)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::group_norm(v[0], v[1], v[2], 2, 1e-5); },
        {random_array(3, 6, rng), random_array(1, 6, rng, 0.5, 1.5), random_array(1, 6, rng)});
  Array2 target = random_array(3, 4, rng, -2.0, 2.0);
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::smooth_l1(v[0], target, 1.0); },
        {random_array(3, 4, rng, -2.0, 2.0)});
  check([&](ad::Graph&, const std::vector<ad::Var>& v) { return ad::row_smooth_l1(v[0], target, 1.0); },
        {random_array(3, 4, rng, -2.0, 2.0)});
}

TEST_CASE("row-softmax rows are positive and sum to one") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    ad::Graph g;
    Array2 x = random_array(1 + trial % 7, 1 + trial % 9, rng, -50.0, 50.0);
    const Array2& y = ad::row_softmax(g.constant(x)).value();
    for (std::size_t r = 0; r < y.rows; ++r) {
      double total = 0.0;
      for (double v : y.row(r)) {
        CHECK(v > 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("smooth-L1 examples") {
  ad::Graph g;
  Array2 gt = Array2::from_rows({{1.0, -2.0}});
  CHECK(scalar(ad::smooth_l1(g.constant(gt), gt, 1.0)) == 0.0);
  CHECK(scalar(ad::smooth_l1(g.constant(Array2::from_rows({{1.5, -2.0}})), gt, 1.0)) == doctest::Approx(0.0625));
  CHECK(scalar(ad::smooth_l1(g.constant(Array2::from_rows({{3.0, -2.0}})), gt, 1.0)) == doctest::Approx(0.75));
}

TEST_CASE("adam step") {
  SUBCASE("single scalar step from p=1, g=1") {
    ParamStore ps;
    ps.add("p", Array2(1, 1, 1.0));
    Adam adam(AdamConfig{1e-3, 0.9, 0.999, 1e-8, 0.0});
    adam.step(ps, {Array2(1, 1, 1.0)});
    // m̂ = 1, v̂ = 1, update = 1/(1 + 1e-8).
    CHECK(ps.value("p").data[0] == doctest::Approx(1.0 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(adam.step_count() == 1);
  }
  SUBCASE("decoupled decay is applied to the parameter") {
    ParamStore ps;
    ps.add("p", Array2(1, 1, 1.0));
    Adam adam(AdamConfig{1e-3, 0.9, 0.999, 1e-8, 1e-2});
    adam.step(ps, {Array2(1, 1, 1.0)});
    CHECK(ps.value("p").data[0] == doctest::Approx(1.0 - 1e-5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("zero gradient and no decay leaves the parameter unchanged") {
    ParamStore ps;
    ps.add("p", Array2(2, 2, 0.25));
    Adam adam(AdamConfig{1e-3, 0.9, 0.999, 1e-8, 0.0});
    adam.step(ps, {Array2(2, 2, 0.0)});
    CHECK(ps.value("p") == Array2(2, 2, 0.25));
  }
  SUBCASE("frozen parameter ignores its gradient") {
    ParamStore ps;
    ps.add("frozen", Array2(1, 2, 1.0));
    ps.add("live", Array2(1, 2, 1.0));
    ps.set_trainable([](const std::string& n) { return n == "live"; });
    Adam adam;
    adam.step(ps, {Array2(1, 2, 3.0), Array2(1, 2, 3.0)});
    CHECK(ps.value("frozen") == Array2(1, 2, 1.0));
    CHECK(ps.value("live").data[0] < 1.0);
  }
  SUBCASE("non-finite gradient aborts naming the parameter") {
    ParamStore ps;
    ps.add("encoder.w", Array2(1, 1, 1.0));
    Adam adam;
    try {
      adam.step(ps, {Array2(1, 1, std::nan(""))});
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("encoder.w") != std::string::npos);
    }
    CHECK(ps.value("encoder.w").data[0] == 1.0);
  }
  SUBCASE("deterministic") {
    std::mt19937_64 rng(1);
    ParamStore a;
    a.add("w", random_array(3, 3, rng));
    ParamStore b = a;
    std::vector<Array2> grads = {random_array(3, 3, rng)};
    Adam oa, ob;
    for (int i = 0; i < 5; ++i) {
      oa.step(a, grads);
      ob.step(b, grads);
    }
    CHECK(a == b);
  }
}

TEST_CASE("finite_diff_check reference functions") {
  std::mt19937_64 rng(4);
  ParamStore ps;
  ps.add("w", random_array(2, 3, rng));
  const Array2 coeff = random_array(2, 3, rng);

  auto linear = [&](const ParamStore& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < coeff.size(); ++i) s += coeff.data[i] * p.value("w").data[i];
    return s;
  };
  auto report = finite_diff_check(linear, [&](const ParamStore&) { return std::vector<Array2>{coeff}; }, ps, 1e-5,
                                  1e-8);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-8);
  CHECK(report.checked == 6);

  auto constant = finite_diff_check([](const ParamStore&) { return 4.0; },
                                    [](const ParamStore&) { return std::vector<Array2>{Array2(2, 3)}; }, ps, 1e-5,
                                    1e-8);
  CHECK(constant.max_rel_error == 0.0);
  for (const auto& e : constant.per_param) CHECK(e.numeric == 0.0);

  auto wrong = finite_diff_check(linear, [&](const ParamStore&) { return std::vector<Array2>{Array2(2, 3)}; }, ps,
                                 1e-5, 1e-4);
  CHECK_FALSE(wrong.passed);
  CHECK(wrong.worst.param == "w");

  CHECK_THROWS(finite_diff_check(linear, [&](const ParamStore&) { return std::vector<Array2>{coeff}; }, ps, 1e-2,
                                 1e-4));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  std::mt19937_64 rng(8);
  ParamStore ps;
  ps.add("a", random_array(3, 5, rng, -1e300, 1e300));
  ps.add("b", Array2::from_rows({{std::nextafter(0.0, 1.0), -0.0, 1.0 / 3.0}}));
  ps.add("running", Array2(1, 3, 1.0), false);
  ps.at("a").trainable = false;
  const auto path = std::filesystem::temp_directory_path() / "crat_core_ckpt.bin";
  save_checkpoint(path, ps, "{\"hidden\":8}");
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.descriptor == "{\"hidden\":8}");
  REQUIRE(ck.params.size() == ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& x = ps.items()[i];
    const auto& y = ck.params.items()[i];
    CHECK(x.name == y.name);
    CHECK(x.learnable == y.learnable);
    CHECK(x.trainable == y.trainable);
    CHECK(std::memcmp(x.value.data.data(), y.value.data.data(), x.value.size() * sizeof(double)) == 0);
  }
  {
    std::ofstream bad(path, std::ios::binary | std::ios::trunc);
    bad << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  CHECK_THROWS_AS(load_checkpoint(path.string() + ".missing"), DataError);
  std::filesystem::remove(path);
}
