#include <cmath>

#include "av/gradcheck.hpp"
#include "av/graph.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace av;
using avtest::random_tensor;
using avtest::random_tensor_off_kink;

namespace {

// Runs the fd check over `seeds` random points, redrawing any point that
// lands too close to a relu/maxpool kink.
void fd_property(const char* what, size_t seeds,
                 const std::function<std::vector<Tensor>(Rng&)>& draw,
                 const ScalarBuilder& f, double tol = 1e-4) {
  for (size_t s = 0; s < seeds; ++s) {
    GradCheckReport rep;
    uint64_t salt = 0;
    for (;;) {
      Rng rng(mix_seed(s, {hash_str(what), salt}));
      rep = finite_difference_check(draw(rng), f, 1e-4, tol);
      if (rep.kink_margin > 3e-3) break;
      ++salt;
      REQUIRE(salt < 64);
    }
    INFO(what << " seed " << s << " max_rel_err=" << rep.max_rel_err << " analytic "
              << rep.analytic << " vs numeric " << rep.numeric);
    CHECK(rep.pass);
  }
}

}  // namespace

TEST_CASE("variance along axis matches direct evaluation") {
  Graph g;
  Var constant_seq = g.input(Tensor::from({3}, {1.0, 1.0, 1.0}));
  CHECK(var_axis(constant_seq, 0).value()[0] == doctest::Approx(0.0));

  Var ramp = g.input(Tensor::from({3}, {0.0, 1.0, 2.0}));
  // population variance: mean 1, squared deviations (1 + 0 + 1) / 3
  CHECK(var_axis(ramp, 0).value()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("variance is nonnegative and zero only for constant sequences") {
  for (uint64_t s = 0; s < 50; ++s) {
    Rng rng(mix_seed(s, {hash_str("varprop")}));
    Graph g;
    Tensor t = random_tensor(rng, {7});
    Var v = var_axis(g.input(t), 0);
    CHECK(v.value()[0] >= 0.0);
    bool constant = true;
    for (size_t i = 1; i < t.size(); ++i)
      if (t[i] != t[0]) constant = false;
    if (!constant) CHECK(v.value()[0] > 0.0);
  }
}

TEST_CASE("cosine similarity basics") {
  Graph g;
  Var a = g.input(Tensor::from({2}, {1.0, 0.0}));
  Var b = g.input(Tensor::from({2}, {0.0, 1.0}));
  CHECK(cosine_similarity(a, b).value()[0] == doctest::Approx(0.0));

  for (uint64_t s = 0; s < 50; ++s) {
    Rng rng(mix_seed(s, {hash_str("cosprop")}));
    Tensor u = random_tensor(rng, {5});
    Tensor su = u;
    double c = rng.uniform(0.1, 3.0);
    for (size_t i = 0; i < su.size(); ++i) su[i] *= c;
    Graph g2;
    double cv = cosine_similarity(g2.input(u), g2.input(su)).value()[0];
    CHECK(cv == doctest::Approx(1.0).epsilon(1e-9));
    Tensor w = random_tensor(rng, {5});
    double cw = cosine_similarity(g2.input(u), g2.input(w)).value()[0];
    CHECK(cw >= -1.0 - 1e-12);
    CHECK(cw <= 1.0 + 1e-12);
  }
}

TEST_CASE("softmax rows sum to one") {
  for (uint64_t s = 0; s < 50; ++s) {
    Rng rng(mix_seed(s, {hash_str("smprop")}));
    Graph g;
    Var p = softmax(g.input(random_tensor(rng, {6}, -5.0, 5.0)));
    double sum = 0.0;
    for (size_t i = 0; i < p.value().size(); ++i) sum += p.value()[i];
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("backward of sum is all ones") {
  Graph g;
  Var x = g.input(Tensor::from({3}, {0.3, -0.4, 2.0}));
  Var root = sum_all(x);
  g.backward(root);
  for (size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0));
}

TEST_CASE("softmax cross-entropy gradient is softmax minus one-hot") {
  Rng rng(7);
  Tensor z = random_tensor(rng, {5}, -2.0, 2.0);
  size_t label = 3;
  Graph g;
  Var zv = g.input(z);
  Var p = softmax(zv);
  Var loss = cross_entropy(p, label);
  g.backward(loss);
  for (size_t i = 0; i < 5; ++i) {
    double expected = p.value()[i] - (i == label ? 1.0 : 0.0);
    CHECK(zv.grad()[i] == doctest::Approx(expected).epsilon(1e-10));
  }
  // cross-checked against central differences
  GradCheckReport rep = finite_difference_check(
      {z},
      [label](Graph& gg, const std::vector<Var>& leaves) {
        return cross_entropy(softmax(leaves[0]), label);
      },
      1e-4, 1e-6);
  CHECK(rep.pass);
}

TEST_CASE("cosine of a vector with itself has vanishing gradient") {
  Rng rng(11);
  Tensor u = random_tensor(rng, {6});
  Graph g;
  Var a = g.input(u);
  Var c = cosine_similarity(a, a);
  CHECK(c.value()[0] == doctest::Approx(1.0));
  g.backward(c);
  for (size_t i = 0; i < u.size(); ++i) CHECK(std::fabs(a.grad()[i]) < 1e-9);
}

TEST_CASE("finite difference harness on |x|^2 and a constant") {
  GradCheckReport rep = finite_difference_check(
      {Tensor::from({2}, {1.0, 2.0})},
      [](Graph& g, const std::vector<Var>& leaves) {
        return sum_all(mul(leaves[0], leaves[0]));
      },
      1e-4, 1e-5);
  CHECK(rep.pass);

  // analytic gradient is [2, 4]
  Graph g;
  Var x = g.input(Tensor::from({2}, {1.0, 2.0}));
  Var root = sum_all(mul(x, x));
  g.backward(root);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));

  GradCheckReport rep2 = finite_difference_check(
      {Tensor::from({3}, {0.5, -0.25, 0.75})},
      [](Graph& g2, const std::vector<Var>& leaves) {
        (void)leaves;
        return g2.constant(Tensor::scalar(4.25));
      },
      1e-4, 1e-5);
  CHECK(rep2.pass);
  CHECK(rep2.max_rel_err == doctest::Approx(0.0));
}

TEST_CASE("every primitive passes finite-difference checks over 100 seeds") {
  fd_property("add_mul_scale", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {3, 4}),
                                           random_tensor(rng, {3, 4})};
              },
              [](Graph& g, const std::vector<Var>& l) {
                return mean_all(scale(mul(add(l[0], l[1]), sub(l[0], l[1])), 1.7));
              });

  fd_property("relu", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor_off_kink(rng, {4, 3})};
              },
              [](Graph& g, const std::vector<Var>& l) { return sum_all(relu(l[0])); });

  fd_property("linear", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {6}), random_tensor(rng, {4, 6}),
                                           random_tensor(rng, {4})};
              },
              [](Graph& g, const std::vector<Var>& l) {
                return mean_all(linear(l[0], l[1], l[2]));
              });

  fd_property("conv2d", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {2, 4, 4}),
                                           random_tensor(rng, {3, 2, 3, 3}),
                                           random_tensor(rng, {3})};
              },
              [](Graph& g, const std::vector<Var>& l) {
                return mean_all(conv2d(l[0], l[1], l[2], 1, 1, 1));
              });

  fd_property("maxpool", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {2, 4, 4})};
              },
              [](Graph& g, const std::vector<Var>& l) { return sum_all(maxpool2(l[0])); });

  fd_property("mean_var_axis", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {5, 3})};
              },
              [](Graph& g, const std::vector<Var>& l) {
                return add(var_axis(mean_axis(l[0], 1), 0), mean_all(l[0]));
              });

  fd_property("softmax_ce", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {6}, -2.0, 2.0)};
              },
              [](Graph& g, const std::vector<Var>& l) {
                return cross_entropy(softmax(l[0]), 2);
              });

  fd_property("cosine", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {5}), random_tensor(rng, {5})};
              },
              [](Graph& g, const std::vector<Var>& l) {
                return cosine_similarity(l[0], l[1]);
              });

  fd_property("concat_select_stack", 100,
              [](Rng& rng) {
                return std::vector<Tensor>{random_tensor(rng, {3, 4}), random_tensor(rng, {2})};
              },
              [](Graph& g, const std::vector<Var>& l) {
                Var row = select0(l[0], 1);
                Var both = concat(row, l[1]);
                Var stacked = stack0({both, both});
                return mean_all(mul(stacked, stacked));
              });

  fd_property("dropout_mask", 100,
              [](Rng& rng) {
                Tensor mask({4}, 1.0);
                mask[1] = 0.0;
                return std::vector<Tensor>{random_tensor(rng, {4}), mask};
              },
              [](Graph& g, const std::vector<Var>& l) {
                return sum_all(dropout_mask_apply(l[0], l[1], 2.0));
              });
}

TEST_CASE("shape errors name the op and the offending dimensions") {
  Graph g;
  Var x = g.input(Tensor({1, 4, 4}));
  Var w = g.input(Tensor({8, 2, 3, 3}));
  Var b = g.input(Tensor({8}));
  CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, 1, 1),
                       "conv2d: input has 1 channels, weight expects 2", Error);

  Var a1 = g.input(Tensor({3}));
  Var a2 = g.input(Tensor({4}));
  CHECK_THROWS_AS(add(a1, a2), Error);
  CHECK_THROWS_AS(linear(a1, w, b), Error);
}

TEST_CASE("backward rejects non-scalar roots and is deterministic") {
  Rng rng(3);
  Tensor t = random_tensor(rng, {3, 3});
  {
    Graph g;
    Var x = g.input(t);
    CHECK_THROWS_AS(g.backward(x), Error);
  }
  Tensor g1, g2;
  for (int rep = 0; rep < 2; ++rep) {
    Graph g;
    Var x = g.input(t);
    Var root = mean_all(relu(mul(x, x)));
    g.backward(root);
    (rep == 0 ? g1 : g2) = x.grad();
  }
  REQUIRE(g1.size() == g2.size());
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("backward visits each node once: repeated use accumulates correctly") {
  // y = x + x has dy/dx = 2 exactly
  Graph g;
  Var x = g.input(Tensor::from({2}, {0.5, -1.0}));
  Var y = sum_all(add(x, x));
  g.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(2.0));
}
