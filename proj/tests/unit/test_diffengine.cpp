#include <gtest/gtest.h>

#include <cmath>

#include "sgdnet/error.hpp"
#include "sgdnet/grad_check.hpp"
#include "sgdnet/ops.hpp"
#include "sgdnet/rng.hpp"
#include "sgdnet/tape.hpp"

namespace sgdnet {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

TEST(Tensor, RejectsZeroExtent) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2}, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
}

TEST(Tensor, ArithmeticAndReductions) {
  Tensor a = Tensor::from({1, 2, 3});
  Tensor b = Tensor::from({4, 5, 6});
  EXPECT_DOUBLE_EQ(dot(a, b), 32.0);
  EXPECT_DOUBLE_EQ(sum_squares(a), 14.0);
  EXPECT_EQ(a + b, Tensor::from({5, 7, 9}));
  EXPECT_EQ(2.0 * a, Tensor::from({2, 4, 6}));
  axpy(-1.0, a, b);
  EXPECT_EQ(b, Tensor::from({3, 3, 3}));
  EXPECT_THROW(a += Tensor({2}), ShapeError);
}

TEST(Tape, AddThenSumSquares) {
  Tape tape;
  Var a = tape.leaf(Tensor::from({1, 2}), "a");
  Var b = tape.leaf(Tensor::from({3, -1}), "b");
  Var loss = sum_squares(add(a, b));
  EXPECT_DOUBLE_EQ(loss.value().item(), 16.0 + 1.0);
  Gradients g = tape.backward(loss);
  EXPECT_EQ(g.of(a), Tensor::from({8, 2}));
  EXPECT_EQ(g.of(b), Tensor::from({8, 2}));
}

TEST(Tape, DisconnectedLeafGetsZeros) {
  Tape tape;
  Var a = tape.leaf(Tensor::from({1, 2}));
  Var unused = tape.leaf(Tensor::from({5, 5, 5}));
  Gradients g = tape.backward(sum_squares(a));
  EXPECT_EQ(g.of(unused), Tensor({3}));
}

TEST(Tape, NonScalarLossRejected) {
  Tape tape;
  Var a = tape.leaf(Tensor::from({1, 2}));
  EXPECT_THROW(tape.backward(a), ShapeError);
}

TEST(Tape, SecondSweepRejected) {
  Tape tape;
  Var a = tape.leaf(Tensor::from({1, 2}));
  Var l = sum_squares(a);
  tape.backward(l);
  EXPECT_THROW(tape.backward(l), std::logic_error);
}

TEST(Tape, ConstantsRecordNoBackward) {
  Tape tape;
  Var a = tape.constant(Tensor::from({1, 2}));
  Var s = sum_squares(scale(a, 3.0));
  EXPECT_FALSE(tape.requires_grad(s.id));
  EXPECT_DOUBLE_EQ(s.value().item(), 45.0);
}

TEST(Conv2d, OnesKernelCountsNeighbours) {
  Tape tape;
  Var x = tape.constant(Tensor({3, 3}, 1.0));
  Var k = tape.constant(Tensor({1, 1, 3, 3}, 1.0));
  Var b = tape.constant(Tensor({1}));
  Tensor y = conv2d(x, k, b).value();
  ASSERT_EQ(y.shape(), (Shape{1, 3, 3}));
  EXPECT_DOUBLE_EQ(y[4], 9.0);
  EXPECT_DOUBLE_EQ(y[0], 4.0);
  EXPECT_DOUBLE_EQ(y[1], 6.0);
}

TEST(Conv2d, IsCrossCorrelation) {
  Tape tape;
  Tensor img({3, 3});
  img[4] = 1.0;  // centred impulse
  Tensor ker({1, 1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) ker[i] = static_cast<double>(i + 1);
  Var y = conv2d(tape.constant(img), tape.constant(ker), tape.constant(Tensor({1})));
  // Correlation of an impulse returns the kernel flipped.
  for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y.value()[i], ker[8 - i]);
}

TEST(Conv2d, ShapeErrors) {
  Tape tape;
  Var x = tape.constant(Tensor({2, 4, 4}));
  Var k = tape.constant(Tensor({1, 3, 3, 3}));
  Var b = tape.constant(Tensor({1}));
  EXPECT_THROW(conv2d(x, k, b), ShapeError);
  Var even = tape.constant(Tensor({1, 2, 2, 2}));
  EXPECT_THROW(conv2d(x, even, b), ShapeError);
}

TEST(Prelu, PositiveAndNegativeSlopes) {
  Tape tape;
  Var x = tape.constant(Tensor::from({-2, 0, 3}));
  Tensor y = prelu(x, tape.constant(Tensor::scalar(0.25))).value();
  EXPECT_EQ(y, Tensor::from({-0.5, 0, 3}));
}

TEST(GradCheck, ConvPreluChain) {
  Rng rng(7);
  std::vector<ParamBlock> params = {
      {"x", random_tensor({2, 5, 6}, rng)},
      {"k1", random_tensor({3, 2, 3, 3}, rng, 0.5)},
      {"b1", random_tensor({3}, rng)},
      {"a", Tensor::scalar(0.3)},
      {"k2", random_tensor({1, 3, 5, 3}, rng, 0.5)},
      {"b2", random_tensor({1}, rng)},
      {"s", Tensor::scalar(1.7)},
  };
  auto f = [](Tape& tape, const std::vector<Var>& p) {
    Var h = prelu(conv2d(p[0], p[1], p[2]), p[3]);
    Var o = reshape(conv2d(h, p[4], p[5]), {5, 6});
    Var t = sub(scalar_mul(p[6], o), tape.constant(Tensor({5, 6}, 0.1)));
    return sum_squares(t);
  };
  GradCheckReport r = grad_check(f, params, 1e-6, 1e-6);
  for (const auto& b : r.blocks) EXPECT_LE(b.max_rel_error, 1e-6) << b.name;
  EXPECT_TRUE(r.passed());
}

TEST(GradCheck, SumScalars) {
  std::vector<ParamBlock> params = {{"u", Tensor::from({1, -2})}, {"v", Tensor::from({0.5, 3, 1})}};
  auto f = [](Tape&, const std::vector<Var>& p) {
    return sum_scalars({sum_squares(p[0]), sum_squares(scale(p[1], 2.0))}, 0.5);
  };
  EXPECT_TRUE(grad_check(f, params).passed());
}

TEST(GradCheck, DetectsWrongGradient) {
  // A node whose backward deliberately doubles the true derivative.
  std::vector<ParamBlock> params = {{"x", Tensor::from({1.0, 2.0})}};
  auto f = [](Tape& tape, const std::vector<Var>& p) {
    Var y = tape.record("bad_identity", p[0].value(), {p[0].id}, [ix = p[0].id](Tape& t, std::size_t self) {
      t.grad(ix) += 2.0 * t.grad(self);
    });
    return sum_squares(y);
  };
  EXPECT_FALSE(grad_check(f, params).passed());
}

TEST(Rng, StateRoundTrip) {
  Rng a(42);
  a.normal();
  const std::string s = a.state();
  const double next = a.uniform();
  Rng b(0);
  b.restore(s);
  EXPECT_EQ(b.uniform(), next);
}

TEST(Rng, DeriveSeedSeparatesCoordinates) {
  EXPECT_NE(derive_seed(1, {0, 1}), derive_seed(1, {1, 0}));
  EXPECT_EQ(derive_seed(1, {3, 4}), derive_seed(1, {3, 4}));
}

TEST(Rng, IndexIsInRange) {
  Rng r(3);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(r.index(7), 7u);
}

}  // namespace
}  // namespace sgdnet
