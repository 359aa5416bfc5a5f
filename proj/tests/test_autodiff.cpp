#include <doctest.h>

#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "gridrl/autodiff.hpp"
#include "gridrl/checkpoint.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/optim.hpp"

using namespace gridrl;
using namespace gridrl::ad;
using doctest::Approx;

TEST_SUITE("autodiff") {

TEST_CASE("analytic gradients") {
  Matrix x(1, 1);
  x << 2.0;
  {
    Tape tape;
    const auto g = grad(tape, sum(relu(tape.parameter(x))), std::vector<const Matrix*>{&x});
    CHECK(g[0](0, 0) == 1.0);
  }
  Matrix v(3, 1);
  v << 1.0, 2.0, 3.0;
  Tape tape;
  const Var p = tape.parameter(v);
  const auto g = grad(tape, mean(mul(p, p)), std::vector<const Matrix*>{&v});
  CHECK(g[0](0, 0) == Approx(2.0 / 3.0));
  CHECK(g[0](1, 0) == Approx(4.0 / 3.0));
  CHECK(g[0](2, 0) == Approx(2.0));
}

TEST_CASE("shared parameter accumulates") {
  Matrix w(1, 1);
  w << 3.0;
  Tape tape;
  const Var a = tape.parameter(w);
  const Var b = tape.parameter(w);
  CHECK(a.id() == b.id());
  tape.backward(sum(mul(a, b)));
  CHECK(tape.gradient_of(w)(0, 0) == Approx(6.0));
  Matrix unused(2, 2);
  CHECK(tape.gradient_of(unused).isZero());
}

TEST_CASE("non-scalar loss is rejected") {
  Matrix v = Matrix::Ones(2, 2);
  Tape tape;
  CHECK_THROWS_AS(tape.backward(tape.parameter(v)), UsageError);
}

TEST_CASE("masked softmax") {
  std::mt19937_64 rng(1);
  const Matrix x = gradcheck::random_matrix(4, 6, rng, -3.0, 3.0);
  Mask m = Mask::Constant(4, 6, true);
  m(0, 2) = m(1, 0) = m(1, 5) = false;
  const Matrix p = masked_softmax(x, m);
  for (Index r = 0; r < 4; ++r) CHECK(p.row(r).sum() == Approx(1.0).epsilon(1e-12));
  CHECK(p(0, 2) == 0.0);
  CHECK(p(1, 5) == 0.0);
  const Matrix lp = masked_log_softmax(x, m);
  CHECK((lp.array().exp() * m.cast<double>() - p.array()).abs().maxCoeff() < 1e-12);

  Matrix shifted = x;
  shifted.row(2).array() += 100.0;
  CHECK((masked_softmax(shifted, m) - p).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("segment softmax sums per segment") {
  Matrix logits(5, 1);
  logits << 0.1, -2.0, 3.0, 0.5, 0.0;
  const std::vector<int> seg{0, 2, 0, 2, 1};
  const Matrix a = segment_softmax(logits, seg, 4);
  CHECK(a(0, 0) + a(2, 0) == Approx(1.0));
  CHECK(a(1, 0) + a(3, 0) == Approx(1.0));
  CHECK(a(4, 0) == 1.0);
}

TEST_CASE("gather and scatter are adjoint") {
  std::mt19937_64 rng(2);
  const Matrix x = gradcheck::random_matrix(5, 3, rng);
  const Matrix y = gradcheck::random_matrix(7, 3, rng);
  const std::vector<int> idx{4, 0, 0, 2, 4, 1, 3};
  const double lhs = (gather_rows(x, idx).array() * y.array()).sum();
  const double rhs = (x.array() * scatter_add_rows(y, idx, 5).array()).sum();
  CHECK(lhs == Approx(rhs).epsilon(1e-12));
}

TEST_CASE("broadcast shape errors") {
  CHECK_THROWS_AS(add(Matrix::Ones(2, 3), Matrix::Ones(2, 2)), ShapeError);
  CHECK_THROWS_AS(matmul(Matrix::Ones(2, 3), Matrix::Ones(2, 3)), ShapeError);
}

TEST_CASE("primitives pass finite differences") {
  std::mt19937_64 rng(3);
  for (const auto& name : gradcheck::primitive_names()) {
    CAPTURE(name);
    for (int k = 0; k < 3; ++k) CHECK(gradcheck::primitive_error(name, rng) <= 1e-4);
  }
}

TEST_CASE("two-layer MLP passes finite differences") {
  std::mt19937_64 rng(4);
  Matrix x = gradcheck::random_matrix(6, 4, rng);
  Matrix w1 = glorot_uniform(4, 8, rng), b1 = gradcheck::random_matrix(1, 8, rng);
  Matrix w2 = glorot_uniform(8, 2, rng), b2 = gradcheck::random_matrix(1, 2, rng);
  const Matrix target = gradcheck::random_matrix(6, 2, rng);
  std::vector<Matrix*> params{&w1, &b1, &w2, &b2, &x};
  const double err = gradcheck::max_relative_error(params, [&](Tape& t) {
    const Var h = leaky_relu(add(matmul(t.parameter(x), t.parameter(w1)), t.parameter(b1)));
    const Var y = add(matmul(h, t.parameter(w2)), t.parameter(b2));
    return mean(square(sub(y, t.constant(target))));
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("adam") {
  Matrix p = Matrix::Zero(1, 1);
  std::vector<Matrix*> ptrs{&p};
  SUBCASE("first step moves by lr") {
    AdamState s;
    s.lr = 0.1;
    std::vector<Matrix> g{Matrix::Ones(1, 1)};
    adam_step(ptrs, g, s);
    CHECK(p(0, 0) == Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("zero gradient keeps parameters") {
    p(0, 0) = 0.7;
    AdamState s;
    std::vector<Matrix> g{Matrix::Zero(1, 1)};
    for (int i = 0; i < 3; ++i) adam_step(ptrs, g, s);
    CHECK(p(0, 0) == 0.7);
  }
  SUBCASE("deterministic") {
    Matrix q = Matrix::Zero(1, 1);
    std::vector<Matrix*> qptrs{&q};
    AdamState s1, s2;
    std::vector<Matrix> g{Matrix::Constant(1, 1, 0.3)};
    for (int i = 0; i < 4; ++i) {
      adam_step(ptrs, g, s1);
      adam_step(qptrs, g, s2);
    }
    CHECK(p(0, 0) == q(0, 0));
  }
  SUBCASE("shape mismatch") {
    AdamState s;
    std::vector<Matrix> g{Matrix::Zero(2, 1)};
    CHECK_THROWS_AS(adam_step(ptrs, g, s), ShapeError);
  }
}

TEST_CASE("gradient clipping") {
  std::vector<Matrix> g{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  CHECK(clip_grad_norm(g, 1.0) == Approx(5.0));
  CHECK(g[0](0, 0) == Approx(0.6));
  CHECK(g[1](0, 0) == Approx(0.8));
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(5);
  Matrix a = glorot_uniform(3, 4, rng), b = glorot_uniform(1, 2, rng);
  ParamList list{{"a", &a}, {"b", &b}};
  const auto stem = std::filesystem::temp_directory_path() / "gridrl_ckpt_test";
  save_checkpoint(stem, list, {{"note", "x"}});
  CHECK(checkpoint_exists(stem));
  CHECK(read_checkpoint_meta(stem)["note"] == "x");
  Matrix a2 = Matrix::Zero(3, 4), b2 = Matrix::Zero(1, 2);
  ParamList back{{"a", &a2}, {"b", &b2}};
  load_checkpoint(stem, back);
  CHECK(a2 == a);
  CHECK(b2 == b);
  CHECK(checksum(back) == checksum(list));
  Matrix wrong = Matrix::Zero(2, 2);
  ParamList bad{{"a", &wrong}};
  CHECK_THROWS(load_checkpoint(stem, bad));
  CHECK_THROWS_AS(load_checkpoint(stem.string() + "_missing", back), MissingArtifactError);
  std::filesystem::remove(stem.string() + ".json");
  std::filesystem::remove(stem.string() + ".bin");
}

}
