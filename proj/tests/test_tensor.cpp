#include <doctest.h>

#include "drgrad/rng.hpp"
#include "drgrad/tensor.hpp"

using namespace drgrad;

TEST_CASE("axpy basics") {
  Vector x(2), y(2);
  x << 1, 2;
  y << 3, 4;
  CHECK(axpy(0.0, x, y) == y);  // bitwise
  Vector z(2);
  z << 0, 0;
  CHECK(axpy(1.0, x, z) == x);
  Vector a(2), b(2), want(2);
  a << 1, -1;
  b << 1, 1;
  want << 3, -1;
  CHECK(axpy(2.0, a, b) == want);
  Vector short1(1);
  CHECK_THROWS_AS(axpy(1.0, short1, y), DimensionError);
}

TEST_CASE("matvec basics") {
  Matrix eye = Matrix::Identity(2, 2);
  Vector x(2);
  x << 5, 7;
  CHECK(matvec(eye, x) == x);

  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Vector ones = Vector::Ones(2);
  Vector want(2);
  want << 3, 7;
  CHECK(matvec(a, ones) == want);

  CHECK(matvec(Matrix::Zero(2, 2), x) == Vector::Zero(2));
  CHECK_THROWS_AS(matvec(a, Vector::Ones(3)), DimensionError);
}

TEST_CASE("matvec linearity on random instances") {
  Rng rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix a(10, 10);
    Vector x(10), y(10);
    for (int i = 0; i < 10; ++i) {
      x[i] = rng.uniform(-1, 1);
      y[i] = rng.uniform(-1, 1);
      for (int j = 0; j < 10; ++j) a(i, j) = rng.uniform(-1, 1);
    }
    Vector lhs = matvec(a, Vector(x + y));
    Vector rhs = matvec(a, x) + matvec(a, y);
    CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("reduce_mean basics") {
  Vector v(2);
  v << 2, 4;
  CHECK(reduce_mean({v}) == v);

  Vector a(2), b(2), ones2 = Vector::Ones(2);
  a << 0, 0;
  b << 2, 2;
  CHECK(reduce_mean({a, b}) == ones2);

  Vector c(2), d(2), e(2);
  c << 1, 0;
  d << 0, 1;
  e << 2, 2;
  CHECK(reduce_mean({c, d, e}) == ones2);

  CHECK_THROWS_AS(reduce_mean({}), EmptyInputError);
}

TEST_CASE("reduce_mean of k copies stays put") {
  Rng rng(4);
  Vector v(7);
  for (int i = 0; i < 7; ++i) v[i] = rng.uniform(-3, 3);
  for (int k : {2, 5, 9}) {
    std::vector<Vector> copies(k, v);
    Vector m = reduce_mean(copies);
    for (int i = 0; i < 7; ++i)
      CHECK(std::abs(m[i] - v[i]) <= 1e-15 * std::abs(v[i]));
  }
}

TEST_CASE("operations are deterministic") {
  Rng rng(5);
  Matrix a(6, 6);
  Vector x(6);
  for (int i = 0; i < 6; ++i) {
    x[i] = rng.uniform(-1, 1);
    for (int j = 0; j < 6; ++j) a(i, j) = rng.uniform(-1, 1);
  }
  CHECK(matvec(a, x) == matvec(a, x));
  CHECK(reduce_mean({x, Vector(2 * x)}) == reduce_mean({x, Vector(2 * x)}));
}
