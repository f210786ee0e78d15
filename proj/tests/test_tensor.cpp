#include <doctest.h>

#include "msds/interp.hpp"
#include "msds/tensor.hpp"

using namespace msds;

TEST_CASE("tensor shape and indexing") {
  Tensor4<float> t(2, 3, 4, 5);
  CHECK(t.size() == 120);
  CHECK(t.array().abs().sum() == 0.0f);
  t(1, 2, 3, 4) = 7.0f;
  CHECK(t.array()[t.size() - 1] == 7.0f);
  t(0, 0, 0, 1) = 3.0f;
  CHECK(t.array()[1] == 3.0f);

  auto plane = t.plane(1, 2);
  CHECK(plane.size() == 20);
  CHECK(plane[19] == 7.0f);
}

TEST_CASE("tensor plane views alias storage") {
  Tensor4<double> t(1, 2, 2, 2);
  t.plane(0, 1).setConstant(4.0);
  CHECK(t(0, 1, 0, 0) == 4.0);
  CHECK(t(0, 0, 0, 0) == 0.0);
  CHECK(t.item(0).sum() == 16.0);
}

TEST_CASE("all_finite flags NaN and infinity") {
  Tensor4<double> t(1, 1, 2, 2);
  CHECK(t.all_finite());
  t(0, 0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  t(0, 0, 0, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("bilinear axis align-corners endpoints") {
  const auto coeffs = bilinear_axis(2, 4);
  CHECK(coeffs[0].lo == 0);
  CHECK(coeffs[0].t == doctest::Approx(0.0));
  CHECK(coeffs[3].hi == 1);
  CHECK(coeffs[3].t == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(coeffs[1].t == doctest::Approx(1.0 / 3.0));

  const auto single = bilinear_axis(5, 1);
  CHECK(single[0].lo == 0);
  CHECK(single[0].t == 0.0);
}
