#include <catch_amalgamated.hpp>

#include "qfilt/model.hpp"

#include <cmath>

using namespace qfilt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("thermal occupation closed forms") {
  CHECK_THAT(nbar_from_thermal({std::log(2.0), 1.0}), WithinRel(1.0, 1e-14));
  // 1 / (e - 1)
  CHECK_THAT(nbar_from_thermal({1.0, 1.0}), WithinRel(0.58197670686932642, 1e-14));
  CHECK_THAT(nbar_from_thermal({2.0, 0.5}), WithinRel(0.58197670686932642, 1e-14));
  CHECK(nbar_from_thermal({800.0, 1.0}) == 0.0);
  CHECK(nbar_from_thermal({40.0, 1.0}) < 1e-17);
  CHECK_THROWS_AS(nbar_from_thermal({0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(nbar_from_thermal({-1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("thermal occupation is strictly decreasing in beta * omega") {
  double prev = INFINITY;
  for (double x = 0.01; x < 30.0; x *= 1.3) {
    const double n = nbar_from_thermal({x, 1.0});
    CHECK(n < prev);
    prev = n;
  }
}

TEST_CASE("detector preset") {
  const SystemModel m = build_detector({});
  CHECK(m.dim() == 2);
  CHECK(max_abs(m.L - sigma_minus()) == 0.0);
  CHECK(max_abs(m.H) == 0.0);
  CHECK(m.nbar == 0.0);
  // sigma_- = |g><e| with g = 0, e = 1
  CHECK(m.L(0, 1) == Complex(1.0));

  DetectorPreset p;
  p.kappa = 4.0;
  CHECK(max_abs(build_detector(p).L - 2.0 * sigma_minus()) < 1e-15);

  p = {};
  p.omega = 2.0;
  const SystemModel w = build_detector(p);
  CHECK(w.H(0, 0) == Complex(0.0));
  CHECK(w.H(1, 1) == Complex(2.0));
  CHECK(is_hermitian(w.H, 0.0));

  p = {};
  p.kappa = 0.0;
  CHECK_THROWS_AS(build_detector(p), std::invalid_argument);
  p = {};
  p.nbar = -0.5;
  CHECK_THROWS_AS(build_detector(p), std::invalid_argument);
}

TEST_CASE("detector preset takes its occupation from thermal parameters when given") {
  DetectorPreset p;
  p.nbar = 7.0;
  p.thermal = ThermalParams{std::log(2.0), 1.0};
  CHECK_THAT(build_detector(p).nbar, WithinRel(1.0, 1e-14));
}

TEST_CASE("validate reports structured violations") {
  for (double kappa : {0.1, 1.0, 9.0}) {
    for (double omega : {-1.0, 0.0, 3.0}) {
      DetectorPreset p;
      p.kappa = kappa;
      p.omega = omega;
      p.nbar = 0.3;
      CHECK(validate(build_detector(p)).ok());
    }
  }

  SystemModel bad = build_detector({});
  bad.H = sigma_plus();
  auto d = validate(bad);
  REQUIRE(d.violations.size() == 1);
  CHECK(d.violations[0].field == "H");
  CHECK_THAT(d.hermiticity_defect, WithinAbs(1.0, 0.0));

  bad = build_detector({});
  bad.nbar = -0.1;
  d = validate(bad);
  REQUIRE(d.violations.size() == 1);
  CHECK(d.violations[0].field == "nbar");
  CHECK_THROWS_AS(require_valid(bad), std::invalid_argument);

  bad = build_detector({});
  bad.H = CMatrix::Zero(3, 3);
  CHECK_FALSE(validate(bad).ok());
}

TEST_CASE("state checks") {
  CHECK_NOTHROW(require_state(projector_excited(), 2, "rho"));
  CHECK_NOTHROW(require_state(density_of(plus_state()), 2, "rho"));
  CHECK_THROWS_AS(require_state(projector_excited(), 3, "rho"), DimensionError);
  CHECK_THROWS_AS(require_state(2.0 * projector_excited(), 2, "rho"), std::invalid_argument);
  CMatrix neg = CMatrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  CHECK_THROWS_AS(require_state(neg, 2, "rho"), std::invalid_argument);
  CHECK_THROWS_AS(require_state(sigma_plus() + identity(2) / 2.0, 2, "rho"), std::invalid_argument);
}

TEST_CASE("operator conventions") {
  CHECK(max_abs(sigma_plus() * sigma_minus() - projector_excited()) == 0.0);
  CHECK(max_abs(sigma_minus() * sigma_plus() - projector_ground()) == 0.0);
  CHECK(max_abs(sigma_z() - (projector_excited() - projector_ground())) == 0.0);
  CHECK(max_abs(sigma_x() - (sigma_plus() + sigma_minus())) == 0.0);
  const CMatrix plus = density_of(plus_state());
  CHECK_THAT(trace_product_re(plus, sigma_x()), WithinAbs(1.0, 1e-15));
}
