#include <catch_amalgamated.hpp>

#include "qfilt/generators.hpp"
#include "qfilt/model.hpp"
#include "qfilt/oracle.hpp"

#include <cmath>

using namespace qfilt;
using Catch::Matchers::WithinAbs;

namespace {

SystemModel detector(double nbar, double omega = 0.0) {
  DetectorPreset p;
  p.omega = omega;
  p.nbar = nbar;
  return build_detector(p);
}

AncillaConfig config(AncillaBasis basis, int trunc = 4, double tau = 0.01) {
  AncillaConfig c;
  c.trunc = trunc;
  c.tau = tau;
  c.basis = basis;
  return c;
}

constexpr AncillaBasis kBases[] = {AncillaBasis::MeasurementAdapted, AncillaBasis::ArakiWoods};

Complex vacuum_element(const CMatrix& op) { return op(0, 0); }

// Channel of a single vacuum mode coupled through L (x) a^dag - L^dag (x) a.
CMatrix single_mode_channel(const SystemModel& m, int trunc, double tau, const CMatrix& rho) {
  const CMatrix a = ladder(trunc);
  const CMatrix gen = std::sqrt(tau) * (kron(m.L, a.adjoint()) - kron(m.L.adjoint(), a)) -
                      Complex(0.0, tau) * kron(m.H, identity(trunc));
  const CMatrix U = expm(gen);
  const Eigen::Index d = m.dim();
  CMatrix out = CMatrix::Zero(d, d);
  for (int j = 0; j < trunc; ++j) {
    CMatrix K(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) K(r, c) = U(r * trunc + j, c * trunc);
    out += K * rho * K.adjoint();
  }
  return out;
}

}  // namespace

TEST_CASE("ladder operator") {
  const CMatrix a = ladder(4);
  CHECK(a.rows() == 4);
  CHECK_THAT(a(0, 1).real(), WithinAbs(1.0, 0.0));
  CHECK_THAT(a(2, 3).real(), WithinAbs(std::sqrt(3.0), 1e-15));
  const CMatrix comm = a * a.adjoint() - a.adjoint() * a;
  for (int k = 0; k < 3; ++k) CHECK_THAT(comm(k, k).real(), WithinAbs(1.0, 1e-14));
  CHECK_THAT(comm(3, 3).real(), WithinAbs(-3.0, 1e-14));
}

TEST_CASE("ancilla configuration is validated") {
  CHECK_NOTHROW(require_valid(AncillaConfig{}));
  CHECK_THROWS(require_valid(config(AncillaBasis::MeasurementAdapted, 2)));
  CHECK_THROWS(require_valid(config(AncillaBasis::MeasurementAdapted, 4, 0.0)));
}

TEST_CASE("coupling at zero temperature is the first mode") {
  const CMatrix expected = kron(ladder(4), identity(4));
  for (auto basis : kBases) {
    CHECK(max_abs(coupling_b(config(basis), 0.0) - expected) < 1e-15);
  }
}

TEST_CASE("vacuum second moments follow the thermal table") {
  for (auto basis : kBases) {
    for (double n : {0.0, 0.5, 1.0, 3.0}) {
      const AncillaConfig c = config(basis);
      const CMatrix b = coupling_b(c, n);
      const CMatrix bp = coupling_b_prime(c, n);
      const CMatrix Q = ancilla_quadrature(c, n);
      const CMatrix Qp = bp + bp.adjoint();
      CHECK_THAT(vacuum_element(b.adjoint() * b).real(), WithinAbs(n, 1e-12));
      CHECK_THAT(vacuum_element(b * b.adjoint()).real(), WithinAbs(n + 1.0, 1e-12));
      CHECK(std::abs(vacuum_element(b * b)) < 1e-12);
      CHECK_THAT(vacuum_element(Q * Q).real(), WithinAbs(2 * n + 1, 1e-12));
      CHECK_THAT(vacuum_element(Qp * Qp).real(), WithinAbs(2 * n + 1, 1e-12));
      CHECK_THAT(vacuum_element(Q * Qp).real(), WithinAbs(2.0 * std::sqrt(n * (n + 1)), 1e-12));
      CHECK(std::abs(vacuum_element(Q)) < 1e-15);
    }
  }
}

TEST_CASE("measured quadratures commute") {
  for (auto basis : kBases) {
    for (double n : {0.0, 1.0, 2.5}) {
      const AncillaConfig c = config(basis, 5);
      const CMatrix bp = coupling_b_prime(c, n);
      const CMatrix Q = ancilla_quadrature(c, n);
      CHECK(max_abs(Q * (bp + bp.adjoint()) - (bp + bp.adjoint()) * Q) < 1e-12);
      CHECK(is_hermitian(Q, 1e-14));
    }
  }
}

TEST_CASE("outcome degeneracy depends on the truncation basis") {
  const SystemModel m = detector(1.0);
  const CollisionKernel adapted(m, config(AncillaBasis::MeasurementAdapted));
  const CollisionKernel araki(m, config(AncillaBasis::ArakiWoods));
  // adapted: Q acts on one mode only, so each outcome is trunc-fold degenerate
  CHECK(adapted.branches().size() == 4);
  for (const auto& br : adapted.branches()) CHECK(br.kraus.size() == 4);
  CHECK(araki.branches().size() > 4);
  const CollisionKernel vacuum(detector(0.0), config(AncillaBasis::ArakiWoods));
  CHECK(vacuum.branches().size() == 4);
}

TEST_CASE("collision unitary") {
  RngStream rng(1, 0);
  for (auto basis : kBases) {
    for (double n : {0.0, 1.0}) {
      const SystemModel m = detector(n, 0.7);
      const CMatrix U = step_unitary(m, config(basis));
      CHECK(max_abs(U.adjoint() * U - identity(static_cast<int>(U.rows()))) < 1e-9);
    }
    SystemModel free = detector(1.0, 0.0);
    free.L = CMatrix::Zero(2, 2);
    free.H = random_hermitian(2, rng);
    const CMatrix expected = kron(expm(Complex(0.0, -0.01) * free.H), identity(16));
    CHECK(max_abs(step_unitary(free, config(basis)) - expected) < 1e-13);
  }
}

TEST_CASE("averaged collision approaches the Lindblad step at second order") {
  RngStream rng(2, 0);
  for (auto basis : kBases) {
    for (double n : {0.0, 1.0}) {
      const SystemModel m = detector(n, 0.5);
      const CMatrix rho = random_density(2, rng);
      std::vector<double> residual;
      for (double tau : {0.02, 0.01}) {
        const CollisionKernel k(m, config(basis, 6, tau));
        residual.push_back(max_abs(k.unconditional(rho) - rho - tau * lindblad_schrodinger(m, rho)));
      }
      const double order = observed_order(residual[0], residual[1], 2.0);
      INFO("n = " << n << " residuals " << residual[0] << " " << residual[1]);
      CHECK(order_consistent(order, 2.0));
    }
  }
}

TEST_CASE("zero temperature kernel equals an independent single-mode collision") {
  RngStream rng(3, 0);
  const SystemModel m = detector(0.0, 0.9);
  for (auto basis : kBases) {
    const CollisionKernel k(m, config(basis, 5, 0.02));
    for (int i = 0; i < 5; ++i) {
      const CMatrix rho = random_density(2, rng);
      CHECK(max_abs(k.unconditional(rho) - single_mode_channel(m, 5, 0.02, rho)) < 1e-12);
    }
  }
}

TEST_CASE("outcome probabilities follow the Born rule") {
  RngStream rng(4, 0);
  for (auto basis : kBases) {
    for (double n : {0.0, 1.0, 3.0}) {
      const CollisionKernel k(detector(n, 0.3), config(basis));
      CHECK(k.completeness_defect() <= 1e-10);
      const CMatrix rho = random_density(2, rng);
      double total = 0.0;
      CMatrix averaged = CMatrix::Zero(2, 2);
      for (const auto& br : k.branches()) {
        const double p = trace_product_re(br.effect, rho);
        CHECK(p >= -1e-15);
        total += p;
        for (const auto& K : br.kraus) averaged += K * rho * K.adjoint();
      }
      CHECK_THAT(total, WithinAbs(1.0, 1e-10));
      CHECK(max_abs(averaged - k.unconditional(rho)) < 1e-12);
    }
  }
}

TEST_CASE("uncoupled outcomes carry the thermal vacuum variance") {
  for (auto basis : kBases) {
    for (double n : {0.0, 1.0, 3.0}) {
      SystemModel m = detector(n);
      m.L = CMatrix::Zero(2, 2);
      const CollisionKernel k(m, config(basis));
      const CMatrix rho = density_of(plus_state());
      double mean = 0.0;
      double second = 0.0;
      for (const auto& br : k.branches()) {
        const double p = trace_product_re(br.effect, rho);
        mean += p * br.q;
        second += p * br.q * br.q;
      }
      CHECK(std::abs(mean) < 1e-12);
      CHECK_THAT(second, WithinAbs(2 * n + 1, 1e-10));
    }
  }
}

TEST_CASE("oracle trajectories stay physical") {
  RngStream rng(5, 0);
  const SystemModel m = detector(1.0);
  const CollisionKernel k(m, config(AncillaBasis::MeasurementAdapted));
  CHECK(k.leakage() <= 1e-4);
  const OracleTrajectory t = oracle_trajectory(k, projector_excited(), 200, rng);
  REQUIRE(t.outcomes.size() == 200);
  REQUIRE(t.states.size() == 201);
  CHECK(t.max_probability_sum_defect <= 1e-10);
  CHECK(t.min_state_eigenvalue >= -1e-10);
  for (const auto& s : t.states) CHECK_THAT(trace_re(s), WithinAbs(1.0, 1e-12));
  for (double p : t.probabilities) CHECK(p > 0.0);

  const MeasurementRecord r = t.record();
  CHECK(r.dt == 0.01);
  REQUIRE(r.steps() == 200);
  for (std::size_t i = 0; i < r.steps(); ++i) CHECK_THAT(r.dY[i], WithinAbs(0.1 * t.outcomes[i], 1e-15));
}

TEST_CASE("oracle trajectories are reproducible") {
  const SystemModel m = detector(1.0);
  RngStream a(6, 0);
  RngStream b(6, 0);
  const auto ta = oracle_trajectory(m, config(AncillaBasis::MeasurementAdapted), projector_excited(), 50, a);
  const auto tb = oracle_trajectory(m, config(AncillaBasis::MeasurementAdapted), projector_excited(), 50, b);
  CHECK(ta.outcomes == tb.outcomes);
  CHECK(ta.states.back() == tb.states.back());
}

TEST_CASE("observed order arithmetic") {
  CHECK_THAT(observed_order(4.0, 1.0, 2.0), WithinAbs(2.0, 1e-15));
  CHECK_THAT(observed_order(2.0, 1.0, 4.0), WithinAbs(0.5, 1e-15));
  CHECK(observed_order(0.0, 1.0, 2.0) == 0.0);
  CHECK(order_consistent(0.75, 1.0));
  CHECK(order_consistent(1.25, 1.0));
  CHECK_FALSE(order_consistent(0.74, 1.0));
  CHECK_FALSE(order_consistent(1.26, 1.0));
}

TEST_CASE("reference process matches the collision expectation at first order") {
  const SystemModel m = detector(1.0);
  const ReferenceProcessStudy s =
      reference_process_study(m, config(AncillaBasis::MeasurementAdapted, 4, 0.02), sigma_z(), projector_excited(),
                              0.2, 3);
  REQUIRE(s.runs.size() == 3);
  REQUIRE(s.observed_orders.size() == 2);
  for (double o : s.observed_orders) CHECK(order_consistent(o, 1.0));
}
