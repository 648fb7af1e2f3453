#include "qfilt/model.hpp"

#include <cmath>
#include <sstream>

namespace qfilt {

double nbar_from_thermal(const ThermalParams& p) {
  const double x = p.beta * p.omega;
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::invalid_argument("nbar_from_thermal: beta*omega must be positive and finite");
  }
  // expm1 keeps precision for small beta*omega; large x underflows cleanly to 0.
  return 1.0 / std::expm1(x);
}

CMatrix sigma_minus() {
  CMatrix s = CMatrix::Zero(2, 2);
  s(0, 1) = 1.0;
  return s;
}

CMatrix sigma_plus() { return sigma_minus().adjoint(); }

CMatrix sigma_z() {
  CMatrix s = CMatrix::Zero(2, 2);
  s(0, 0) = -1.0;
  s(1, 1) = 1.0;
  return s;
}

CMatrix sigma_x() { return sigma_minus() + sigma_plus(); }

CMatrix projector_excited() {
  CMatrix p = CMatrix::Zero(2, 2);
  p(1, 1) = 1.0;
  return p;
}

CMatrix projector_ground() {
  CMatrix p = CMatrix::Zero(2, 2);
  p(0, 0) = 1.0;
  return p;
}

CVector plus_state() {
  CVector v(2);
  v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  return v;
}

CMatrix density_of(const CVector& psi) { return psi * psi.adjoint(); }

SystemModel build_detector(const DetectorPreset& p) {
  if (!(p.kappa > 0.0)) throw std::invalid_argument("build_detector: kappa must be > 0");
  const double nbar = p.thermal ? nbar_from_thermal(*p.thermal) : p.nbar;
  if (!(nbar >= 0.0)) throw std::invalid_argument("build_detector: nbar must be >= 0");
  SystemModel m;
  m.L = std::sqrt(p.kappa) * sigma_minus();
  m.H = p.omega * projector_excited();
  m.nbar = nbar;
  return m;
}

ModelDiagnostics validate(const SystemModel& m) {
  ModelDiagnostics d;
  d.dim = m.L.rows();
  d.nbar = m.nbar;
  d.hermiticity_defect = hermiticity_defect(m.H);
  auto add = [&](std::string field, std::string msg) {
    d.violations.push_back({std::move(field), std::move(msg)});
  };
  if (m.L.rows() == 0 || m.L.rows() != m.L.cols()) add("L", "must be square and non-empty");
  if (m.H.rows() != m.H.cols()) add("H", "must be square");
  if (m.H.rows() != m.L.rows()) add("H", "dimension differs from L");
  if (!all_finite(m.L)) add("L", "non-finite entries");
  if (!all_finite(m.H)) add("H", "non-finite entries");
  if (!(d.hermiticity_defect <= 1e-10)) {
    std::ostringstream os;
    os << "not Hermitian (defect " << d.hermiticity_defect << ")";
    add("H", os.str());
  }
  if (!(m.nbar >= 0.0) || !std::isfinite(m.nbar)) add("nbar", "must be finite and >= 0");
  return d;
}

void require_valid(const SystemModel& m) {
  const ModelDiagnostics d = validate(m);
  if (d.ok()) return;
  std::ostringstream os;
  os << "invalid model:";
  for (const auto& v : d.violations) os << " [" << v.field << ": " << v.message << "]";
  throw std::invalid_argument(os.str());
}

void require_state(const CMatrix& rho, Eigen::Index dim, const char* what, double tol) {
  if (rho.rows() != dim || rho.cols() != dim) {
    throw DimensionError(std::string(what) + ": state has wrong dimension");
  }
  if (!all_finite(rho) || !is_hermitian(rho, tol)) {
    throw std::invalid_argument(std::string(what) + ": state is not Hermitian");
  }
  if (std::abs(trace_re(rho) - 1.0) > tol) {
    throw std::invalid_argument(std::string(what) + ": state trace differs from 1");
  }
  if (min_eigenvalue(rho) < -tol) {
    throw std::invalid_argument(std::string(what) + ": state has a negative eigenvalue");
  }
}

}  // namespace qfilt
