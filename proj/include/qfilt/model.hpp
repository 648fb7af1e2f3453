#pragma once

#include "qfilt/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qfilt {

/// Open-system model: coupling L, Hamiltonian H (hbar = 1) and the thermal
/// occupation of the bath. nbar = 0 is the vacuum (Fock) bath.
///
/// L is not required to be an eigenoperator of the free dynamics; the
/// thermal construction assumes it is, and that is left to the caller.
struct SystemModel {
  CMatrix L;
  CMatrix H;
  double nbar = 0.0;

  Eigen::Index dim() const { return L.rows(); }
};

struct ThermalParams {
  double beta;   // inverse temperature
  double omega;  // transition frequency
};

/// Two-level (Unruh-DeWitt) detector: L = sqrt(kappa) sigma_-, H = omega sigma_+ sigma_-.
/// When `thermal` is set the occupation comes from it and `nbar` is ignored;
/// this lets an interaction-picture run (omega = 0) keep a physical bath.
struct DetectorPreset {
  double kappa = 1.0;
  double omega = 0.0;
  double nbar = 0.0;
  std::optional<ThermalParams> thermal;
};

/// Bose-Einstein occupation 1 / (exp(beta omega) - 1).
double nbar_from_thermal(const ThermalParams& p);

// Basis order is {g, e}: index 0 is the ground state.
CMatrix sigma_minus();
CMatrix sigma_plus();
CMatrix sigma_z();
CMatrix sigma_x();
CMatrix projector_excited();
CMatrix projector_ground();
CVector plus_state();
CMatrix density_of(const CVector& psi);

SystemModel build_detector(const DetectorPreset& p);

struct Violation {
  std::string field;
  std::string message;
};

struct ModelDiagnostics {
  Eigen::Index dim = 0;
  double hermiticity_defect = 0.0;
  double nbar = 0.0;
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

ModelDiagnostics validate(const SystemModel& m);

/// Throws std::invalid_argument listing every violation.
void require_valid(const SystemModel& m);

/// Checks that rho is a density matrix: Hermitian, |tr - 1| <= tol and
/// smallest eigenvalue >= -tol.
void require_state(const CMatrix& rho, Eigen::Index dim, const char* what, double tol = 1e-10);

}  // namespace qfilt
