#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ssvs {

// Modified Cholesky parameterization of a random-effect covariance:
//
//   Omega = Lambda * Gamma * Gamma' * Lambda'
//
// with Lambda = diag(lambda), lambda >= 0, and Gamma unit lower triangular.
// The q(q-1)/2 free entries of Gamma are packed row-major over the strict
// lower triangle: (1,0), (2,0), (2,1), (3,0), ... (0-based row, col).

inline std::size_t packed_size(int q) {
  return q <= 1 ? 0 : static_cast<std::size_t>(q) * static_cast<std::size_t>(q - 1) / 2;
}

// Position of gamma(row, col), row > col, in the packed vector.
inline std::size_t packed_index(int row, int col) {
  return static_cast<std::size_t>(row) * static_cast<std::size_t>(row - 1) / 2 +
         static_cast<std::size_t>(col);
}

struct CholeskyFactors {
  std::vector<double> lambda;
  std::vector<double> r;

  int dim() const { return static_cast<int>(lambda.size()); }
  // Unit lower-triangular Gamma built from the raw packed entries.
  Eigen::MatrixXd gamma() const;
};

// Indicator-masked factors. Whenever lambda[k] == 0, row k and column k of
// gamma are exactly zero apart from gamma(k, k) == 1.
struct EffectiveFactors {
  std::vector<double> lambda;
  Eigen::MatrixXd gamma;

  int dim() const { return static_cast<int>(lambda.size()); }
  bool active(int k) const { return lambda[static_cast<std::size_t>(k)] != 0.0; }
};

// lambda_eff = I .* lambda, then zero the Gamma row/column of every inactive
// effect. Raw values are untouched so the inclusion update stays reversible.
EffectiveFactors project_constraints(const CholeskyFactors& factors,
                                     std::span<const std::uint8_t> included);

// Omega = (Lambda Gamma)(Lambda Gamma)'. Only the lower triangle is computed;
// the upper triangle is a copy, so the result is bitwise symmetric.
Eigen::MatrixXd assemble_covariance(const EffectiveFactors& eff);

// Inverse of assemble_covariance for a symmetric PSD matrix. Rows whose
// diagonal is <= tol map to lambda_k = 0; the remaining block goes through a
// plain lower Cholesky whose rows are then scaled by 1 / lambda_u.
// Throws DecompositionError if omega is not symmetric PSD within tol, or is
// rank deficient in a way the parameterization cannot express.
CholeskyFactors decompose_covariance(const Eigen::MatrixXd& omega, double tol = 1e-12);

// rho_i = Lambda_eff Gamma_eff xi_i. Component k is exactly zero when effect k
// is inactive.
Eigen::VectorXd random_effect_vector(const EffectiveFactors& eff, std::span<const double> xi);

// Writes rho into `out` (size q) without allocating.
void random_effect_vector(const EffectiveFactors& eff, const double* xi, double* out);

}  // namespace ssvs
