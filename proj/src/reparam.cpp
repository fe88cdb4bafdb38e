#include "ssvs/reparam.hpp"

#include <cmath>
#include <string>

#include "ssvs/error.hpp"

namespace ssvs {

Eigen::MatrixXd CholeskyFactors::gamma() const {
  const int q = dim();
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(q, q);
  for (int row = 1; row < q; ++row) {
    for (int col = 0; col < row; ++col) g(row, col) = r[packed_index(row, col)];
  }
  return g;
}

EffectiveFactors project_constraints(const CholeskyFactors& factors,
                                     std::span<const std::uint8_t> included) {
  const int q = factors.dim();
  if (static_cast<int>(included.size()) != q || factors.r.size() != packed_size(q)) {
    throw ConfigError("project_constraints: dimension mismatch");
  }
  EffectiveFactors eff;
  eff.lambda.resize(static_cast<std::size_t>(q));
  for (int k = 0; k < q; ++k) {
    eff.lambda[k] = included[k] != 0 ? factors.lambda[k] : 0.0;
  }
  eff.gamma = Eigen::MatrixXd::Identity(q, q);
  for (int row = 1; row < q; ++row) {
    if (eff.lambda[row] == 0.0) continue;
    for (int col = 0; col < row; ++col) {
      if (eff.lambda[col] == 0.0) continue;
      eff.gamma(row, col) = factors.r[packed_index(row, col)];
    }
  }
  return eff;
}

Eigen::MatrixXd assemble_covariance(const EffectiveFactors& eff) {
  const int q = eff.dim();
  // M = Lambda Gamma is lower triangular.
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, q);
  for (int row = 0; row < q; ++row) {
    for (int col = 0; col <= row; ++col) m(row, col) = eff.lambda[row] * eff.gamma(row, col);
  }
  Eigen::MatrixXd omega(q, q);
  for (int row = 0; row < q; ++row) {
    for (int col = 0; col <= row; ++col) {
      double acc = 0.0;
      for (int t = 0; t <= col; ++t) acc += m(row, t) * m(col, t);
      omega(row, col) = acc;
      omega(col, row) = acc;
    }
  }
  return omega;
}

CholeskyFactors decompose_covariance(const Eigen::MatrixXd& omega, double tol) {
  const int q = static_cast<int>(omega.rows());
  if (omega.cols() != q) throw DecompositionError("decompose_covariance: matrix is not square");
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < i; ++j) {
      if (!(std::fabs(omega(i, j) - omega(j, i)) <= tol)) {
        throw DecompositionError("decompose_covariance: matrix is not symmetric");
      }
    }
  }

  std::vector<bool> zero_row(static_cast<std::size_t>(q), false);
  for (int k = 0; k < q; ++k) {
    if (omega(k, k) < -tol) {
      throw DecompositionError("decompose_covariance: negative diagonal at " + std::to_string(k));
    }
    if (omega(k, k) <= tol) {
      zero_row[k] = true;
      for (int j = 0; j < q; ++j) {
        if (std::fabs(omega(k, j)) > tol) {
          throw DecompositionError("decompose_covariance: zero variance with nonzero covariance in row " +
                                   std::to_string(k));
        }
      }
    }
  }

  // Cholesky-Banachiewicz restricted to the active rows.
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    if (zero_row[i]) continue;
    for (int j = 0; j <= i; ++j) {
      if (zero_row[j]) continue;
      double sum = omega(i, j);
      for (int t = 0; t < j; ++t) sum -= chol(i, t) * chol(j, t);
      if (i == j) {
        if (sum <= tol) {
          throw DecompositionError(
              "decompose_covariance: matrix is not positive definite on its support (pivot " +
              std::to_string(i) + ")");
        }
        chol(i, i) = std::sqrt(sum);
      } else {
        chol(i, j) = sum / chol(j, j);
      }
    }
  }

  CholeskyFactors factors;
  factors.lambda.assign(static_cast<std::size_t>(q), 0.0);
  factors.r.assign(packed_size(q), 0.0);
  for (int u = 0; u < q; ++u) {
    if (zero_row[u]) continue;
    factors.lambda[u] = chol(u, u);
    for (int v = 0; v < u; ++v) {
      if (!zero_row[v]) factors.r[packed_index(u, v)] = chol(u, v) / chol(u, u);
    }
  }
  return factors;
}

void random_effect_vector(const EffectiveFactors& eff, const double* xi, double* out) {
  const int q = eff.dim();
  for (int k = 0; k < q; ++k) {
    const double lam = eff.lambda[k];
    if (lam == 0.0) {
      out[k] = 0.0;
      continue;
    }
    double acc = xi[k];
    for (int t = 0; t < k; ++t) acc += eff.gamma(k, t) * xi[t];
    out[k] = lam * acc;
  }
}

Eigen::VectorXd random_effect_vector(const EffectiveFactors& eff, std::span<const double> xi) {
  if (static_cast<int>(xi.size()) != eff.dim()) {
    throw ConfigError("random_effect_vector: dimension mismatch");
  }
  Eigen::VectorXd rho(eff.dim());
  random_effect_vector(eff, xi.data(), rho.data());
  return rho;
}

}  // namespace ssvs
