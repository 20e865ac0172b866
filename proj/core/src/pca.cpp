#include "ghlfd/pca.hpp"

#include <algorithm>

#include <Eigen/Dense>

#include "ghlfd/errors.hpp"

namespace ghlfd {

PcaDetector pca_fit(const TimeSeries& normalized, double variance_fraction) {
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw ConfigError("pca_fit: variance fraction must lie in (0, 1]");
  const std::size_t n = normalized.length();
  const std::size_t m = normalized.width();
  if (n < 2 || m == 0) throw DataError("pca_fit: need at least 2 samples and 1 channel");

  const auto& v = normalized.values();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < m; ++c) x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = v(t, c);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_fit: eigendecomposition failed");
  // Eigen returns ascending order.
  const Eigen::VectorXd vals = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vecs = solver.eigenvectors().rowwise().reverse();
  const double total = vals.cwiseMax(0.0).sum();
  // Centering leaves rounding residue on constant columns; judge against the data scale.
  const double scale = std::max(1.0, mean.squaredNorm());
  if (!(total > 1e-14 * scale)) throw NumericError("pca_fit: degenerate covariance (all channels constant)");

  PcaDetector det;
  det.center.assign(mean.data(), mean.data() + m);
  det.eigenvalues.assign(vals.data(), vals.data() + m);
  std::size_t k = 0;
  double kept = 0.0;
  while (k < m) {
    kept += std::max(vals[static_cast<Eigen::Index>(k)], 0.0);
    ++k;
    if (kept >= variance_fraction * total * (1.0 - 1e-12)) break;
  }
  det.explained_fraction = kept / total;
  det.basis = Matrix(k, m);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < m; ++c)
      det.basis(r, c) = vecs(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
  return det;
}

std::vector<double> pca_score(const PcaDetector& det, const TimeSeries& normalized) {
  const std::size_t m = det.center.size();
  if (normalized.width() != m) {
    throw DataError("pca_score: series has " + std::to_string(normalized.width()) + " channels, detector expects " +
                    std::to_string(m));
  }
  const std::size_t k = det.components();
  std::vector<double> out(normalized.length());
  std::vector<double> centered(m), coef(k);
  for (std::size_t t = 0; t < normalized.length(); ++t) {
    const auto row = normalized.values().row(t);
    for (std::size_t c = 0; c < m; ++c) centered[c] = row[c] - det.center[c];
    for (std::size_t r = 0; r < k; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < m; ++c) acc += det.basis(r, c) * centered[c];
      coef[r] = acc;
    }
    double q = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double recon = 0.0;
      for (std::size_t r = 0; r < k; ++r) recon += coef[r] * det.basis(r, c);
      const double d = centered[c] - recon;
      q += d * d;
    }
    out[t] = q;
  }
  return out;
}

}  // namespace ghlfd
