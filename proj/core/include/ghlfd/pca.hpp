#pragma once

#include <cstddef>
#include <vector>

#include "ghlfd/matrix.hpp"
#include "ghlfd/timeseries.hpp"

namespace ghlfd {

// Principal-subspace baseline: anomalies are samples far from the span of
// the leading components of normal data (Q statistic).
struct PcaDetector {
  NormStats norm;                    // normalization applied before fitting/scoring
  std::vector<double> center;        // column means of the fitted (normalized) data
  std::vector<double> eigenvalues;   // all m, descending
  Matrix basis;                      // k x m, orthonormal rows
  double explained_fraction = 0.0;   // retained share of total variance
  double threshold = 0.0;

  std::size_t components() const noexcept { return basis.rows(); }
};

// Eigendecomposition of the channel covariance; keeps the smallest k whose
// eigenvalues reach `variance_fraction` of the total. Throws NumericError on
// an all-constant input.
PcaDetector pca_fit(const TimeSeries& normalized, double variance_fraction);

// Squared residual of each sample after projection onto the retained subspace.
std::vector<double> pca_score(const PcaDetector& detector, const TimeSeries& normalized);

}  // namespace ghlfd
