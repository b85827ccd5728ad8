#pragma once

#include <string>

#include "tailprob/measures.hpp"
#include "tailprob/swe.hpp"

namespace tailprob::source {

/// Linear map from slip magnitudes to a bathymetry perturbation: columns are
/// continuous piecewise-linear basis functions O_i sampled on the mesh nodes
/// (meters of floor displacement per meter of slip).
struct SlipBasis {
  enum class Provenance { AnalyticSurrogate, File };
  Mat columns;  // (elements+1) x n_patches
  Provenance provenance;
  int patches() const { return static_cast<int>(columns.cols()); }
  /// Per-element slopes of column i; the forward problem sees the basis only
  /// through these.
  Vec column_slopes(const swe::Mesh& mesh, int i) const;
};

/// Centered Gaussian slip prior with covariance std^2 * I.
struct SlipPrior {
  SlipPrior(int patches, double std_dev);
  measures::GaussianMeasure measure;
  double std_dev;
};

/// B = B0 + sum_i s_i O_i, nodally.
swe::Bathymetry bathymetry_from_slips(const SlipBasis& basis, const Vec& slips,
                                      const swe::Bathymetry& reference,
                                      const swe::Mesh& mesh);

/// (1/2) S^T C_s^{-1} S.
double slip_rate(const SlipPrior& prior, const Vec& slips);
Vec slip_rate_grad(const SlipPrior& prior, const Vec& slips);

struct SurrogateParams {
  double segment_start;    // m, shoreward end of the slip segment projection
  double segment_end;      // m
  int patches = 20;
  double peak = 0.25;      // max |O_i|, m of uplift per m of slip
  double width_factor = 2.0;  // dipole width = width_factor * patch spacing
};

/// Analytic dipole surrogate for the elastic response of one slip patch:
/// O_i(x) = A tau exp(-tau^2/2), tau = (x - x_i)/w, centered at equispaced
/// points along the segment. Each column is odd about its center, so it
/// integrates to zero, and neighboring columns are translates of each other.
SlipBasis analytic_surrogate_basis(const swe::Mesh& mesh, const SurrogateParams& params);

/// Evaluates the surrogate dipole profile for patch i at position x.
double surrogate_profile(const SurrogateParams& params, int i, double x);

/// CSV with header x,O_1,...,O_n; linearly interpolated onto mesh nodes.
/// The zero-mean check is a warning (stderr) for external data.
SlipBasis load_basis_from_file(const std::string& path, const swe::Mesh& mesh);

void save_basis_csv(const SlipBasis& basis, const swe::Mesh& mesh, const std::string& path);

}  // namespace tailprob::source
