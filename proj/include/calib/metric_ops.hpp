#pragma once

#include <vector>

#include "calib/comass.hpp"
#include "calib/exterior.hpp"

namespace calib {

/// f * g; with comass this realizes |phi|*_{f g} = f^{-m/2} |phi|*_g.
MetricPoint scale_metric(const MetricPoint& g, double f);

/// a*g1 + b*g2, SPD by construction.
MetricPoint glue_metrics(double a, const MetricPoint& g1, double b,
                         const MetricPoint& g2);

/// Harvey-Lawson decomposition of (phi, xi): the unique oriented complement
/// W to span(xi) such that phi, written in the adapted dual basis
/// (v_1..v_p, w_1..w_{n-p}), is v*_1^..^v*_p + residual where every
/// residual index set contains at most p-2 indices from {1..p}.
///
/// phi is normalized internally by theta = eval(phi, xi)/gram_norm(xi, g)
/// (the conformal route for pairings != 1); the residual refers to the
/// normalized form. theta must be positive.
struct HlDecomposition {
  Frame w;                      // complement frame, oriented with xi
  AltForm residual;             // coefficients in the adapted dual basis
  double theta;                 // original pairing value
  Eigen::MatrixXd adapted_basis;  // [v | w], v g-orthonormal in span(xi)
};
HlDecomposition hl_decompose(const AltForm& phi, const Frame& xi,
                             const MetricPoint& g,
                             const Eigen::MatrixXd* initial_complement = nullptr);

/// Adapted metric <.,.>_V + C^2 <.,.>_W built on the decomposition above.
/// Requires C^2 > binom(n,p) * comass(phi, h).upper / theta where h is the
/// block inner product with V perpendicular to W; throws NumericalError
/// carrying the minimal admissible C otherwise. Under the result the comass
/// of phi equals theta and xi is the witness.
MetricPoint hl_metric(const AltForm& phi, const Frame& xi,
                      const MetricPoint& g, double c);

/// Tangent-space model of a disk-bundle point: unit tangent vectors
/// e_i = sin(t_i) a_i + cos(t_i) b_i with b_i fiber directions, and the
/// pullback of the zero-section volume form through the bundle projection.
/// Needs one distinct fiber direction per angle below pi/2.
struct BundlePointModel {
  AltForm phi;          // pullback pi* omega at the point
  MetricPoint g;        // ambient inner product (identity in the model)
  Frame tangent_frame;  // e_1 .. e_m
};
BundlePointModel bundle_point_model(const std::vector<double>& angles,
                                    int horizontal_dim, int fiber_dim);

/// Block-diagonal weight transform g_i -> f^{exponent_i} g_i. Reports the
/// induced factor on the volume form of each coordinate block and of the
/// full space. If require_volume_preserving, the weighted exponent sum must
/// vanish. Off-block entries of g must be zero.
struct SplitWeightResult {
  MetricPoint metric;
  std::vector<double> block_volume_factors;
  double total_volume_factor;
};
SplitWeightResult split_weight_transform(const MetricPoint& g,
                                         const std::vector<int>& block_dims,
                                         const std::vector<double>& exponents,
                                         double f,
                                         bool require_volume_preserving = false);

/// Convenience: assemble the block-diagonal metric from explicit blocks.
SplitWeightResult split_weight_transform(
    const std::vector<std::pair<MetricPoint, double>>& blocks, double f,
    bool require_volume_preserving = false);

}  // namespace calib
