#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "calib/exterior.hpp"

namespace calib {

/// Bracketed comass value with a witness frame. The witness reproduces the
/// lower bound: eval(phi, witness) / gram_norm(witness, g) == lower to 1e-9.
/// upper is a certificate (coefficient l1 norm in a g-orthonormal basis,
/// valid by the triangle inequality; equals lower for exact engines).
struct ComassEstimate {
  double lower = 0.0;
  double upper = 0.0;
  Frame witness;
  std::string method;  // "exact", "ascent", "bruteforce"
  long evaluations = 0;

  ComassEstimate() : witness(Frame::empty(2)) {}
};

/// l1 norm of the coefficients in the Cholesky g-orthonormal basis; always
/// an upper bound for the comass, tight on axis forms.
double comass_upper_l1(const AltForm& phi, const MetricPoint& g);

/// Closed-form comass for p in {0, 1, 2, n-2, n-1, n}. Degree 1 is the
/// g-dual norm; degree 2 goes through the skew canonical (block) form in
/// g-orthonormal coordinates; n-1 and n-2 reduce through the Hodge star,
/// which preserves comass. Unsupported degrees return nullopt.
std::optional<ComassEstimate> comass_exact(const AltForm& phi,
                                           const MetricPoint& g);

/// Best value over `samples` random orthonormal frames; deterministic per
/// seed and independent of thread count.
ComassEstimate comass_bruteforce(const AltForm& phi, const MetricPoint& g,
                                 long samples, std::uint64_t seed);

/// Multistart projected-gradient ascent over g-orthonormal frames (Stiefel
/// points, QR retraction, backtracking line search). Terminates a start when
/// the projected gradient norm drops below tol or after 1e4 iterations.
/// Non-converged starts are recorded; all starts failing throws.
struct AscentOptions {
  int starts = 32;
  double tol = 1e-9;
  std::uint64_t seed = 0;
  int max_iterations = 10000;
};
ComassEstimate comass_ascent(const AltForm& phi, const MetricPoint& g,
                             const AscentOptions& opt,
                             int* failed_starts = nullptr);

/// Dispatcher: exact where supported, otherwise ascent (32 starts)
/// cross-checked against bruteforce (2e4 samples); returns the tighter
/// bracket. Deterministic (fixed internal seed).
ComassEstimate comass(const AltForm& phi, const MetricPoint& g);

}  // namespace calib
