#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "calib/errors.hpp"

namespace calib {

// Ambient dimensions are capped so dense coefficient storage over all
// C(n,p) sorted multi-indices stays small (C(8,4) = 70).
inline constexpr int kMaxDim = 8;
inline constexpr double kDegenerateFrameTol = 1e-10;
inline constexpr double kCoeffEqTol = 1e-12;

/// Index sets are bitmasks over {1..n}; bit i-1 represents index i.
/// Enumeration order is lexicographic on the increasing index tuples,
/// which fixes the coefficient layout of AltForm.
struct IndexTable {
  std::vector<std::uint16_t> masks;  // lex-ordered p-subsets of {1..n}
  int rank_of[1 << kMaxDim];         // mask -> position, -1 if absent

  static const IndexTable& get(int n, int p);
};

int binomial(int n, int p);

/// Sign of the shuffle merging two disjoint index sets, i.e. the parity of
/// the permutation sorting (I, J) concatenated.
int merge_sign(std::uint16_t mask_i, std::uint16_t mask_j);

/// An alternating p-form on R^n with dense coefficients over sorted
/// multi-indices. Coefficients live in the standard dual basis e*_I.
class AltForm {
 public:
  AltForm(int n, int p);

  static AltForm axis(int n, std::initializer_list<int> indices,
                      double c = 1.0);
  static AltForm zero(int n, int p) { return AltForm(n, p); }

  int ambient_dim() const { return n_; }
  int degree() const { return p_; }
  int terms() const { return static_cast<int>(coeffs_.size()); }

  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Eigen::VectorXd& coeffs() { return coeffs_; }

  double coeff(std::uint16_t mask) const;
  void set_coeff(std::uint16_t mask, double c);
  void add_coeff(std::uint16_t mask, double c);

  /// Index tuple (1-based, increasing) of coefficient slot r.
  std::vector<int> indices_of(int r) const;

  bool approx_equal(const AltForm& other, double tol = kCoeffEqTol) const;
  void check_finite() const;

  AltForm& operator+=(const AltForm& other);
  AltForm& operator*=(double s);
  friend AltForm operator+(AltForm a, const AltForm& b) { return a += b; }
  friend AltForm operator-(const AltForm& a, const AltForm& b);
  friend AltForm operator*(double s, AltForm a) { return a *= s; }

 private:
  int n_, p_;
  Eigen::VectorXd coeffs_;
};

/// p linearly independent vectors spanning an oriented p-plane. The simple
/// vector represented is orientation * v_1 ^ ... ^ v_p. Swapping two columns
/// and flipping the orientation sign leaves the represented object fixed.
class Frame {
 public:
  Frame(Eigen::MatrixXd vectors, int orientation = 1);

  /// Empty frame (p = 0); pairs with 0-forms.
  static Frame empty(int n, int orientation = 1);
  static Frame from_columns(int n, std::initializer_list<Eigen::VectorXd> cols);

  int ambient_dim() const { return static_cast<int>(vectors_.rows()); }
  int count() const { return static_cast<int>(vectors_.cols()); }
  const Eigen::MatrixXd& vectors() const { return vectors_; }
  int orientation() const { return orientation_; }
  Frame reversed() const { return Frame(vectors_, -orientation_); }

  /// Smallest singular value after column normalization; independence
  /// requires > kDegenerateFrameTol.
  double independence() const;
  void require_independent() const;

 private:
  Eigen::MatrixXd vectors_;
  int orientation_;
};

/// Symmetric positive-definite bilinear form on one tangent space.
class MetricPoint {
 public:
  explicit MetricPoint(Eigen::MatrixXd entries);
  static MetricPoint identity(int n);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    return u.dot(entries_ * v);
  }

  /// Columns form a g-orthonormal basis (inverse transpose of the Cholesky
  /// factor); deterministic, positive determinant.
  Eigen::MatrixXd orthonormal_basis() const;

 private:
  Eigen::MatrixXd entries_;
};

// ---------------------------------------------------------------------------
// Operations

/// Exterior product. Bilinear, associative, graded-anticommutative.
AltForm wedge(const AltForm& a, const AltForm& b);

/// phi evaluated on the simple vector of the frame (orientation included).
double eval(const AltForm& phi, const Frame& xi);

/// sqrt(det G) with G_ij = g(v_i, v_j); the g-volume of the spanned
/// parallelepiped. Returns 1 for the empty frame. Values at or below
/// kDegenerateFrameTol indicate a degenerate frame.
double gram_norm(const Frame& xi, const MetricPoint& g);

/// Pullback through the linear map M: (M* phi)(v_1..v_p) = phi(M v_1,..).
AltForm pullback(const AltForm& phi, const Eigen::MatrixXd& m);

/// Hodge star w.r.t. g and the orientation of the given full frame.
/// Satisfies star(star(phi)) = (-1)^{p(n-p)} phi and maps e*_I to
/// +/- e*_{I^c} under the identity metric and standard orientation.
AltForm hodge_star(const AltForm& phi, const MetricPoint& g,
                   const Frame& orientation);

/// Canonical form of a simple vector with respect to a subspace:
/// xi is reproduced (up to normalization, sign fixed internally) by
///   (cos t_1 f_1 + sin t_1 g_1) ^ ... ^ (cos t_k f_k + sin t_k g_k)
///   ^ f_{k+1} ^ .. ^ f_r ^ g_{k+1} ^ .. ^ g_s
/// with f's g-orthonormal in span(V), g's in the g-orthogonal complement,
/// angles in (0, pi/2) and r + s - k = count(xi). cos^2 t_j are the
/// eigenvalues of B(u,v) = <proj_V u, proj_V v> restricted to span(xi).
struct CanonicalFrame {
  std::vector<double> angles;  // size k
  Eigen::MatrixXd f_vectors;   // n x r
  Eigen::MatrixXd g_vectors;   // n x s
  int k = 0, r = 0, s = 0;

  /// Wedge of the reconstruction, as a frame of count(xi) vectors.
  Frame reconstruct() const;
};

/// Angles within angle_tol of 0 or pi/2 are classified into the pure-f /
/// pure-g blocks rather than the angle block.
CanonicalFrame canonical_frame(const Frame& xi, const Frame& v,
                               const MetricPoint& g, double angle_tol = 1e-9);

/// Identity-orthonormal p-frame from Gaussian columns + QR with positive
/// diagonal; deterministic per seed.
Frame random_frame(int n, int p, std::uint64_t seed);

/// Coefficients of the unit simple vector of a frame (Plucker coordinates
/// after g-orthonormalization); canonical for the oriented plane.
Eigen::VectorXd plucker(const Frame& xi, const MetricPoint& g);

namespace detail {
double det_minor(const Eigen::MatrixXd& v, std::uint16_t row_mask);
Eigen::MatrixXd gram_schmidt(const Eigen::MatrixXd& v, const MetricPoint& g);
}  // namespace detail

}  // namespace calib
