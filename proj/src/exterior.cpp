#include "calib/exterior.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <mutex>

#include "calib/rng.hpp"

namespace calib {

namespace {

void check_np(int n, int p) {
  if (n < 2 || n > kMaxDim)
    throw ArgumentError("ambient dimension must be in [2, 8], got " +
                        std::to_string(n));
  if (p < 0 || p > n)
    throw ArgumentError("form degree must be in [0, n], got " +
                        std::to_string(p));
}

void enumerate_subsets(int n, int p, int start, std::uint16_t acc,
                       std::vector<std::uint16_t>& out) {
  if (p == 0) {
    out.push_back(acc);
    return;
  }
  for (int i = start; i <= n - p + 1; ++i)
    enumerate_subsets(n, p - 1, i + 1,
                      acc | static_cast<std::uint16_t>(1u << (i - 1)), out);
}

}  // namespace

int binomial(int n, int p) {
  if (p < 0 || p > n) return 0;
  long long r = 1;
  for (int i = 0; i < p; ++i) r = r * (n - i) / (i + 1);
  return static_cast<int>(r);
}

const IndexTable& IndexTable::get(int n, int p) {
  check_np(n, p);
  static std::map<std::pair<int, int>, IndexTable> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(n, p);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  IndexTable t;
  enumerate_subsets(n, p, 1, 0, t.masks);
  for (auto& r : t.rank_of) r = -1;
  for (int i = 0; i < static_cast<int>(t.masks.size()); ++i)
    t.rank_of[t.masks[i]] = i;
  return cache.emplace(key, std::move(t)).first->second;
}

int merge_sign(std::uint16_t mask_i, std::uint16_t mask_j) {
  int inversions = 0;
  std::uint16_t j = mask_j;
  while (j) {
    std::uint16_t low = static_cast<std::uint16_t>(j & (~j + 1));
    // indices of I strictly above this element of J
    inversions += std::popcount(
        static_cast<unsigned>(mask_i & ~(static_cast<std::uint16_t>(low * 2 - 1))));
    j = static_cast<std::uint16_t>(j & (j - 1));
  }
  return (inversions & 1) ? -1 : 1;
}

// ---------------------------------------------------------------------------
// AltForm

AltForm::AltForm(int n, int p) : n_(n), p_(p) {
  check_np(n, p);
  coeffs_ = Eigen::VectorXd::Zero(binomial(n, p));
}

AltForm AltForm::axis(int n, std::initializer_list<int> indices, double c) {
  AltForm f(n, static_cast<int>(indices.size()));
  std::uint16_t mask = 0;
  int prev = 0;
  for (int i : indices) {
    if (i <= prev || i > n) throw ArgumentError("axis indices must increase");
    mask |= static_cast<std::uint16_t>(1u << (i - 1));
    prev = i;
  }
  f.set_coeff(mask, c);
  return f;
}

double AltForm::coeff(std::uint16_t mask) const {
  int r = IndexTable::get(n_, p_).rank_of[mask];
  if (r < 0) throw ArgumentError("bad multi-index for (n, p)");
  return coeffs_[r];
}

void AltForm::set_coeff(std::uint16_t mask, double c) {
  int r = IndexTable::get(n_, p_).rank_of[mask];
  if (r < 0) throw ArgumentError("bad multi-index for (n, p)");
  coeffs_[r] = c;
}

void AltForm::add_coeff(std::uint16_t mask, double c) {
  int r = IndexTable::get(n_, p_).rank_of[mask];
  if (r < 0) throw ArgumentError("bad multi-index for (n, p)");
  coeffs_[r] += c;
}

std::vector<int> AltForm::indices_of(int r) const {
  std::uint16_t mask = IndexTable::get(n_, p_).masks[r];
  std::vector<int> out;
  for (int i = 1; i <= n_; ++i)
    if (mask & (1u << (i - 1))) out.push_back(i);
  return out;
}

bool AltForm::approx_equal(const AltForm& other, double tol) const {
  if (n_ != other.n_ || p_ != other.p_) return false;
  return (coeffs_ - other.coeffs_).lpNorm<Eigen::Infinity>() <= tol;
}

void AltForm::check_finite() const {
  if (!coeffs_.allFinite()) throw ArgumentError("non-finite form coefficient");
}

AltForm& AltForm::operator+=(const AltForm& other) {
  if (n_ != other.n_ || p_ != other.p_)
    throw ArgumentError("form shape mismatch in +");
  coeffs_ += other.coeffs_;
  return *this;
}

AltForm& AltForm::operator*=(double s) {
  coeffs_ *= s;
  return *this;
}

AltForm operator-(const AltForm& a, const AltForm& b) {
  AltForm r = a;
  r += (-1.0) * AltForm(b);
  return r;
}

// ---------------------------------------------------------------------------
// Frame / MetricPoint

Frame::Frame(Eigen::MatrixXd vectors, int orientation)
    : vectors_(std::move(vectors)), orientation_(orientation) {
  if (orientation_ != 1 && orientation_ != -1)
    throw ArgumentError("frame orientation must be +/-1");
  check_np(ambient_dim(), count());
  if (!vectors_.allFinite()) throw ArgumentError("non-finite frame vector");
}

Frame Frame::empty(int n, int orientation) {
  return Frame(Eigen::MatrixXd(n, 0), orientation);
}

Frame Frame::from_columns(int n, std::initializer_list<Eigen::VectorXd> cols) {
  Eigen::MatrixXd m(n, cols.size());
  int c = 0;
  for (const auto& v : cols) m.col(c++) = v;
  return Frame(m);
}

double Frame::independence() const {
  if (count() == 0) return 1.0;
  Eigen::MatrixXd m = vectors_;
  for (int c = 0; c < m.cols(); ++c) {
    double nn = m.col(c).norm();
    if (nn == 0.0) return 0.0;
    m.col(c) /= nn;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().minCoeff();
}

void Frame::require_independent() const {
  if (independence() <= kDegenerateFrameTol)
    throw ArgumentError("degenerate frame: vectors not linearly independent");
}

MetricPoint::MetricPoint(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  int n = static_cast<int>(entries_.rows());
  if (entries_.cols() != n || n < 1 || n > kMaxDim)
    throw ArgumentError("metric must be square, dim <= 8");
  if ((entries_ - entries_.transpose()).lpNorm<Eigen::Infinity>() > 1e-12)
    throw ArgumentError("metric not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(entries_);
  if (es.eigenvalues().minCoeff() <= 1e-10)
    throw ArgumentError("metric not positive definite");
}

MetricPoint MetricPoint::identity(int n) {
  return MetricPoint(Eigen::MatrixXd::Identity(n, n));
}

Eigen::MatrixXd MetricPoint::orthonormal_basis() const {
  Eigen::LLT<Eigen::MatrixXd> llt(entries_);
  // B = L^{-T}: columns satisfy b_i^T g b_j = delta_ij, det(B) > 0.
  return llt.matrixL().transpose().solve(
      Eigen::MatrixXd::Identity(dim(), dim()));
}

// ---------------------------------------------------------------------------
// Operations

AltForm wedge(const AltForm& a, const AltForm& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw ArgumentError("wedge: ambient dimension mismatch");
  int n = a.ambient_dim();
  int p = a.degree(), q = b.degree();
  if (p + q > n) throw ArgumentError("wedge: degree sum exceeds dimension");
  AltForm out(n, p + q);
  const auto& ta = IndexTable::get(n, p);
  const auto& tb = IndexTable::get(n, q);
  for (int i = 0; i < a.terms(); ++i) {
    double ca = a.coeffs()[i];
    if (ca == 0.0) continue;
    std::uint16_t mi = ta.masks[i];
    for (int j = 0; j < b.terms(); ++j) {
      double cb = b.coeffs()[j];
      if (cb == 0.0) continue;
      std::uint16_t mj = tb.masks[j];
      if (mi & mj) continue;  // repeated index
      out.add_coeff(static_cast<std::uint16_t>(mi | mj),
                    merge_sign(mi, mj) * ca * cb);
    }
  }
  return out;
}

namespace detail {

double det_minor(const Eigen::MatrixXd& v, std::uint16_t row_mask) {
  int p = static_cast<int>(v.cols());
  int rows[kMaxDim];
  int k = 0;
  for (int i = 0; i < v.rows(); ++i)
    if (row_mask & (1u << i)) rows[k++] = i;
  switch (p) {
    case 0:
      return 1.0;
    case 1:
      return v(rows[0], 0);
    case 2:
      return v(rows[0], 0) * v(rows[1], 1) - v(rows[1], 0) * v(rows[0], 1);
    case 3: {
      double a = v(rows[0], 0), b = v(rows[0], 1), c = v(rows[0], 2);
      double d = v(rows[1], 0), e = v(rows[1], 1), f = v(rows[1], 2);
      double g = v(rows[2], 0), h = v(rows[2], 1), i = v(rows[2], 2);
      return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    }
    default: {
      Eigen::MatrixXd sub(p, p);
      for (int r = 0; r < p; ++r) sub.row(r) = v.row(rows[r]);
      return sub.determinant();
    }
  }
}

Eigen::MatrixXd gram_schmidt(const Eigen::MatrixXd& v, const MetricPoint& g) {
  Eigen::MatrixXd q = v;
  const Eigen::MatrixXd& gm = g.entries();
  for (int c = 0; c < q.cols(); ++c) {
    for (int k = 0; k < c; ++k)
      q.col(c) -= q.col(k).dot(gm * q.col(c)) * q.col(k);
    double nn = std::sqrt(q.col(c).dot(gm * q.col(c)));
    if (nn <= kDegenerateFrameTol)
      throw ArgumentError("gram_schmidt: dependent columns");
    q.col(c) /= nn;
  }
  return q;
}

}  // namespace detail

double eval(const AltForm& phi, const Frame& xi) {
  if (phi.ambient_dim() != xi.ambient_dim())
    throw ArgumentError("eval: ambient dimension mismatch");
  if (phi.degree() != xi.count())
    throw ArgumentError("eval: degree does not match frame count");
  const auto& table = IndexTable::get(phi.ambient_dim(), phi.degree());
  double acc = 0.0;
  for (int r = 0; r < phi.terms(); ++r) {
    double c = phi.coeffs()[r];
    if (c == 0.0) continue;
    acc += c * detail::det_minor(xi.vectors(), table.masks[r]);
  }
  return xi.orientation() * acc;
}

double gram_norm(const Frame& xi, const MetricPoint& g) {
  if (xi.count() == 0) return 1.0;  // empty product convention
  Eigen::MatrixXd gram =
      xi.vectors().transpose() * g.entries() * xi.vectors();
  double d = gram.determinant();
  return d <= 0.0 ? 0.0 : std::sqrt(d);
}

AltForm pullback(const AltForm& phi, const Eigen::MatrixXd& m) {
  int n = phi.ambient_dim(), p = phi.degree();
  AltForm out(n, p);
  const auto& table = IndexTable::get(n, p);
  // (M* phi)_J = sum_I phi_I det(M[I, J])
  for (int j = 0; j < out.terms(); ++j) {
    std::uint16_t mj = table.masks[j];
    Eigen::MatrixXd cols(n, p);
    int k = 0;
    for (int c = 0; c < n; ++c)
      if (mj & (1u << c)) cols.col(k++) = m.col(c);
    double acc = 0.0;
    for (int i = 0; i < phi.terms(); ++i) {
      double ci = phi.coeffs()[i];
      if (ci == 0.0) continue;
      acc += ci * detail::det_minor(cols, table.masks[i]);
    }
    out.coeffs()[j] = acc;
  }
  return out;
}

AltForm hodge_star(const AltForm& phi, const MetricPoint& g,
                   const Frame& orientation) {
  int n = phi.ambient_dim(), p = phi.degree();
  if (orientation.count() != n)
    throw ArgumentError("hodge_star: orientation must be a full n-frame");
  orientation.require_independent();

  Eigen::MatrixXd b = g.orthonormal_basis();  // det > 0
  double osign = orientation.orientation() *
                 (orientation.vectors().determinant() >= 0 ? 1.0 : -1.0);
  if (osign < 0) b.col(n - 1) *= -1.0;

  AltForm phi_b = pullback(phi, b);
  AltForm star_b(n, n - p);
  const auto& tp = IndexTable::get(n, p);
  const std::uint16_t full = static_cast<std::uint16_t>((1u << n) - 1);
  for (int r = 0; r < phi_b.terms(); ++r) {
    std::uint16_t mi = tp.masks[r];
    std::uint16_t mc = static_cast<std::uint16_t>(full & ~mi);
    star_b.add_coeff(mc, merge_sign(mi, mc) * phi_b.coeffs()[r]);
  }
  // back to the standard dual basis
  return pullback(star_b, b.inverse());
}

CanonicalFrame canonical_frame(const Frame& xi, const Frame& v,
                               const MetricPoint& g, double angle_tol) {
  xi.require_independent();
  int n = xi.ambient_dim(), p = xi.count();
  if (v.ambient_dim() != n)
    throw ArgumentError("canonical_frame: dimension mismatch");
  const Eigen::MatrixXd& gm = g.entries();

  Eigen::MatrixXd u = detail::gram_schmidt(xi.vectors(), g);  // n x p
  Eigen::MatrixXd qv;                                         // n x q
  int q = v.count();
  if (q > 0) qv = detail::gram_schmidt(v.vectors(), g);

  CanonicalFrame out;
  out.f_vectors = Eigen::MatrixXd(n, 0);
  out.g_vectors = Eigen::MatrixXd(n, 0);

  // Directions inside span(xi), ordered by decreasing cos(theta); cosines
  // are the singular values of the projection onto V in qv coordinates.
  Eigen::MatrixXd e = u;
  std::vector<double> cosines(p, 0.0);
  if (q > 0) {
    Eigen::MatrixXd mm = qv.transpose() * gm * u;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mm, Eigen::ComputeFullV);
    e = u * svd.matrixV();
    for (int j = 0; j < std::min<int>(q, p); ++j)
      cosines[j] = std::min(1.0, svd.singularValues()[j]);
  }

  std::vector<int> angle_idx, pure_f_idx, pure_g_idx;
  for (int j = 0; j < p; ++j) {
    double theta = std::acos(cosines[j]);
    if (theta <= angle_tol)
      pure_f_idx.push_back(j);
    else if (theta >= M_PI / 2 - angle_tol)
      pure_g_idx.push_back(j);
    else
      angle_idx.push_back(j);
  }

  int k = static_cast<int>(angle_idx.size());
  out.k = k;
  out.r = k + static_cast<int>(pure_f_idx.size());
  out.s = k + static_cast<int>(pure_g_idx.size());
  out.f_vectors = Eigen::MatrixXd(n, out.r);
  out.g_vectors = Eigen::MatrixXd(n, out.s);

  auto project_v = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    if (q == 0) return Eigen::VectorXd::Zero(n);
    return qv * (qv.transpose() * gm * w);
  };

  int fi = 0, gi = 0;
  for (int j : angle_idx) {
    Eigen::VectorXd ev = e.col(j);
    Eigen::VectorXd pf = project_v(ev);
    Eigen::VectorXd pg = ev - pf;
    double cn = std::sqrt(pf.dot(gm * pf));
    double sn = std::sqrt(pg.dot(gm * pg));
    out.angles.push_back(std::atan2(sn, cn));
    out.f_vectors.col(fi++) = pf / cn;
    out.g_vectors.col(gi++) = pg / sn;
  }
  for (int j : pure_f_idx) {
    Eigen::VectorXd pf = project_v(e.col(j));
    out.f_vectors.col(fi++) = pf / std::sqrt(pf.dot(gm * pf));
  }
  for (int j : pure_g_idx) {
    Eigen::VectorXd ev = e.col(j);
    Eigen::VectorXd pg = ev - project_v(ev);
    out.g_vectors.col(gi++) = pg / std::sqrt(pg.dot(gm * pg));
  }

  // Fix the overall sign so the reconstruction matches the unit simple
  // vector of xi (not just up to sign). Flipping one block vector flips it;
  // for a pure angle block flip the (f, g) pair jointly.
  Eigen::VectorXd target = plucker(Frame(u, xi.orientation()), g);
  Eigen::VectorXd got = plucker(out.reconstruct(), g);
  if (target.dot(got) < 0) {
    if (out.s > out.k)
      out.g_vectors.col(out.s - 1) *= -1.0;
    else if (out.r > out.k)
      out.f_vectors.col(out.r - 1) *= -1.0;
    else if (out.k > 0) {
      out.f_vectors.col(0) *= -1.0;
      out.g_vectors.col(0) *= -1.0;
    }
  }
  return out;
}

Frame CanonicalFrame::reconstruct() const {
  int n = static_cast<int>(f_vectors.rows());
  int p = r + s - k;
  Eigen::MatrixXd w(n, p);
  int c = 0;
  for (int j = 0; j < k; ++j)
    w.col(c++) = std::cos(angles[j]) * f_vectors.col(j) +
                 std::sin(angles[j]) * g_vectors.col(j);
  for (int j = k; j < r; ++j) w.col(c++) = f_vectors.col(j);
  for (int j = k; j < s; ++j) w.col(c++) = g_vectors.col(j);
  return Frame(w);
}

Frame random_frame(int n, int p, std::uint64_t seed) {
  check_np(n, p);
  if (p < 1) throw ArgumentError("random_frame: need p >= 1");
  Rng rng(seed);
  Eigen::MatrixXd a(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd qfull = qr.householderQ();
  Eigen::MatrixXd qthin = qfull.leftCols(p);
  Eigen::MatrixXd rmat =
      qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (int j = 0; j < p; ++j)
    if (rmat(j, j) < 0) qthin.col(j) *= -1.0;
  return Frame(qthin);
}

Eigen::VectorXd plucker(const Frame& xi, const MetricPoint& g) {
  if (xi.count() == 0) return Eigen::VectorXd::Constant(1, xi.orientation());
  Eigen::MatrixXd u = detail::gram_schmidt(xi.vectors(), g);
  const auto& table = IndexTable::get(xi.ambient_dim(), xi.count());
  Eigen::VectorXd out(table.masks.size());
  for (std::size_t r = 0; r < table.masks.size(); ++r)
    out[r] = xi.orientation() * detail::det_minor(u, table.masks[r]);
  // gram_schmidt preserves orientation (positive diagonal), so this is the
  // unit simple vector of the oriented plane in the standard basis.
  return out;
}

}  // namespace calib
