#include "calib/metric_ops.hpp"

#include <cmath>

namespace calib {

namespace {

// g-orthonormal basis of span(xi), oriented so that eval(phi_hat, .) = +1
// when phi_hat is the theta-normalized form.
Eigen::MatrixXd oriented_span_basis(const Frame& xi, const MetricPoint& g) {
  Eigen::MatrixXd q = detail::gram_schmidt(xi.vectors(), g);
  if (xi.orientation() < 0) q.col(q.cols() - 1) *= -1.0;
  return q;
}

Eigen::MatrixXd default_complement(const Eigen::MatrixXd& v,
                                   const MetricPoint& g) {
  int n = static_cast<int>(v.rows());
  const Eigen::MatrixXd& gm = g.entries();
  Eigen::MatrixXd base = g.orthonormal_basis();
  Eigen::MatrixXd acc(n, n);
  acc.leftCols(v.cols()) = v;
  int have = static_cast<int>(v.cols());
  for (int c = 0; c < n && have < n; ++c) {
    Eigen::VectorXd w = base.col(c);
    for (int k = 0; k < have; ++k) w -= acc.col(k).dot(gm * w) * acc.col(k);
    double nn = std::sqrt(w.dot(gm * w));
    if (nn < 1e-8) continue;
    acc.col(have++) = w / nn;
  }
  if (have < n) throw NumericalError("complement construction lost rank");
  return acc.rightCols(n - v.cols());
}

}  // namespace

MetricPoint scale_metric(const MetricPoint& g, double f) {
  if (!(f > 0.0)) throw ArgumentError("scale_metric: factor must be positive");
  return MetricPoint(f * g.entries());
}

MetricPoint glue_metrics(double a, const MetricPoint& g1, double b,
                         const MetricPoint& g2) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ArgumentError("glue_metrics: weights must be positive");
  if (g1.dim() != g2.dim())
    throw ArgumentError("glue_metrics: dimension mismatch");
  return MetricPoint(a * g1.entries() + b * g2.entries());
}

HlDecomposition hl_decompose(const AltForm& phi, const Frame& xi,
                             const MetricPoint& g,
                             const Eigen::MatrixXd* initial_complement) {
  xi.require_independent();
  int n = phi.ambient_dim(), p = phi.degree();
  if (xi.ambient_dim() != n || xi.count() != p)
    throw ArgumentError("hl_decompose: phi and xi shapes disagree");
  if (p < 1 || p >= n)
    throw ArgumentError("hl_decompose: need 1 <= p < n");

  double theta = eval(phi, xi) / gram_norm(xi, g);
  if (theta <= 1e-10)
    throw ArgumentError("hl_decompose: pairing eval(phi, xi) must be positive");
  AltForm phi_hat = (1.0 / theta) * phi;

  Eigen::MatrixXd v = oriented_span_basis(xi, g);
  Eigen::MatrixXd comp =
      initial_complement ? *initial_complement : default_complement(v, g);
  if (comp.rows() != n || comp.cols() != n - p)
    throw ArgumentError("hl_decompose: complement must be n x (n-p)");
  {
    Eigen::MatrixXd full(n, n);
    full << v, comp;
    if (std::abs(full.determinant()) < 1e-10)
      throw ArgumentError("hl_decompose: complement not transversal");
  }

  // w = c - sum_j alpha_j v_j with alpha_j = (-1)^(p-j) phi(v_1..v^_j..v_p, c):
  // kills every evaluation of phi on a (p-1)-subframe of xi extended by w.
  Eigen::MatrixXd w(n, n - p);
  for (int k = 0; k < n - p; ++k) {
    Eigen::VectorXd c = comp.col(k);
    Eigen::VectorXd corrected = c;
    for (int j = 1; j <= p; ++j) {
      Eigen::MatrixXd sub(n, p);
      int col = 0;
      for (int i = 1; i <= p; ++i)
        if (i != j) sub.col(col++) = v.col(i - 1);
      sub.col(p - 1) = c;
      double alpha = eval(phi_hat, Frame(sub));
      if ((p - j) % 2 == 1) alpha = -alpha;
      corrected -= alpha * v.col(j - 1);
    }
    w.col(k) = corrected;
  }

  Eigen::MatrixXd adapted(n, n);
  adapted << v, w;
  if (adapted.determinant() < 0) w.col(n - p - 1) *= -1.0;
  adapted << v, w;

  AltForm in_adapted = pullback(phi_hat, adapted);
  std::uint16_t leading = static_cast<std::uint16_t>((1u << p) - 1);
  AltForm residual = in_adapted;
  residual.set_coeff(leading, 0.0);

  HlDecomposition out{Frame(w), residual, theta, adapted};
  return out;
}

MetricPoint hl_metric(const AltForm& phi, const Frame& xi,
                      const MetricPoint& g, double c) {
  HlDecomposition dec = hl_decompose(phi, xi, g);
  int n = phi.ambient_dim(), p = phi.degree();
  const Eigen::MatrixXd& adapted = dec.adapted_basis;

  // Base inner product h: g on V, g on W, V perpendicular to W, |xi| = 1.
  Eigen::MatrixXd w = adapted.rightCols(n - p);
  Eigen::MatrixXd w_gram = w.transpose() * g.entries() * w;
  Eigen::MatrixXd h_blocks = Eigen::MatrixXd::Zero(n, n);
  h_blocks.topLeftCorner(p, p).setIdentity();
  h_blocks.bottomRightCorner(n - p, n - p) = w_gram;
  Eigen::MatrixXd inv_adapted = adapted.inverse();
  MetricPoint h(inv_adapted.transpose() * h_blocks * inv_adapted);

  double bound = binomial(n, p) * comass(phi, h).upper / dec.theta;
  if (!(c * c > bound))
    throw NumericalError("hl_metric: C^2 below the admissible threshold",
                         std::sqrt(bound) * (1.0 + 1e-9));

  Eigen::MatrixXd gp_blocks = h_blocks;
  gp_blocks.bottomRightCorner(n - p, n - p) *= c * c;
  return MetricPoint(inv_adapted.transpose() * gp_blocks * inv_adapted);
}

BundlePointModel bundle_point_model(const std::vector<double>& angles,
                                    int horizontal_dim, int fiber_dim) {
  int m = horizontal_dim, q = fiber_dim;
  if (m < 1 || q < 1)
    throw ArgumentError("bundle_point_model: need m >= 1 and q >= 1");
  if (static_cast<int>(angles.size()) != m)
    throw ArgumentError("bundle_point_model: one angle per tangent direction");
  int tilted = 0;
  for (double t : angles) {
    if (!(t > 0.0) || t > M_PI / 2 + 1e-15)
      throw ArgumentError("bundle_point_model: angles must lie in (0, pi/2]");
    if (t < M_PI / 2 - 1e-12) ++tilted;
  }
  if (tilted > q)
    throw ArgumentError(
        "bundle_point_model: more tilted directions than fiber dimensions");

  int n = m + q;
  Eigen::MatrixXd e(n, m);
  int fiber_slot = 0;
  for (int i = 0; i < m; ++i) {
    double t = angles[i];
    Eigen::VectorXd ei = Eigen::VectorXd::Zero(n);
    ei[i] = std::sin(t);
    if (t < M_PI / 2 - 1e-12)
      ei[m + fiber_slot++] = std::cos(t);
    else
      ei[m + (i % q)] += std::cos(t);  // cos = 0 up to rounding
    e.col(i) = ei;
  }

  // pi* omega = omega composed with the projection along fibers onto the
  // tangent plane; in coordinates eps_i -> e_i / sin(t_i), fiber -> 0.
  Eigen::MatrixXd basis(n, n);
  basis.leftCols(m) = e;
  basis.rightCols(q) = Eigen::MatrixXd::Identity(n, n).rightCols(q);
  AltForm lead(n, m);
  lead.set_coeff(static_cast<std::uint16_t>((1u << m) - 1), 1.0);
  AltForm omega_amb = pullback(lead, basis.inverse());
  Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < m; ++i) proj.col(i) = e.col(i) / std::sin(angles[i]);
  AltForm phi = pullback(omega_amb, proj);

  return BundlePointModel{phi, MetricPoint::identity(n), Frame(e)};
}

SplitWeightResult split_weight_transform(const MetricPoint& g,
                                         const std::vector<int>& block_dims,
                                         const std::vector<double>& exponents,
                                         double f,
                                         bool require_volume_preserving) {
  if (!(f >= 1.0)) throw ArgumentError("split_weight_transform: need f >= 1");
  if (block_dims.size() != exponents.size())
    throw ArgumentError("split_weight_transform: one exponent per block");
  int n = g.dim();
  int total = 0;
  for (int d : block_dims) {
    if (d < 1) throw ArgumentError("split_weight_transform: empty block");
    total += d;
  }
  if (total != n)
    throw ArgumentError("split_weight_transform: blocks must cover the space");
  if (require_volume_preserving) {
    double s = 0.0;
    for (std::size_t i = 0; i < block_dims.size(); ++i)
      s += exponents[i] * block_dims[i];
    if (std::abs(s) > 1e-12)
      throw ArgumentError(
          "split_weight_transform: weighted exponent sum must vanish");
  }

  // reject couplings between declared blocks
  Eigen::MatrixXd out = g.entries();
  int off = 0;
  std::vector<int> starts;
  for (int d : block_dims) {
    starts.push_back(off);
    off += d;
  }
  for (std::size_t bi = 0; bi < block_dims.size(); ++bi)
    for (std::size_t bj = 0; bj < block_dims.size(); ++bj) {
      if (bi == bj) continue;
      if (out.block(starts[bi], starts[bj], block_dims[bi], block_dims[bj])
              .lpNorm<Eigen::Infinity>() > 1e-12)
        throw ArgumentError("split_weight_transform: metric not block-diagonal");
    }

  SplitWeightResult res{MetricPoint::identity(n), {}, 1.0};
  for (std::size_t b = 0; b < block_dims.size(); ++b) {
    double w = std::pow(f, exponents[b]);
    out.block(starts[b], starts[b], block_dims[b], block_dims[b]) *= w;
    double vol = std::pow(f, exponents[b] * block_dims[b] / 2.0);
    res.block_volume_factors.push_back(vol);
    res.total_volume_factor *= vol;
  }
  res.metric = MetricPoint(out);
  return res;
}

SplitWeightResult split_weight_transform(
    const std::vector<std::pair<MetricPoint, double>>& blocks, double f,
    bool require_volume_preserving) {
  int n = 0;
  for (const auto& [m, e] : blocks) n += m.dim();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> dims;
  std::vector<double> exps;
  int off = 0;
  for (const auto& [m, e] : blocks) {
    g.block(off, off, m.dim(), m.dim()) = m.entries();
    dims.push_back(m.dim());
    exps.push_back(e);
    off += m.dim();
  }
  return split_weight_transform(MetricPoint(g), dims, exps, f,
                                require_volume_preserving);
}

}  // namespace calib
