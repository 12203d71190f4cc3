#include "calib/comass.hpp"

#include <cmath>
#include <vector>

#include "calib/parallel.hpp"
#include "calib/rng.hpp"

namespace calib {

namespace {

constexpr std::uint64_t kDispatchSeed = 0x5CA1AB1Eull;

Frame basis_frame(int n, int p) {
  return Frame(Eigen::MatrixXd::Identity(n, n).leftCols(p));
}

// Total order on (value, witness) candidates: larger value wins; near-ties
// resolved toward the lexicographically smallest Plucker coordinates so
// reports are reproducible regardless of evaluation order.
struct Candidate {
  double value = -1.0;
  Frame witness;
  Eigen::VectorXd plk;
  bool valid = false;

  Candidate() : witness(Frame::empty(2)) {}
  Candidate(double v, Frame w, const MetricPoint& g)
      : value(v), witness(std::move(w)), plk(plucker(witness, g)), valid(true) {}

  bool better_than(const Candidate& o) const {
    if (!o.valid) return true;
    if (!valid) return false;
    if (value > o.value + 1e-12) return true;
    if (value < o.value - 1e-12) return false;
    for (int i = 0; i < plk.size() && i < o.plk.size(); ++i) {
      if (plk[i] < o.plk[i] - 1e-12) return true;
      if (plk[i] > o.plk[i] + 1e-12) return false;
    }
    return false;
  }
};

// g-orthonormal basis of the g-orthogonal complement of span(cols).
Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& cols,
                                       const MetricPoint& g) {
  int n = static_cast<int>(cols.rows());
  const Eigen::MatrixXd& gm = g.entries();
  Eigen::MatrixXd base = g.orthonormal_basis();
  Eigen::MatrixXd acc(n, n);
  int have = 0;
  if (cols.cols() > 0) {
    acc.leftCols(cols.cols()) = detail::gram_schmidt(cols, g);
    have = static_cast<int>(cols.cols());
  }
  int keep = have;
  for (int c = 0; c < n && have < n; ++c) {
    Eigen::VectorXd w = base.col(c);
    for (int k = 0; k < have; ++k) w -= acc.col(k).dot(gm * w) * acc.col(k);
    double nn = std::sqrt(w.dot(gm * w));
    if (nn < 1e-8) continue;
    acc.col(have++) = w / nn;
  }
  if (have < n) throw NumericalError("complement construction lost rank");
  return acc.rightCols(n - keep);
}

ComassEstimate zero_estimate(int n, int p, const std::string& method) {
  ComassEstimate est;
  est.lower = 0.0;
  est.upper = 0.0;
  est.method = method;
  est.witness = p == 0 ? Frame::empty(n) : basis_frame(n, p);
  return est;
}

// ---------------------------------------------------------------------------
// Ascent machinery. Works in g-orthonormal coordinates on coefficient-
// normalized forms, so conformally related problems follow identical
// trajectories and matched-seed comparisons are exact.

struct AscentProblem {
  int n, p;
  const IndexTable* table;
  Eigen::VectorXd coeffs;  // normalized

  double value(const Eigen::MatrixXd& a) const {
    double f = 0.0;
    for (int r = 0; r < coeffs.size(); ++r) {
      double c = coeffs[r];
      if (c == 0.0) continue;
      f += c * detail::det_minor(a, table->masks[r]);
    }
    return f;
  }

  // f and its Euclidean gradient via cofactor accumulation:
  // d det(M)/d M_rc = cof(M)_rc.
  double value_and_grad(const Eigen::MatrixXd& a, Eigen::MatrixXd& grad) const {
    grad.setZero(n, p);
    double f = 0.0;
    int rows[kMaxDim];
    Eigen::MatrixXd m(p, p), cof(p, p);
    for (int r = 0; r < coeffs.size(); ++r) {
      double c = coeffs[r];
      if (c == 0.0) continue;
      std::uint16_t mask = table->masks[r];
      int k = 0;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) rows[k++] = i;
      for (int i = 0; i < p; ++i) m.row(i) = a.row(rows[i]);
      cofactor_matrix(m, cof);
      double det = 0.0;
      for (int cc = 0; cc < p; ++cc) det += m(0, cc) * cof(0, cc);
      f += c * det;
      for (int rr = 0; rr < p; ++rr)
        for (int cc = 0; cc < p; ++cc) grad(rows[rr], cc) += c * cof(rr, cc);
    }
    return f;
  }

  static void cofactor_matrix(const Eigen::MatrixXd& m, Eigen::MatrixXd& cof) {
    int p = static_cast<int>(m.rows());
    switch (p) {
      case 1:
        cof(0, 0) = 1.0;
        return;
      case 2:
        cof(0, 0) = m(1, 1);
        cof(0, 1) = -m(1, 0);
        cof(1, 0) = -m(0, 1);
        cof(1, 1) = m(0, 0);
        return;
      default: {
        Eigen::MatrixXd sub(p - 1, p - 1);
        for (int r = 0; r < p; ++r)
          for (int c = 0; c < p; ++c) {
            int si = 0;
            for (int i = 0; i < p; ++i) {
              if (i == r) continue;
              int sj = 0;
              for (int j = 0; j < p; ++j) {
                if (j == c) continue;
                sub(si, sj++) = m(i, j);
              }
              ++si;
            }
            double d = sub.determinant();
            cof(r, c) = ((r + c) & 1) ? -d : d;
          }
        return;
      }
    }
  }
};

Eigen::MatrixXd qr_retract(const Eigen::MatrixXd& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q =
      Eigen::MatrixXd(qr.householderQ()).leftCols(a.cols());
  Eigen::MatrixXd r =
      qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (int j = 0; j < a.cols(); ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

struct StartResult {
  double value = 0.0;
  Eigen::MatrixXd frame;
  bool converged = false;
  long evals = 0;
};

StartResult run_one_start(const AscentProblem& prob, std::uint64_t seed,
                          double tol, int max_iter) {
  StartResult out;
  Eigen::MatrixXd a = random_frame(prob.n, prob.p, seed).vectors();
  Eigen::MatrixXd grad(prob.n, prob.p);
  double f = prob.value_and_grad(a, grad);
  ++out.evals;
  if (f < 0) {  // flip one column: same plane family, positive value
    a.col(0) *= -1.0;
    f = prob.value_and_grad(a, grad);
    ++out.evals;
  }
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd atg = a.transpose() * grad;
    Eigen::MatrixXd tangent = grad - a * ((atg + atg.transpose()) * 0.5);
    double gn = tangent.norm();
    if (gn < tol) {
      out.converged = true;
      break;
    }
    bool moved = false;
    while (step >= 1e-14) {
      Eigen::MatrixXd cand = qr_retract(a + step * tangent);
      double fc = prob.value(cand);
      ++out.evals;
      if (fc >= f + 1e-4 * step * gn * gn) {
        a = cand;
        f = prob.value_and_grad(a, grad);
        ++out.evals;
        step = std::min(1.0, step * 2.0);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      out.converged = gn < 1e-5;
      break;
    }
  }
  out.value = f;
  out.frame = a;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

double comass_upper_l1(const AltForm& phi, const MetricPoint& g) {
  AltForm in_on = pullback(phi, g.orthonormal_basis());
  return in_on.coeffs().lpNorm<1>();
}

std::optional<ComassEstimate> comass_exact(const AltForm& phi,
                                           const MetricPoint& g) {
  phi.check_finite();
  int n = phi.ambient_dim(), p = phi.degree();
  if (g.dim() != n) throw ArgumentError("comass: metric dimension mismatch");

  ComassEstimate est;
  est.method = "exact";

  if (p == 0) {
    double c = phi.coeffs()[0];
    est.lower = est.upper = std::abs(c);
    est.witness = Frame::empty(n, c < 0 ? -1 : 1);
    est.evaluations = 1;
    return est;
  }

  if (p == 1) {
    Eigen::VectorXd v = phi.coeffs();
    Eigen::VectorXd w = g.entries().ldlt().solve(v);
    double norm2 = v.dot(w);
    if (norm2 <= 0) return zero_estimate(n, 1, "exact");
    double c = std::sqrt(norm2);
    est.lower = est.upper = c;
    est.witness = Frame(w / c);
    est.evaluations = 1;
    return est;
  }

  if (p == n) {
    double c = phi.coeffs()[0];
    Eigen::MatrixXd b = g.orthonormal_basis();
    est.lower = est.upper = std::abs(c) * b.determinant();
    est.witness = Frame(b, c < 0 ? -1 : 1);
    est.evaluations = 1;
    return est;
  }

  if (p == 2) {
    Eigen::MatrixXd b = g.orthonormal_basis();
    AltForm in_on = pullback(phi, b);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    const auto& table = IndexTable::get(n, 2);
    for (int r = 0; r < in_on.terms(); ++r) {
      auto idx = in_on.indices_of(r);
      s(idx[0] - 1, idx[1] - 1) = in_on.coeffs()[r];
      s(idx[1] - 1, idx[0] - 1) = -in_on.coeffs()[r];
    }
    (void)table;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        Eigen::MatrixXd(s.transpose() * s));
    double lam2 = es.eigenvalues().maxCoeff();
    if (lam2 <= 1e-300) return zero_estimate(n, 2, "exact");
    double lam = std::sqrt(lam2);
    Eigen::VectorXd u = es.eigenvectors().col(n - 1);
    Eigen::VectorXd v = -(s * u) / lam;
    Eigen::MatrixXd w(n, 2);
    w.col(0) = b * u;
    w.col(1) = b * v;
    est.lower = est.upper = lam;
    est.witness = Frame(w);
    est.evaluations = 1;
    return est;
  }

  if (p == n - 1 || p == n - 2) {
    // A form and its Hodge dual have the same comass; reduce to 1 or 2.
    AltForm dual = hodge_star(phi, g, Frame(Eigen::MatrixXd::Identity(n, n)));
    auto low = comass_exact(dual, g);
    if (!low) return std::nullopt;
    if (low->lower == 0.0) return zero_estimate(n, p, "exact");
    Eigen::MatrixXd span = low->witness.count() == 0
                               ? Eigen::MatrixXd(n, 0)
                               : low->witness.vectors();
    Eigen::MatrixXd comp = orthonormal_complement(span, g);
    Frame cand(comp);
    double val = eval(phi, cand);
    est.witness = val < 0 ? cand.reversed() : cand;
    est.lower = est.upper = std::abs(val);
    est.evaluations = low->evaluations + 1;
    return est;
  }

  return std::nullopt;
}

ComassEstimate comass_bruteforce(const AltForm& phi, const MetricPoint& g,
                                 long samples, std::uint64_t seed) {
  phi.check_finite();
  int n = phi.ambient_dim(), p = phi.degree();
  if (g.dim() != n) throw ArgumentError("comass: metric dimension mismatch");
  if (samples < 1) throw ArgumentError("comass_bruteforce: samples >= 1");
  double upper = comass_upper_l1(phi, g);
  if (p == 0) {
    auto est = *comass_exact(phi, g);
    est.method = "bruteforce";
    return est;
  }

  int chunks = std::min<long>(samples, 8 * default_threads());
  std::vector<Candidate> best(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    long lo = samples * c / chunks, hi = samples * (c + 1) / chunks;
    Candidate local;
    for (long i = lo; i < hi; ++i) {
      Frame f = random_frame(n, p, Rng::derive(seed, i));
      double gn = gram_norm(f, g);
      if (gn <= kDegenerateFrameTol) continue;
      double v = eval(phi, f) / gn;
      Candidate cand(std::abs(v), v < 0 ? f.reversed() : f, g);
      if (cand.better_than(local)) local = cand;
    }
    best[c] = local;
  });
  Candidate overall;
  for (const auto& c : best)
    if (c.better_than(overall)) overall = c;

  ComassEstimate est;
  est.method = "bruteforce";
  est.evaluations = samples;
  est.upper = upper;
  if (!overall.valid || overall.value <= 0.0) {
    est.lower = 0.0;
    est.witness = basis_frame(n, p);
  } else {
    est.lower = overall.value;
    est.witness = overall.witness;
  }
  return est;
}

ComassEstimate comass_ascent(const AltForm& phi, const MetricPoint& g,
                             const AscentOptions& opt, int* failed_starts) {
  phi.check_finite();
  int n = phi.ambient_dim(), p = phi.degree();
  if (g.dim() != n) throw ArgumentError("comass: metric dimension mismatch");
  if (opt.starts < 1 || opt.tol <= 0)
    throw ArgumentError("comass_ascent: need starts >= 1 and tol > 0");
  if (failed_starts) *failed_starts = 0;
  if (p == 0) {
    auto est = *comass_exact(phi, g);
    est.method = "ascent";
    return est;
  }

  Eigen::MatrixXd b = g.orthonormal_basis();
  AscentProblem prob;
  prob.n = n;
  prob.p = p;
  prob.table = &IndexTable::get(n, p);
  prob.coeffs = pullback(phi, b).coeffs();
  double scale = prob.coeffs.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return zero_estimate(n, p, "ascent");
  prob.coeffs /= scale;

  std::vector<StartResult> results(opt.starts);
  parallel_for(opt.starts, [&](std::size_t i) {
    results[i] = run_one_start(prob, Rng::derive(opt.seed, i), opt.tol,
                               opt.max_iterations);
  });

  Candidate overall;
  long evals = 0;
  int failures = 0;
  for (const auto& r : results) {
    evals += r.evals;
    if (!r.converged) ++failures;
    Eigen::MatrixXd w = b * r.frame;  // g-orthonormal in original coords
    Candidate cand(r.value * scale, Frame(w), g);
    if (cand.better_than(overall)) overall = cand;
  }
  if (failed_starts) *failed_starts = failures;
  if (failures == opt.starts)
    throw NumericalError("comass_ascent: no start converged");

  ComassEstimate est;
  est.method = "ascent";
  est.evaluations = evals;
  est.lower = std::max(0.0, overall.value);
  est.witness = overall.witness;
  est.upper = std::max(est.lower, comass_upper_l1(phi, g));
  return est;
}

ComassEstimate comass(const AltForm& phi, const MetricPoint& g) {
  if (auto exact = comass_exact(phi, g)) return *exact;

  AscentOptions opt;
  opt.starts = 32;
  opt.seed = kDispatchSeed;
  ComassEstimate a = comass_ascent(phi, g, opt);
  ComassEstimate b =
      comass_bruteforce(phi, g, 20000, Rng::derive(kDispatchSeed, 999));

  ComassEstimate out = a.lower >= b.lower ? a : b;
  out.upper = std::min(a.upper, b.upper);
  out.upper = std::max(out.upper, out.lower);
  out.evaluations = a.evaluations + b.evaluations;
  return out;
}

}  // namespace calib
