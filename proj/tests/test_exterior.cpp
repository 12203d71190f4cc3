#include <doctest.h>

#include <cmath>

#include "calib/exterior.hpp"
#include "calib/rng.hpp"
#include "test_util.hpp"

using namespace calib;
using testutil::rand_form;
using testutil::rand_spd;

namespace {

Eigen::VectorXd unit(int n, int i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[i - 1] = 1.0;
  return v;
}

// Shuffle-sum oracle for the Laplace expansion of (a ^ b) on a frame.
double laplace_oracle(const AltForm& a, const AltForm& b, const Frame& fr) {
  int p = a.degree(), q = b.degree();
  const auto& table = IndexTable::get(p + q, p);
  double acc = 0.0;
  for (std::uint16_t mask : table.masks) {
    Eigen::MatrixXd va(fr.ambient_dim(), p), vb(fr.ambient_dim(), q);
    int ia = 0, ib = 0;
    for (int pos = 0; pos < p + q; ++pos) {
      if (mask & (1u << pos))
        va.col(ia++) = fr.vectors().col(pos);
      else
        vb.col(ib++) = fr.vectors().col(pos);
    }
    std::uint16_t comp = static_cast<std::uint16_t>(((1u << (p + q)) - 1) & ~mask);
    double sgn = merge_sign(mask, comp);
    acc += sgn * eval(a, Frame(va)) * eval(b, Frame(vb));
  }
  return fr.orientation() * acc;
}

}  // namespace

TEST_CASE("wedge basis cases") {
  AltForm e1 = AltForm::axis(4, {1});
  AltForm e2 = AltForm::axis(4, {2});
  AltForm e3 = AltForm::axis(4, {3});

  CHECK(wedge(e1, e2).approx_equal(AltForm::axis(4, {1, 2})));

  AltForm e12 = AltForm::axis(4, {1, 2});
  CHECK(wedge(e12, e12).approx_equal(AltForm::zero(4, 4)));

  AltForm sum = e1 + e2;
  AltForm expect = AltForm::axis(4, {1, 3}) + AltForm::axis(4, {2, 3});
  CHECK(wedge(sum, e3).approx_equal(expect));

  CHECK(wedge(e2, e1).approx_equal((-1.0) * AltForm::axis(4, {1, 2})));
  CHECK_THROWS_AS(wedge(e1, AltForm::axis(3, {1})), ArgumentError);
}

TEST_CASE("wedge is associative and bilinear on random forms") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 4 + static_cast<int>(rng.below(3));
    AltForm a = rand_form(n, 1, rng);
    AltForm b = rand_form(n, 1, rng);
    AltForm c = rand_form(n, 2, rng);
    CHECK(wedge(wedge(a, b), c).approx_equal(wedge(a, wedge(b, c)), 1e-12));
  }
}

TEST_CASE("eval pairs axis forms with coordinate frames") {
  AltForm e12 = AltForm::axis(4, {1, 2});
  Frame f12 = Frame::from_columns(4, {unit(4, 1), unit(4, 2)});
  Frame f21 = Frame::from_columns(4, {unit(4, 2), unit(4, 1)});
  CHECK(eval(e12, f12) == doctest::Approx(1.0));
  CHECK(eval(e12, f21) == doctest::Approx(-1.0));

  AltForm two13 = AltForm::axis(4, {1, 3}, 2.0);
  Eigen::VectorXd mixed = (unit(4, 3) + unit(4, 4)) / std::sqrt(2.0);
  Frame fm = Frame::from_columns(4, {unit(4, 1), mixed});
  CHECK(eval(two13, fm) == doctest::Approx(std::sqrt(2.0)));

  CHECK_THROWS_AS(eval(e12, Frame(Eigen::MatrixXd::Identity(4, 3))),
                  ArgumentError);
}

TEST_CASE("eval satisfies the Laplace expansion against a shuffle oracle") {
  Rng rng(11);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = 3 + static_cast<int>(rng.below(4));  // 3..6
    int p = 1 + static_cast<int>(rng.below(2));
    int q = 1 + static_cast<int>(rng.below(2));
    if (p + q > n) continue;
    AltForm a = rand_form(n, p, rng);
    AltForm b = rand_form(n, q, rng);
    Frame fr = random_frame(n, p + q, rng.next_u64());
    double direct = eval(wedge(a, b), fr);
    double oracle = laplace_oracle(a, b, fr);
    CHECK(direct == doctest::Approx(oracle).epsilon(1e-10));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("gram_norm measures metric volume") {
  MetricPoint id = MetricPoint::identity(4);
  Frame ortho = Frame::from_columns(4, {unit(4, 1), unit(4, 2)});
  CHECK(gram_norm(ortho, id) == doctest::Approx(1.0));

  Frame scaled = Frame::from_columns(4, {2.0 * unit(4, 1), unit(4, 2)});
  CHECK(gram_norm(scaled, id) == doctest::Approx(2.0));

  // 2x2 Gram determinant by hand: det [[1,1],[1,2]] = 1.
  Frame sheared =
      Frame::from_columns(4, {unit(4, 1), unit(4, 1) + unit(4, 2)});
  CHECK(gram_norm(sheared, id) == doctest::Approx(1.0));
}

TEST_CASE("gram_norm scales as f^(p/2) under conformal metric change") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 3 + static_cast<int>(rng.below(4));
    int p = 1 + static_cast<int>(rng.below(n - 1));
    MetricPoint g = rand_spd(n, rng);
    double f = rng.uniform(0.2, 5.0);
    MetricPoint fg(f * g.entries());
    Frame xi(testutil::rand_matrix(n, p, rng));
    if (xi.independence() < 1e-6) continue;
    double lhs = gram_norm(xi, fg);
    double rhs = std::pow(f, p / 2.0) * gram_norm(xi, g);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("degenerate frames are flagged") {
  Eigen::MatrixXd v(3, 2);
  v.col(0) = unit(3, 1);
  v.col(1) = 2.0 * unit(3, 1);
  Frame f(v);
  CHECK(f.independence() <= kDegenerateFrameTol);
  CHECK(gram_norm(f, MetricPoint::identity(3)) <= kDegenerateFrameTol);
  CHECK_THROWS_AS(f.require_independent(), ArgumentError);
}

TEST_CASE("hodge star on axis forms, identity metric") {
  MetricPoint id = MetricPoint::identity(4);
  Frame orient(Eigen::MatrixXd::Identity(4, 4));

  AltForm e12 = AltForm::axis(4, {1, 2});
  CHECK(hodge_star(e12, id, orient).approx_equal(AltForm::axis(4, {3, 4}), 1e-12));

  AltForm one(4, 0);
  one.coeffs()[0] = 1.0;
  CHECK(hodge_star(one, id, orient)
            .approx_equal(AltForm::axis(4, {1, 2, 3, 4}), 1e-12));

  AltForm kahler = AltForm::axis(4, {1, 2}) + AltForm::axis(4, {3, 4});
  CHECK(hodge_star(kahler, id, orient).approx_equal(kahler, 1e-12));
}

TEST_CASE("hodge star squares to (-1)^(p(n-p)) and is an isometry") {
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 3 + static_cast<int>(rng.below(4));
    int p = static_cast<int>(rng.below(n + 1));
    AltForm phi = rand_form(n, p, rng);
    MetricPoint id = MetricPoint::identity(n);
    Frame orient(Eigen::MatrixXd::Identity(n, n));
    AltForm star = hodge_star(phi, id, orient);
    // identity metric: the star is a signed coefficient permutation
    CHECK(star.coeffs().norm() == doctest::Approx(phi.coeffs().norm()).epsilon(1e-12));
    AltForm twice = hodge_star(star, id, orient);
    double sign = (p * (n - p)) % 2 == 0 ? 1.0 : -1.0;
    CHECK(twice.approx_equal(sign * phi, 1e-11));
  }
}

TEST_CASE("hodge star under a general metric still squares correctly") {
  Rng rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 3 + static_cast<int>(rng.below(3));
    int p = static_cast<int>(rng.below(n + 1));
    AltForm phi = rand_form(n, p, rng);
    MetricPoint g = rand_spd(n, rng);
    Frame orient(Eigen::MatrixXd::Identity(n, n));
    AltForm twice = hodge_star(hodge_star(phi, g, orient), g, orient);
    double sign = (p * (n - p)) % 2 == 0 ? 1.0 : -1.0;
    CHECK(twice.approx_equal(sign * phi, 1e-9 * (1 + phi.coeffs().norm())));
  }
}

TEST_CASE("canonical_frame classifies contained and orthogonal planes") {
  MetricPoint id = MetricPoint::identity(4);
  Frame v12 = Frame::from_columns(4, {unit(4, 1), unit(4, 2)});
  Frame v34 = Frame::from_columns(4, {unit(4, 3), unit(4, 4)});

  auto contained = canonical_frame(v12, v12, id);
  CHECK(contained.k == 0);
  CHECK(contained.r == 2);
  CHECK(contained.s == 0);

  auto orthogonal = canonical_frame(v34, v12, id);
  CHECK(orthogonal.k == 0);
  CHECK(orthogonal.r == 0);
  CHECK(orthogonal.s == 2);
}

TEST_CASE("canonical_frame finds the 45 degree angle block") {
  MetricPoint id = MetricPoint::identity(4);
  Eigen::VectorXd diag = (unit(4, 1) + unit(4, 3)) / std::sqrt(2.0);
  Frame xi = Frame::from_columns(4, {diag, unit(4, 2)});
  Frame v = Frame::from_columns(4, {unit(4, 1), unit(4, 2)});

  auto cf = canonical_frame(xi, v, id);
  REQUIRE(cf.k == 1);
  CHECK(cf.r == 2);
  CHECK(cf.s == 1);
  CHECK(cf.angles[0] == doctest::Approx(M_PI / 4).epsilon(1e-10));
  // f1 = +/- e1, g1 = +/- e3 up to the internal sign fix
  CHECK(std::abs(cf.f_vectors.col(0)[0]) == doctest::Approx(1.0));
  CHECK(std::abs(cf.g_vectors.col(0)[2]) == doctest::Approx(1.0));

  Eigen::VectorXd target = plucker(xi, id);
  Eigen::VectorXd got = plucker(cf.reconstruct(), id);
  CHECK((target - got).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("canonical_frame reconstructs 1000 random instances") {
  Rng rng(23);
  int done = 0;
  while (done < 1000) {
    int n = 3 + static_cast<int>(rng.below(4));  // 3..6
    int p = 1 + static_cast<int>(rng.below(n));
    int q = 1 + static_cast<int>(rng.below(n));
    MetricPoint g = (done % 3 == 0) ? rand_spd(n, rng) : MetricPoint::identity(n);
    Eigen::MatrixXd xv = testutil::rand_matrix(n, p, rng);
    Eigen::MatrixXd vv = testutil::rand_matrix(n, q, rng);
    Frame xi(xv);
    if (xi.independence() < 1e-4 || Frame(vv).independence() < 1e-4) continue;
    auto cf = canonical_frame(xi, Frame(vv), g);
    CHECK(cf.r + cf.s - cf.k == p);
    for (double t : cf.angles) {
      CHECK(t > 0.0);
      CHECK(t < M_PI / 2);
    }
    Eigen::VectorXd target = plucker(xi, g);
    Eigen::VectorXd got = plucker(cf.reconstruct(), g);
    REQUIRE((target - got).lpNorm<Eigen::Infinity>() <= 1e-9);
    ++done;
  }
}

TEST_CASE("random_frame is deterministic and orthonormal") {
  Frame a = random_frame(3, 1, 0);
  Frame b = random_frame(3, 1, 0);
  CHECK((a.vectors() - b.vectors()).norm() == 0.0);
  CHECK(a.vectors().col(0).norm() == doctest::Approx(1.0).epsilon(1e-12));

  MetricPoint id = MetricPoint::identity(6);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Frame f = random_frame(6, 3, seed);
    CHECK(gram_norm(f, id) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("random_frame sampler is symmetric: mean pairing with e*_1") {
  AltForm e1 = AltForm::axis(3, {1});
  const long n_samples = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n_samples; ++i) {
    double v = eval(e1, random_frame(3, 1, Rng::derive(99, i)));
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n_samples;
  double sigma = std::sqrt(sumsq / n_samples - mean * mean);
  CHECK(std::abs(mean) <= 3.0 * sigma / std::sqrt(double(n_samples)));
}

TEST_CASE("form invariants: bad inputs are rejected") {
  CHECK_THROWS_AS(AltForm(9, 2), ArgumentError);
  CHECK_THROWS_AS(AltForm(1, 0), ArgumentError);
  CHECK_THROWS_AS(AltForm::axis(4, {2, 1}), ArgumentError);
  AltForm f(4, 2);
  f.coeffs()[0] = std::nan("");
  CHECK_THROWS_AS(f.check_finite(), ArgumentError);

  Eigen::MatrixXd bad(3, 3);
  bad << 1, 0, 0, 0, 1, 0.5, 0, 0, 1;
  CHECK_THROWS_AS(MetricPoint{bad}, ArgumentError);
  Eigen::MatrixXd neg = Eigen::MatrixXd::Identity(3, 3);
  neg(2, 2) = -1.0;
  CHECK_THROWS_AS(MetricPoint{neg}, ArgumentError);
}
