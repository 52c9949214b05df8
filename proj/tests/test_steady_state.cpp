#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "polsqz/steady_state.hpp"

using namespace polsqz;

namespace {

SystemParams params_for_delta0(double delta0, double delta = 20.0) {
  SystemParams p;
  p.delta = delta;
  p.n_atoms = delta0 * p.cavity_T * (delta * delta + 1.0) / delta;
  return p;
}

}  // namespace

TEST_CASE("symmetric drive: excited populations follow S/(1+S)") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const double s = 0.3;
  const AtomicMeans m = atomic_steady_state(s, s, sc);
  const double N = sc.n_atoms;
  CHECK(m.n3 == Catch::Approx(N / 4.0 * s / (1.0 + s)).epsilon(1e-13));
  CHECK(m.n4 == Catch::Approx(m.n3).epsilon(1e-14));
  CHECK(m.n1 == Catch::Approx(m.n2).epsilon(1e-13));
}

TEST_CASE("one-sided drive pumps all atoms into the dark ground state") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const AtomicMeans m = atomic_steady_state(0.4, 1e-12, sc);
  CHECK(m.n1 < 1e-9 * sc.n_atoms);
  CHECK(m.n2 == Catch::Approx(sc.n_atoms).epsilon(1e-9));
  CHECK(m.n3 < 1e-9 * sc.n_atoms);
}

TEST_CASE("zero drive is a defined error") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  CHECK_THROWS_AS(atomic_steady_state(0.0, 0.0, sc), physics_error);
}

TEST_CASE("populations always sum to N") {
  const SystemParams p = params_for_delta0(7.0);
  const DerivedScales sc = derive_scales(p);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(1e-4, 3.0);
  for (int i = 0; i < 40; ++i) {
    const AtomicMeans m = atomic_steady_state(u(rng), u(rng), sc);
    CHECK(m.n1 + m.n2 + m.n3 + m.n4 ==
          Catch::Approx(sc.n_atoms).epsilon(1e-13));
  }
}

TEST_CASE("closed-form atomic state matches Bloch relaxation") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const double d2g2 = sqr(sc.delta_abs) + sqr(sc.gamma);
  const double sp = 0.2, sm = 0.1;
  const cplx ap(-std::sqrt(sp * d2g2 / (2.0 * sc.g2)), 0.0);
  const cplx am(std::sqrt(sm * d2g2 / (2.0 * sc.g2)), 0.0);
  const AtomicMeans m = atomic_means_from_amplitudes(ap, am, sc);
  const oracles::BlochState b = oracles::bloch_relax(ap, am, sc);
  const double tol = 1e-8 * sc.n_atoms;
  CHECK(std::abs(m.n1 - b.n1) < tol);
  CHECK(std::abs(m.n2 - b.n2) < tol);
  CHECK(std::abs(m.n3 - b.n3) < tol);
  CHECK(std::abs(m.n4 - b.n4) < tol);
  CHECK(std::abs(m.m14 - b.m14) < tol);
  CHECK(std::abs(m.m23 - b.m23) < tol);
}

TEST_CASE("dephasings: symmetric case collapses to delta_l") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const Dephasings d = dephasings_from(0.4, 0.0, sc);
  CHECK(d.delta_plus == Catch::Approx(sc.delta0 / 1.4).epsilon(1e-14));
  CHECK(d.delta_minus == Catch::Approx(d.delta_plus).epsilon(1e-14));
}

TEST_CASE("dephasings: sigma+ dominant pumping empties the + transition") {
  // x_sr = (s- - s+)/(s+ + s-) = -1 when sigma+ dominates; the dominant
  // component then sees no atoms (delta+ = 0) while the weak sigma- component
  // sees them all (delta- = 2 delta0).
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const Dephasings d = dephasings_from(0.0, -1.0, sc);
  CHECK(d.delta_plus == Catch::Approx(0.0).margin(1e-14));
  CHECK(d.delta_minus == Catch::Approx(2.0 * sc.delta0).epsilon(1e-14));
}

TEST_CASE("dephasings: fixed regression vector") {
  // S = 1, x_sr = 0.5, delta0 = 5: delta_l = 2.5, delta_sr = 1.25, so the
  // split is delta(+-) = delta_l (1 +- x_sr) = {3.75, 1.25}.
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const Dephasings d = dephasings_from(1.0, 0.5, sc);
  CHECK(d.delta_l == Catch::Approx(2.5).epsilon(1e-14));
  CHECK(d.delta_sr == Catch::Approx(1.25).epsilon(1e-14));
  CHECK(d.delta_plus == Catch::Approx(3.75).epsilon(1e-14));
  CHECK(d.delta_minus == Catch::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("linear branch: zero drive has the single root S = 0") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const auto roots = linear_branch_roots(3.0, 0.0, sc);
  REQUIRE(roots.size() == 1);
  CHECK(roots[0] == 0.0);
}

TEST_CASE("linear branch: three roots inside the bistable window") {
  const SystemParams p = params_for_delta0(7.0);
  const DerivedScales sc = derive_scales(p);
  const auto roots = linear_branch_roots(2.6, 2.0, sc);
  REQUIRE(roots.size() == 3);
  CHECK(roots[0] < roots[1]);
  CHECK(roots[1] < roots[2]);
  CHECK(roots[2] == Catch::Approx(1.5).margin(0.1));
}

TEST_CASE("linear branch: working point A of the squeezing study") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const auto roots = linear_branch_roots(4.6, 0.1, sc);
  REQUIRE(roots.size() == 1);
  CHECK(roots[0] == Catch::Approx(0.065).epsilon(0.10));
}

TEST_CASE("linear branch roots satisfy the fixed point to 1e-10 s_max") {
  const SystemParams p = params_for_delta0(7.0);
  const DerivedScales sc = derive_scales(p);
  for (double dc : {-1.0, 0.3, 2.6, 4.0, 5.6, 8.0}) {
    for (double s_max : {0.01, 0.5, 2.0, 10.0}) {
      for (double S : linear_branch_roots(dc, s_max, sc)) {
        const double al = sc.alpha0 / (1.0 + S);
        const double dl = sc.delta0 / (1.0 + S);
        const double res =
            std::abs(S * (sqr(1.0 + al) + sqr(dl - dc)) - s_max);
        CHECK(res < 1e-10 * s_max);
      }
    }
  }
}

TEST_CASE("elliptical solve: empty when the existence criterion fails") {
  const SystemParams p = params_for_delta0(1.0);  // delta0 too small
  const DerivedScales sc = derive_scales(p);
  CHECK(elliptical_branch_solve(3.0, 0.5, sc).empty());
}

TEST_CASE("elliptical solve: sigma+ dominant branch rides the Airy peak") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const auto sols = elliptical_branch_solve(1.0, 0.01, sc);
  REQUIRE_FALSE(sols.empty());
  bool found = false;
  for (const auto& st : sols) {
    if (st.x_sr > -0.9) continue;  // want the strongly sigma+ dominant one
    found = true;
    const Dephasings d = dephasings(st, sc);
    CHECK(d.delta_plus < 0.5);  // dominant component sees almost no atoms
    const double airy = 0.01 / (1.0 + sqr(st.delta_c));
    CHECK(st.s_plus / airy > 0.6);
    CHECK(st.s_plus / airy < 1.4);
  }
  CHECK(found);
}

TEST_CASE("elliptical solve: two coexisting pairs in the tristability window") {
  const SystemParams p = params_for_delta0(7.0);
  const DerivedScales sc = derive_scales(p);
  const auto sols = elliptical_branch_solve(4.0, 2.0, sc);
  CHECK(sols.size() == 4);  // two (S, +-x) pairs
}

TEST_CASE("elliptical solutions come in exact +-x pairs and satisfy the fixed point") {
  const SystemParams p = params_for_delta0(7.0);
  const DerivedScales sc = derive_scales(p);
  for (double dc : {3.0, 4.0, 5.0}) {
    const auto sols = elliptical_branch_solve(dc, 2.0, sc);
    REQUIRE(sols.size() % 2 == 0);
    for (std::size_t i = 0; i + 1 < sols.size(); i += 2) {
      CHECK(sols[i].x_sr == Catch::Approx(-sols[i + 1].x_sr).epsilon(1e-12));
      CHECK(sols[i].S == Catch::Approx(sols[i + 1].S).epsilon(1e-12));
    }
    for (const auto& st : sols) {
      CHECK(fixed_point_residual(st, sc) < 1e-8);
      CHECK(criterion_ex(st.S, sc, dc) >= 0.0);
      CHECK(std::abs(st.x_sr + std::sin(2.0 * st.ellipticity)) < 1e-12);
    }
  }
}

TEST_CASE("criteria: zero-saturation threshold is sqrt(delta0^2 - 1)") {
  const SystemParams p = params_for_delta0(5.0, 1e9);  // alpha0 -> 0
  const DerivedScales sc = derive_scales(p);
  CHECK(std::abs(criterion_ps(0.0, sc, std::sqrt(24.0))) < 1e-6);
  CHECK(criterion_ps(0.0, sc, 1e6) < -1e11);
}

TEST_CASE("ps threshold intensity") {
  const SystemParams clean = params_for_delta0(5.0, 1e9);
  const DerivedScales sc0 = derive_scales(clean);
  const auto s0 = ps_threshold_intensity(0.0, sc0);
  REQUIRE(s0.has_value());
  CHECK(*s0 == Catch::Approx(4.0).epsilon(1e-6));

  const SystemParams fig3 = params_for_delta0(7.0);
  const DerivedScales sc3 = derive_scales(fig3);
  const auto s3 = ps_threshold_intensity(2.6, sc3);
  REQUIRE(s3.has_value());
  CHECK(*s3 == Catch::Approx(1.5).margin(0.1));

  CHECK_FALSE(ps_threshold_intensity(
                  std::sqrt(sqr(sc3.delta0) + sqr(sc3.alpha0) - 1.0) + 0.01,
                  sc3)
                  .has_value());
}

TEST_CASE("make_state reproduces the requested saturation at solver roots") {
  const SystemParams p = params_for_delta0(7.0);
  const DerivedScales sc = derive_scales(p);
  const double d2g2 = sqr(sc.delta_abs) + sqr(sc.gamma);
  for (double S : linear_branch_roots(4.0, 2.0, sc)) {
    const SteadyState st = make_linear_state(S, 4.0, 2.0, sc);
    const double sp = 2.0 * sc.g2 * std::norm(st.a_plus) / d2g2;
    CHECK(sp == Catch::Approx(st.s_plus).epsilon(1e-9));
    CHECK(std::abs(st.a_x().imag()) < 1e-12 * std::abs(st.a_x()));
    CHECK(st.a_x().real() >= 0.0);
  }
}
