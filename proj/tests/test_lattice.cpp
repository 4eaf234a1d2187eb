#include <doctest.h>

#include <cmath>
#include <random>

#include "mcflow/crystal.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/lattice.hpp"
#include "mcflow/torus.hpp"
#include "oracles.hpp"

using namespace mcflow;

namespace {

LatticeParams cubic(double a) { return {Vec3::Constant(a), Vec3::Constant(90)}; }

LatticeParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> len(2.0, 8.0), ang(65.0, 115.0);
  while (true) {
    LatticeParams p{{len(rng), len(rng), len(rng)}, {ang(rng), ang(rng), ang(rng)}};
    if (cell_volume(p) > 0.3 * p.a() * p.b() * p.c())
      return p;
  }
}

} // namespace

TEST_CASE("wrap01 stays in [0,1)") {
  CHECK(wrap01(1.0) == 0.0);
  CHECK(wrap01(-0.25) == doctest::Approx(0.75));
  CHECK(wrap01(-1e-18) == 0.0);
  CHECK(wrap01(2.5) == doctest::Approx(0.5));
}

TEST_CASE("torus log picks the short arc and matches the atan2 form") {
  CHECK(torus_log(0.9, 0.1) == doctest::Approx(0.2));
  CHECK(torus_log(0.1, 0.9) == doctest::Approx(-0.2));
  CHECK(torus_log(0.0, 0.5) == 0.5);
  CHECK(torus_log(0.5, 0.0) == 0.5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    double f = u(rng), g = u(rng);
    double d = g - f;
    double ref = std::atan2(std::sin(2 * M_PI * d), std::cos(2 * M_PI * d)) / (2 * M_PI);
    CHECK(torus_log(f, g) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("torus exp crosses the boundary") {
  CHECK(torus_exp(0.95, 0.1) == doctest::Approx(0.05));
  CHECK(torus_exp(0.05, -0.1) == doctest::Approx(0.95));
}

TEST_CASE("lattice parameters and matrices") {
  SUBCASE("cubic matrix is diagonal") {
    LatticeMatrix m = params_to_matrix(cubic(4));
    CHECK((m - 4 * LatticeMatrix::Identity()).norm() < 1e-12);
    CHECK(cell_volume(m) == doctest::Approx(64));
  }
  SUBCASE("round trip") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
      LatticeParams p = random_params(rng);
      LatticeParams q = matrix_to_params(params_to_matrix(p));
      CHECK((p.lengths - q.lengths).norm() < 1e-10);
      CHECK((p.angles - q.angles).norm() < 1e-9);
    }
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(validate_lattice({Vec3(1, 1, 0), Vec3::Constant(90)}), InvalidLattice);
    CHECK_THROWS_AS(validate_lattice({Vec3::Ones(), Vec3(90, 90, 121)}), InvalidLattice);
    CHECK_THROWS_AS(validate_lattice({Vec3::Ones(), Vec3(120, 120, 121)}), InvalidLattice);
    CHECK_NOTHROW(validate_lattice({Vec3::Ones(), Vec3(60, 60, 60)}));
  }
  SUBCASE("volume from parameters and matrix agree") {
    LatticeParams p{{3, 4, 5}, {80, 95, 105}};
    CHECK(cell_volume(p) == doctest::Approx(cell_volume(params_to_matrix(p))).epsilon(1e-12));
  }
}

TEST_CASE("Niggli reduction") {
  SUBCASE("already reduced cubic cell is a fixed point") {
    NiggliResult r = niggli_reduce(params_to_matrix(cubic(3)));
    CHECK((r.reduced - 3 * LatticeMatrix::Identity()).norm() < 1e-12);
  }
  SUBCASE("skewed basis of a cubic lattice reduces to the cube") {
    LatticeMatrix m = params_to_matrix(cubic(2));
    IntMatrix3 t;
    t << 1, 2, 0, 0, 1, 1, 1, 2, 1;
    LatticeMatrix skew = t.cast<double>() * m;
    NiggliResult r = niggli_reduce(skew);
    LatticeParams p = matrix_to_params(r.reduced);
    CHECK((p.lengths - Vec3::Constant(2)).norm() < 1e-9);
    CHECK((p.angles - Vec3::Constant(90)).norm() < 1e-7);
    CHECK(std::abs(r.change_of_basis.cast<double>().determinant()) == doctest::Approx(1));
    CHECK((r.change_of_basis.cast<double>() * skew - r.reduced).norm() < 1e-9);
  }
  SUBCASE("fcc primitive cell stays at 60 degrees") {
    NiggliResult r = niggli_reduce(params_to_matrix({Vec3::Constant(3), Vec3::Constant(60)}));
    LatticeParams p = matrix_to_params(r.reduced);
    CHECK((p.angles - Vec3::Constant(60)).norm() < 1e-7);
  }
  SUBCASE("agrees with brute force on a few random cells") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 3; ++i) {
      LatticeMatrix m = params_to_matrix(random_params(rng));
      bool found = false;
      auto ref = oracle::brute_force_niggli(m, found);
      REQUIRE(found);
      auto got = oracle::params_of(niggli_reduce(m).reduced);
      for (int k = 0; k < 6; ++k)
        CHECK(got[k] == doctest::Approx(ref[k]).epsilon(1e-6));
      CHECK(oracle::is_niggli(oracle::g6(niggli_reduce(m).reduced), 1e-6));
    }
  }
  SUBCASE("degenerate input throws") {
    LatticeMatrix m;
    m << 1, 0, 0, 0, 1, 0, 1, 1, 0;
    CHECK_THROWS_AS(niggli_reduce(m), InvalidLattice);
  }
}

TEST_CASE("crystal geometry") {
  Crystal c;
  c.atom_types = {11, 17};
  c.frac_coords = {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)};
  c.lattice = cubic(4);
  CHECK_NOTHROW(validate_crystal(c));
  CHECK(min_periodic_distance(c) == doctest::Approx(std::sqrt(12.0)));
  CHECK(min_self_image_distance(c.lattice) == doctest::Approx(4));

  SUBCASE("distance across the boundary uses the nearest image") {
    Crystal d = c;
    d.frac_coords = {Vec3(0.02, 0.5, 0.5), Vec3(0.98, 0.5, 0.5)};
    CHECK(min_periodic_distance(d) == doctest::Approx(0.16));
  }
  SUBCASE("single site has no pair distance") {
    Crystal one = c;
    one.atom_types = {26};
    one.frac_coords = {Vec3::Zero()};
    CHECK(std::isinf(min_periodic_distance(one)));
  }
  SUBCASE("coordinate 1.0 is rejected naming the site") {
    Crystal bad = c;
    bad.frac_coords[1][2] = 1.0;
    try {
      validate_crystal(bad);
      FAIL("expected InvalidData");
    } catch (const InvalidData& e) {
      CHECK(std::string(e.what()).find("site 1") != std::string::npos);
    }
  }
  SUBCASE("composition and permutation") {
    CHECK(composition(c) == std::map<int, int>{{11, 1}, {17, 1}});
    Crystal p = permute_sites(c, {1, 0});
    CHECK(p.atom_types == std::vector<int>{17, 11});
    CHECK(p.frac_coords[0] == c.frac_coords[1]);
  }
  SUBCASE("wide image search for skewed cells") {
    CHECK(image_search_range(cubic(4)) == 1);
    CHECK(image_search_range({Vec3(2, 2, 7), Vec3::Constant(90)}) == 2);
    CHECK(image_search_range({Vec3::Constant(3), Vec3(60, 60, 60)}) == 2);
  }
}

TEST_CASE("worked geometry examples") {
  CHECK(torus_exp(0.5, 0.7) == doctest::Approx(0.2));
  CHECK(torus_exp(0.37, 0) == 0.37);
  CHECK(torus_log(0.37, 0.37) == 0);
  CHECK(cell_volume(LatticeParams{{3, 4, 5}, Vec3::Constant(90)}) == doctest::Approx(60));

  Crystal c;
  c.atom_types = {26, 26};
  c.frac_coords = {Vec3::Zero(), Vec3(0.5, 0, 0)};
  c.lattice = cubic(4);
  CHECK(min_periodic_distance(c) == doctest::Approx(2.0));
  c.frac_coords[1] = Vec3(0.95, 0, 0);
  CHECK(min_periodic_distance(c) == doctest::Approx(0.2));

  c.lattice = cubic(2);
  c.frac_coords[1] = Vec3(0.5, 0.5, 0.5);
  Eigen::Matrix3Xd cart = frac_to_cart(c);
  CHECK(cart.col(0).norm() == 0);
  CHECK((cart.col(1) - Vec3(1, 1, 1)).norm() < 1e-12);

  SUBCASE("triclinic positions match a direct product") {
    c.lattice = LatticeParams{{3, 4, 5}, {70, 100, 110}};
    c.frac_coords[1] = Vec3(0.2, 0.7, 0.4);
    LatticeMatrix m = params_to_matrix(c.lattice);
    Vec3 ref = 0.2 * m.row(0).transpose() + 0.7 * m.row(1).transpose() + 0.4 * m.row(2).transpose();
    CHECK((frac_to_cart(c).col(1) - ref).norm() < 1e-12);
  }
  SUBCASE("angles of a sheared matrix") {
    LatticeMatrix m;
    m << 2, 0, 0, 1, 3, 0, 0.5, -1, 4;
    LatticeParams p = matrix_to_params(m);
    Vec3 a = m.row(0), b = m.row(1), cc = m.row(2);
    CHECK(p.angles[0] == doctest::Approx(rad2deg(std::acos(b.dot(cc) / b.norm() / cc.norm()))));
    CHECK(p.angles[1] == doctest::Approx(rad2deg(std::acos(a.dot(cc) / a.norm() / cc.norm()))));
    CHECK(p.angles[2] == doctest::Approx(rad2deg(std::acos(a.dot(b) / a.norm() / b.norm()))));
    Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    LatticeParams q = matrix_to_params(m * rot.transpose());
    CHECK((p.lengths - q.lengths).norm() < 1e-12);
    CHECK((p.angles - q.angles).norm() < 1e-10);
  }
}
