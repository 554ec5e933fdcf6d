#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qbd2d/model_io.hpp"
#include "qbd2d/tail.hpp"

using namespace qbd2d;

static std::string model_path(const char* name) {
  return std::string(QBD2D_MODEL_DIR) + "/" + name;
}

static Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

TEST_CASE("hat block assembly", "[tail]") {
  BlockSet m1 = load_model(model_path("m1.json"));
  HatModel hm = build_hat_model(m1);
  REQUIRE(hm.s0 == 1);

  SECTION("hand-assembled blocks for a scalar-phase model") {
    // interior family: right/up 0.1, left/down 0.3, stay 0.2
    CHECK((hm.A12(-1, 1) - mat2(0, 0, 0.3, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((hm.A12(0, 1) - mat2(0, 0, 0.1, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(hm.A12(1, 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((hm.A12(-1, 0) - mat2(0, 0.3, 0, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((hm.A12(0, 0) - mat2(0.2, 0.1, 0.3, 0.2)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((hm.A12(1, 0) - mat2(0, 0, 0.1, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(hm.A12(-1, -1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((hm.A12(0, -1) - mat2(0, 0.3, 0, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((hm.A12(1, -1) - mat2(0, 0.1, 0, 0)).cwiseAbs().maxCoeff() <= 1e-15);

    // face-2 family: up 0.1, down 0.3, right 0.2, stay 0.4
    for (int j = -1; j <= 1; ++j) CHECK(hm.A2(-1, j).cwiseAbs().maxCoeff() == 0.0);
    CHECK((hm.A2(0, 1) - mat2(0, 0, 0.1, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((hm.A2(0, 0) - mat2(0.4, 0.1, 0.3, 0.4)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((hm.A2(0, -1) - mat2(0, 0.3, 0, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(hm.A2(1, 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((hm.A2(1, 0) - mat2(0, 0, 0.2, 0)).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((hm.A2(1, -1) - mat2(0, 0.2, 0, 0)).cwiseAbs().maxCoeff() <= 1e-15);
  }

  SECTION("row sums and structural zeros across the corpus") {
    for (const char* name : {"m1.json", "m2.json", "tangency.json", "face.json"}) {
      BlockSet bs = load_model(model_path(name));
      HatModel h = build_hat_model(bs);
      const int n = 2 * h.s0;
      Matrix sum12 = Matrix::Zero(n, n), sum2 = Matrix::Zero(n, n);
      for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j) {
          REQUIRE(h.A12(i, j).rows() == n);
          sum12 += h.A12(i, j);
          sum2 += h.A2(i, j);
        }
      CHECK((sum12.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
      CHECK((sum2.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
      CHECK(h.A12(1, 1).cwiseAbs().maxCoeff() == 0.0);
      CHECK(h.A12(-1, -1).cwiseAbs().maxCoeff() == 0.0);
      for (int j = -1; j <= 1; ++j) CHECK(h.A2(-1, j).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("hat return operator at the support point", "[tail]") {
  BlockSet m1 = load_model(model_path("m1.json"));
  const double thmax = theta_c_max(m1, Direction{1, 1}).theta_c_max;
  const double zmax = std::exp(thmax);  // = 9 for this model
  REQUIRE(zmax == Catch::Approx(9.0).margin(1e-7));

  SECTION("unit spectral radius with a wide gap at the branch point") {
    Matrix U = hat_U(m1, zmax);
    CHECK(spectral_radius(U) == Catch::Approx(1.0).margin(1e-6));
    Eigen::EigenSolver<Matrix> es(U);
    double second = 1e300;
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      double m = std::abs(es.eigenvalues()[i]);
      if (m < second) second = m;  // 2x2: the smaller modulus is the gap
    }
    CHECK(second <= 1.0 - 1e-6);
    PerronTriple p = perron(U);
    CHECK(p.u.minCoeff() > 0.0);
    CHECK(p.v.minCoeff() > 0.0);
  }

  SECTION("hat G-matrices carry the tangency ordinate") {
    Triplet t = build_hat_model(m1).triplet12(zmax);
    CHECK(spectral_radius(solve_G(t)) == Catch::Approx(9.0).epsilon(1e-4));
    CHECK(spectral_radius(solve_G(t.swapped())) == Catch::Approx(1.0 / 9.0).epsilon(1e-4));

    BlockSet m2 = load_model(model_path("m2.json"));
    TangencyPoint tp = theta_c_max(m2, Direction{1, 1});
    Matrix G2 = solve_G(build_hat_model(m2).triplet12(std::exp(tp.theta_c_max)));
    CHECK(spectral_radius(G2) == Catch::Approx(std::exp(2.0 * tp.eta2)).epsilon(1e-5));
  }

  SECTION("strict contraction inside the interval, log-convex in theta") {
    CHECK(spectral_radius(hat_U(m1, 5.0)) < 1.0 - 1e-6);
    CHECK(spectral_radius(hat_U(m1, 3.0)) < 0.8);
    for (int i = 0; i < 9; ++i) {
      double a = 0.45 + 0.19 * i, b = a + 0.19;
      double fa = std::log(spectral_radius(hat_U(m1, std::exp(a))));
      double fb = std::log(spectral_radius(hat_U(m1, std::exp(b))));
      double fm = std::log(spectral_radius(hat_U(m1, std::exp(0.5 * (a + b)))));
      CHECK(fm <= 0.5 * (fa + fb) + 1e-9);
    }
  }

  SECTION("nonpositive argument is rejected") {
    CHECK_THROWS_MATCHES(hat_U(m1, -1.0), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::InvalidArgument;
                         }));
  }
}

TEST_CASE("hat fundamental matrix", "[tail]") {
  BlockSet m1 = load_model(model_path("m1.json"));

  SECTION("matches the Neumann series and is nonnegative") {
    const double z = 3.0;
    Matrix U = hat_U(m1, z);
    REQUIRE(spectral_radius(U) < 0.8);
    Matrix phi = hat_Phi00(m1, z);
    CHECK(phi.minCoeff() >= 0.0);

    Matrix term = Matrix::Identity(2, 2), acc = Matrix::Zero(2, 2);
    for (int n = 0; n <= 200; ++n) {
      acc += term;
      term = term * U;
    }
    CHECK((phi - acc).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(((Matrix::Identity(2, 2) - U) * phi - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          1e-12);
  }

  SECTION("refuses the branch point itself") {
    CHECK_THROWS_MATCHES(hat_Phi00(m1, 9.0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::SpectralRadiusAtLeastOne;
                         }));
  }
}

TEST_CASE("branch factor of the hat fundamental matrix", "[tail]") {
  BlockSet m1 = load_model(model_path("m1.json"));
  const double zmax = 9.0;
  const double ghat = prefactor_ghat_phi(m1);
  REQUIRE(ghat > 0.0);

  SECTION("one-sided limit of the scaled resolvent is ghat * v u") {
    PerronTriple p = perron(hat_U(m1, zmax));
    Matrix vu = ghat * (p.v * p.u);
    auto scaled = [&](double off) {
      double z = zmax * (1.0 - off);
      return Matrix(std::sqrt(zmax - z) * hat_Phi00(m1, z));
    };
    Matrix P1 = scaled(1e-6);
    CHECK(((P1 - vu).array().abs() / vu.array().abs()).maxCoeff() <= 1e-2);

    // the finite-offset matrix still carries an O(sqrt(offset)) transverse
    // component; the two-point extrapolation cancels it exactly, leaving the
    // rank-one limit
    Matrix Pex = 2.0 * P1 - scaled(4e-6);
    Eigen::JacobiSVD<Matrix> svd(Pex);
    CHECK(svd.singularValues()(1) <= 1e-5 * svd.singularValues()(0));
    Eigen::JacobiSVD<Matrix> svd1(P1);
    CHECK(svd1.singularValues()(1) <= 1e-3 * svd1.singularValues()(0));
  }

  SECTION("square-root coefficient of the hat G-matrix matches finite differences") {
    HatModel hm = build_hat_model(m1);
    TripletFamily fam = [&](double z) { return hm.triplet12(z); };
    BranchLimit bl = branch_limit_matrices(fam, std::log(zmax));
    CHECK(bl.alpha < 0.0);
    CHECK(bl.G1.maxCoeff() <= 1e-12);
    const double h = 9e-6;
    Matrix fd = (solve_G(hm.triplet12(zmax - h)) - solve_G(hm.triplet12(zmax))) / std::sqrt(h);
    CHECK((fd - bl.G1).cwiseAbs().maxCoeff() <= 1e-2 * bl.G1.cwiseAbs().maxCoeff());
  }

  SECTION("positive for every stable fixture with a diagonal tangency") {
    CHECK(prefactor_ghat_phi(load_model(model_path("m2.json"))) > 0.0);
    CHECK(prefactor_ghat_phi(load_model(model_path("tangency.json"))) > 0.0);
  }
}

TEST_CASE("decay rates across directions", "[tail]") {
  BlockSet m1 = load_model(model_path("m1.json"));
  GammaGeometry g = analyze_geometry(m1);
  const double ln3 = std::log(3.0);

  SECTION("diagonal tie sits exactly at the support value") {
    TailAsymptotics ta = decay_rate(m1, g, Direction{1, 1});
    CHECK(ta.xi_c == Catch::Approx(2.0 * ln3).margin(1e-8));
    CHECK(ta.regime == Regime::TangencyBoundary1);
    CHECK(ta.power_exponent == 0.0);
    CHECK_FALSE(ta.prefactor.has_value());

    TailAsymptotics ta2 = decay_rate(m1, g, Direction{2, 2});
    CHECK(ta2.xi_c == Catch::Approx(2.0 * ta.xi_c).margin(1e-9));
    CHECK(ta2.regime == Regime::TangencyBoundary1);
  }

  SECTION("off-diagonal directions are face-dominant with strict slack") {
    TailAsymptotics t12 = decay_rate(m1, g, Direction{1, 2});
    CHECK(t12.regime == Regime::Face2Dominant);
    CHECK(t12.xi_c == Catch::Approx(3.0 * ln3).margin(1e-8));
    CHECK(t12.xi_c <= theta_c_max(m1, Direction{1, 2}).theta_c_max - 0.05);

    TailAsymptotics t21 = decay_rate(m1, g, Direction{2, 1});
    CHECK(t21.regime == Regime::Face1Dominant);
    CHECK(t21.xi_c == Catch::Approx(3.0 * ln3).margin(1e-8));

    TailAsymptotics t31 = decay_rate(m1, g, Direction{3, 1});
    CHECK(t31.regime == Regime::Face1Dominant);
    CHECK(t31.xi_c == Catch::Approx(4.0 * ln3).margin(1e-8));
    CHECK(t31.xi_c <= theta_c_max(m1, Direction{3, 1}).theta_c_max - 0.05);
  }

  SECTION("degenerate directions are rejected") {
    for (Direction c : {Direction{0, 1}, Direction{1, 0}, Direction{-1, 2}}) {
      CHECK_THROWS_MATCHES(decay_rate(m1, g, c), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::InvalidArgument;
                           }));
    }
  }
}

TEST_CASE("decay function regimes on the fixture corpus", "[tail]") {
  SECTION("strict tangency keeps the square-root power term") {
    BlockSet tan = load_model(model_path("tangency.json"));
    GammaGeometry g = analyze_geometry(tan);
    TailAsymptotics ta = decay_function(tan, g, Direction{1, 1});
    CHECK(ta.regime == Regime::TangencyInterior);
    CHECK(ta.power_exponent == -0.5);
    CHECK(ta.xi_c == Catch::Approx(2.0 * std::log(3.0)).margin(1e-8));

    // same interior family as m1, so the (1,2) support values agree
    BlockSet m1 = load_model(model_path("m1.json"));
    TailAsymptotics t12 = decay_function(tan, g, Direction{1, 2});
    CHECK(t12.regime == Regime::TangencyInterior);
    CHECK(t12.xi_c ==
          Catch::Approx(theta_c_max(m1, Direction{1, 2}).theta_c_max).margin(1e-8));
  }

  SECTION("attracting face flattens the power term") {
    BlockSet face = load_model(model_path("face.json"));
    GammaGeometry g = analyze_geometry(face);
    TailAsymptotics ta = decay_function(face, g, Direction{1, 1});
    CHECK(g.model_type == ModelType::Type3);
    CHECK(ta.regime == Regime::Face2Dominant);
    CHECK(ta.power_exponent == 0.0);
    CHECK(ta.xi_c == Catch::Approx(g.q2_theta1 + g.q2_theta2).margin(1e-12));
    CHECK(ta.xi_c > 1.2);
    CHECK(ta.xi_c < 1.5);
    CHECK(ta.xi_c <= theta_c_max(face, Direction{1, 1}).theta_c_max - 0.5);
  }

  SECTION("multi-phase model keeps the tangency form") {
    BlockSet m2 = load_model(model_path("m2.json"));
    GammaGeometry g = analyze_geometry(m2);
    TailAsymptotics ta = decay_function(m2, g, Direction{1, 1});
    CHECK(ta.regime == Regime::TangencyInterior);
    CHECK(ta.power_exponent == -0.5);
    CHECK(ta.xi_c == Catch::Approx(theta_c_max(m2, Direction{1, 1}).theta_c_max).margin(1e-9));
    TailAsymptotics ta2 = decay_function(m2, g, Direction{2, 2});
    CHECK(ta2.xi_c == Catch::Approx(2.0 * ta.xi_c).margin(1e-9));
  }
}

TEST_CASE("decay rate continuity under block perturbation", "[tail]") {
  auto perturbed = [](const char* name, double delta) {
    nlohmann::json j = model_to_json(load_model(model_path(name)));
    auto& interior = j["blocks"]["interior"];
    interior["1,0"][0][0] = double(interior["1,0"][0][0]) + delta;
    interior["0,0"][0][0] = double(interior["0,0"][0][0]) - delta;
    return parse_model(j.dump());
  };

  BlockSet tan = load_model(model_path("tangency.json"));
  double base = decay_function(tan, analyze_geometry(tan), Direction{1, 1}).xi_c;
  for (double delta : {1e-8, -1e-8}) {
    BlockSet p = perturbed("tangency.json", delta);
    TailAsymptotics ta = decay_function(p, analyze_geometry(p), Direction{1, 1});
    CHECK(ta.regime == Regime::TangencyInterior);
    CHECK(std::abs(ta.xi_c - base) <= 1e-5);
  }

  // at the m1 double tie the regime label may flip but the rate cannot move
  BlockSet p = perturbed("m1.json", 1e-8);
  TailAsymptotics ta = decay_function(p, analyze_geometry(p), Direction{1, 1});
  CHECK(std::abs(ta.xi_c - 2.0 * std::log(3.0)) <= 1e-5);
}

TEST_CASE("prefactor vector guards", "[tail]") {
  BlockSet m1 = load_model(model_path("m1.json"));
  BlockSet tan = load_model(model_path("tangency.json"));

  BoundaryGF ok;
  ok.nu00 = RowVector::Constant(1, 0.05);
  ok.phi1 = RowVector::Constant(1, 0.2);
  ok.phi2 = RowVector::Constant(1, 0.2);
  ok.tail_bound = 1e-12;

  SECTION("tie regime is refused") {
    CHECK_THROWS_MATCHES(prefactor_vector(m1, ok), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::NotTangencyRegime;
                         }));
  }

  SECTION("unusable boundary data is refused") {
    auto code_is = [](ErrorCode c) {
      return Catch::Matchers::Predicate<Error>([c](const Error& e) { return e.code() == c; });
    };
    BoundaryGF bad = ok;
    bad.phi1(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_MATCHES(prefactor_vector(tan, bad), Error,
                         code_is(ErrorCode::BoundaryGFNotConverged));
    bad = ok;
    bad.phi2 = RowVector::Constant(2, 0.1);
    CHECK_THROWS_MATCHES(prefactor_vector(tan, bad), Error,
                         code_is(ErrorCode::BoundaryGFNotConverged));
    bad = ok;
    bad.nu00(0) = -0.1;
    CHECK_THROWS_MATCHES(prefactor_vector(tan, bad), Error,
                         code_is(ErrorCode::BoundaryGFNotConverged));
  }
}
