#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <string>

#include "qbd2d/model.hpp"
#include "qbd2d/model_io.hpp"

using namespace qbd2d;

static std::string model_path(const char* name) {
  return std::string(QBD2D_MODEL_DIR) + "/" + name;
}

TEST_CASE("m1 loads and validates") {
  BlockSet bs = load_model(model_path("m1.json"));
  REQUIRE(bs.phases() == 1);
  CHECK(bs.block(Region::Interior, 1, 0)(0, 0) == 0.1);
  CHECK(bs.block(Region::Interior, -1, 0)(0, 0) == 0.3);
  CHECK(bs.block(Region::Face1, 0, 1)(0, 0) == 0.2);
  CHECK(bs.block(Region::Origin, 0, 0)(0, 0) == 0.4);
  CHECK(bs.block(Region::Origin, -1, 0).isZero(0.0));
  ValidationReport rep = validate(bs);
  CHECK(rep.violations.empty());
  CHECK(rep.irreducibility == Verdict::Pass);
  CHECK(rep.ok());
}

TEST_CASE("m2 loads and validates") {
  BlockSet bs = load_model(model_path("m2.json"));
  REQUIRE(bs.phases() == 2);
  ValidationReport rep = validate(bs);
  CHECK(rep.violations.empty());
  CHECK(rep.irreducibility == Verdict::Pass);
}

TEST_CASE("bad fixtures are rejected") {
  SECTION("row sum off") {
    BlockSet bs = load_model(model_path("bad_rowsum.json"));
    ValidationReport rep = validate(bs);
    REQUIRE_FALSE(rep.violations.empty());
    CHECK(rep.violations[0].kind == "NonStochasticRow");
  }
  SECTION("support violation") {
    BlockSet bs = load_model(model_path("bad_support.json"));
    ValidationReport rep = validate(bs);
    REQUIRE_FALSE(rep.violations.empty());
    CHECK(rep.violations[0].kind == "ForbiddenSupport");
  }
  SECTION("unknown top-level key") {
    CHECK_THROWS_MATCHES(load_model(model_path("bad_schema.json")), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == ErrorCode::ParseError; }));
  }
  SECTION("malformed JSON") {
    CHECK_THROWS_AS(load_model(model_path("bad_json.json")), Error);
  }
  SECTION("inline schema violations") {
    CHECK_THROWS_AS(parse_model(std::string(R"({"phases": 1, "blocks": {"middle": {}}})")),
                    Error);
    CHECK_THROWS_AS(
        parse_model(std::string(R"({"phases": 1, "blocks": {"interior": {"2,0": [[1.0]]}}})")),
        Error);
    CHECK_THROWS_AS(
        parse_model(std::string(R"({"phases": 2, "blocks": {"interior": {"0,0": [[1.0]]}}})")),
        Error);
    CHECK_THROWS_AS(parse_model(std::string(R"({"phases": 0, "blocks": {}})")), Error);
    CHECK_THROWS_AS(parse_model(std::string(R"([1,2,3])")), Error);
  }
}

TEST_CASE("model JSON round trip") {
  BlockSet bs = load_model(model_path("m2.json"));
  BlockSet back = parse_model(model_to_json(bs));
  for (int r = 0; r < 4; ++r)
    for (int i1 = -1; i1 <= 1; ++i1)
      for (int i2 = -1; i2 <= 1; ++i2)
        CHECK((bs.block(Region(r), i1, i2) - back.block(Region(r), i1, i2)).cwiseAbs().maxCoeff() ==
              0.0);
}

TEST_CASE("generating function values for m1") {
  BlockSet bs = load_model(model_path("m1.json"));
  CHECK(std::abs(bs.gf(Region::Interior, 1.0, 1.0)(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(bs.gf(Region::Interior, 3.0, 3.0)(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(bs.gf(Region::Interior, 1.0, 3.0)(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(bs.gf(Region::Interior, 2.0, 1.0)(0, 0) - (0.2 + 0.2 + 0.15 + 0.3 + 0.1)) <
        1e-15);
}

TEST_CASE("normalization fixes near-stochastic rows") {
  BlockSet bs = load_model(model_path("bad_rowsum.json"));
  BlockSet fixed = normalized(bs);
  ValidationReport rep = validate(fixed, 1e-15);
  CHECK(rep.violations.empty());
}

TEST_CASE("interior triplets of m1") {
  BlockSet bs = load_model(model_path("m1.json"));
  Triplet t = bs.interior_triplet(1, 1.0);  // level = x2
  CHECK(std::abs(t.down(0, 0) - 0.3) < 1e-15);
  CHECK(std::abs(t.stay(0, 0) - 0.6) < 1e-15);
  CHECK(std::abs(t.up(0, 0) - 0.1) < 1e-15);
  Triplet t3 = bs.interior_triplet(1, 3.0);
  CHECK(std::abs(t3.stay(0, 0) - (0.2 + 0.3 + 0.3 / 3.0)) < 1e-15);
}

TEST_CASE("MA kernels of m1") {
  BlockSet bs = load_model(model_path("m1.json"));
  MAKernel1D k1 = build_ma_kernel(bs, 1);
  CHECK(k1.boundary[2][0](0, 0) == 0.1);   // d=+1, stay at level 0
  CHECK(k1.boundary[0][0](0, 0) == 0.3);   // d=-1
  CHECK(k1.boundary[1][1](0, 0) == 0.2);   // d=0, level up
  CHECK(k1.boundary[1][0](0, 0) == 0.4);
  CHECK(k1.interior[2][1](0, 0) == 0.1);   // d=+1, level stays
  CHECK(k1.interior[1][0](0, 0) == 0.3);   // d=0, level down
  MAKernel1D k2 = build_ma_kernel(bs, 2);
  for (int d = 0; d < 3; ++d) {
    for (int l = 0; l < 2; ++l)
      CHECK(k1.boundary[size_t(d)][size_t(l)] == k2.boundary[size_t(d)][size_t(l)]);
    for (int l = 0; l < 3; ++l)
      CHECK(k1.interior[size_t(d)][size_t(l)] == k2.interior[size_t(d)][size_t(l)]);
  }
  CHECK_THROWS_AS(build_ma_kernel(bs, 3), Error);
}

TEST_CASE("mean drifts and stability of m1") {
  BlockSet bs = normalized(load_model(model_path("m1.json")));
  DriftReport rep = mean_drifts(bs);
  CHECK(std::abs(rep.a12_1 + 0.2) < 1e-12);
  CHECK(std::abs(rep.a12_2 + 0.2) < 1e-12);
  REQUIRE(rep.a1.has_value());
  REQUIRE(rep.a2.has_value());
  CHECK(std::abs(*rep.a1 + 0.2) < 1e-9);
  CHECK(std::abs(*rep.a2 + 0.2) < 1e-9);
  CHECK(rep.stability == Stability::PositiveRecurrent);
}

TEST_CASE("swapped horizontal drift lands on the Lemma boundary") {
  BlockSet bs = load_model(model_path("m1.json"));
  std::swap(bs.block(Region::Interior, 1, 0), bs.block(Region::Interior, -1, 0));
  DriftReport rep = mean_drifts(bs);
  CHECK(std::abs(rep.a12_1 - 0.2) < 1e-12);
  CHECK(std::abs(rep.a12_2 + 0.2) < 1e-12);
  REQUIRE(rep.a1.has_value());
  // boundary mass 1/2 at drift -0.2, interior levels at +0.2: exactly zero
  CHECK(std::abs(*rep.a1) < 1e-9);
  CHECK(rep.stability == Stability::Inconclusive);
}

TEST_CASE("transient model") {
  BlockSet bs = load_model(model_path("transient.json"));
  DriftReport rep = mean_drifts(bs);
  CHECK(std::abs(rep.a12_1 - 0.2) < 1e-12);
  CHECK(std::abs(rep.a12_2 - 0.2) < 1e-12);
  CHECK_FALSE(rep.a1.has_value());
  CHECK_FALSE(rep.a2.has_value());
  CHECK(rep.stability == Stability::Transient);
}

TEST_CASE("m2 drifts match the hand computation") {
  BlockSet bs = normalized(load_model(model_path("m2.json")));
  DriftReport rep = mean_drifts(bs);
  // stationary phase distribution (4/7, 3/7); drifts -0.2 and -0.1 per phase
  CHECK(std::abs(rep.a12_1 + 11.0 / 70.0) < 1e-12);
  CHECK(std::abs(rep.a12_2 + 11.0 / 70.0) < 1e-12);
  REQUIRE(rep.a1.has_value());
  CHECK(*rep.a1 < 0.0);
  CHECK(rep.stability == Stability::PositiveRecurrent);
}

TEST_CASE("mean drifts are invariant under phase relabeling") {
  BlockSet bs = load_model(model_path("m2.json"));
  BlockSet perm(2);
  Matrix P(2, 2);
  P << 0, 1, 1, 0;
  for (int r = 0; r < 4; ++r)
    for (int i1 = -1; i1 <= 1; ++i1)
      for (int i2 = -1; i2 <= 1; ++i2)
        perm.block(Region(r), i1, i2) = P * bs.block(Region(r), i1, i2) * P.transpose();
  DriftReport a = mean_drifts(bs), b = mean_drifts(perm);
  CHECK(std::abs(a.a12_1 - b.a12_1) < 1e-12);
  CHECK(std::abs(a.a12_2 - b.a12_2) < 1e-12);
  REQUIRE(a.a1.has_value());
  REQUIRE(b.a1.has_value());
  CHECK(std::abs(*a.a1 - *b.a1) < 1e-9);
  CHECK(a.stability == b.stability);
}

TEST_CASE("irreducibility verdicts") {
  SECTION("absorbing origin is reducible") {
    BlockSet bs = load_model(model_path("m1.json"));
    bs.block(Region::Origin, 1, 0).setZero();
    bs.block(Region::Origin, 0, 1).setZero();
    bs.block(Region::Origin, 0, 0)(0, 0) = 1.0;
    ValidationReport rep = validate(bs);
    CHECK(rep.violations.empty());
    CHECK(rep.irreducibility == Verdict::Fail);
    CHECK_FALSE(rep.ok());
  }
  SECTION("periodic chain stays unknown") {
    BlockSet bs(1);
    bs.block(Region::Interior, 1, 0)(0, 0) = 0.2;
    bs.block(Region::Interior, 0, 1)(0, 0) = 0.2;
    bs.block(Region::Interior, -1, 0)(0, 0) = 0.3;
    bs.block(Region::Interior, 0, -1)(0, 0) = 0.3;
    bs.block(Region::Face1, 1, 0)(0, 0) = 0.2;
    bs.block(Region::Face1, -1, 0)(0, 0) = 0.3;
    bs.block(Region::Face1, 0, 1)(0, 0) = 0.5;
    bs.block(Region::Face2, 0, 1)(0, 0) = 0.2;
    bs.block(Region::Face2, 0, -1)(0, 0) = 0.3;
    bs.block(Region::Face2, 1, 0)(0, 0) = 0.5;
    bs.block(Region::Origin, 1, 0)(0, 0) = 0.5;
    bs.block(Region::Origin, 0, 1)(0, 0) = 0.5;
    ValidationReport rep = validate(bs);
    CHECK(rep.violations.empty());
    CHECK(rep.irreducibility == Verdict::Unknown);
  }
}
