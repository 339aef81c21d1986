#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ember/variogram.hpp"

using namespace ember;

namespace {

VariogramModel single(VariogramShape shape, double sill, double range, double nugget = 0.0) {
  VariogramModel m;
  m.nugget = nugget;
  VariogramStructure st;
  st.shape = shape;
  st.sill = sill;
  st.ranges = {range, range, range};
  m.structures.push_back(st);
  return m;
}

SampleSet line_samples(const std::vector<double>& values, double spacing) {
  SampleSet s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.add({{static_cast<double>(i) * spacing, 0.0, 0.0, std::nullopt}, values[i], "W"});
  }
  return s;
}

}  // namespace

TEST_CASE("model gamma basics") {
  const auto sph = single(VariogramShape::spherical, 1.0, 10.0);
  CHECK(sph.gamma({0, 0, 0}) == 0.0);
  CHECK(sph.gamma({10, 0, 0}) == Catch::Approx(1.0));
  CHECK(sph.gamma({15, 0, 0}) == Catch::Approx(1.0));
  // hand-evaluated: 1.5*0.5 - 0.5*0.125 = 0.6875
  CHECK(sph.gamma({5, 0, 0}) == Catch::Approx(0.6875));

  const auto exp = single(VariogramShape::exponential, 2.0, 10.0);
  CHECK(exp.gamma({10, 0, 0}) == Catch::Approx(2.0 * (1.0 - std::exp(-3.0))));

  const auto gau = single(VariogramShape::gaussian, 1.5, 10.0);
  CHECK(gau.gamma({10, 0, 0}) == Catch::Approx(1.5 * (1.0 - std::exp(-3.0))));
}

TEST_CASE("nugget enters as the limit from above") {
  auto m = single(VariogramShape::spherical, 1.0, 10.0, 0.25);
  CHECK(m.gamma({0, 0, 0}) == 0.0);
  CHECK(m.gamma({1e-9, 0, 0}) == Catch::Approx(0.25).margin(1e-6));
  CHECK(m.covariance({0.0, 0.0, 0.0}) == Catch::Approx(1.25));
}

TEST_CASE("single-structure isotropic models are nonnegative and nondecreasing") {
  for (const auto shape :
       {VariogramShape::spherical, VariogramShape::exponential, VariogramShape::gaussian}) {
    const auto m = single(shape, 1.7, 8.0);
    double prev = 0.0;
    for (double h = 0.0; h <= 30.0; h += 0.25) {
      const double g = m.gamma({h, 0, 0});
      CHECK(g >= prev - 1e-12);
      CHECK(g >= 0.0);
      prev = g;
    }
  }
}

TEST_CASE("correlation stays within [-1, 1]") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = single(static_cast<VariogramShape>(trial % 3), rng.uniform(0.1, 4.0),
                    rng.uniform(1.0, 40.0), rng.uniform(0.0, 1.0));
    for (int k = 0; k < 20; ++k) {
      const double rho = m.correlation(
          {rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, 60)});
      CHECK(rho <= 1.0 + 1e-12);
      CHECK(rho >= -1.0 - 1e-12);
    }
  }
}

TEST_CASE("zxz rotation maps the range ellipse") {
  VariogramModel m;
  VariogramStructure st;
  st.shape = VariogramShape::spherical;
  st.sill = 1.0;
  st.ranges = {20.0, 5.0, 5.0};
  st.angles = {90.0, 0.0, 0.0};  // long axis now along y
  m.structures.push_back(st);
  VariogramModel plain = m;
  plain.structures[0].angles = {0, 0, 0};
  CHECK(m.gamma({0, 10, 0}) == Catch::Approx(plain.gamma({10, 0, 0})));
  CHECK(m.gamma({10, 0, 0}) == Catch::Approx(plain.gamma({0, 10, 0})).margin(1e-12));
}

TEST_CASE("empirical variogram of two samples one lag apart") {
  const SampleSet s = line_samples({0.0, 2.0}, 10.0);
  const auto exp = empirical_variogram(s, {1, 0, 0}, 90.0, 10.0, 5);
  REQUIRE(exp.bins.size() == 5);
  CHECK(exp.bins[0].count == 1);
  CHECK(exp.bins[0].gamma == Catch::Approx(2.0));  // (2-0)^2 / 2
  for (std::size_t k = 1; k < exp.bins.size(); ++k) CHECK(exp.bins[k].count == 0);
}

TEST_CASE("constant samples give zero semivariance") {
  const SampleSet s = line_samples({3.0, 3.0, 3.0, 3.0}, 5.0);
  const auto exp = empirical_variogram(s, {1, 0, 0}, 90.0, 5.0, 4);
  for (const auto& bin : exp.bins) {
    if (bin.count > 0) CHECK(bin.gamma == 0.0);
  }
}

TEST_CASE("iid samples show a pure nugget near unit variance") {
  // Monte-Carlo oracle: independent standard normals have semivariance 1 at
  // every lag.
  Rng rng(2);
  std::vector<double> values(100);
  for (auto& v : values) v = rng.normal();
  const SampleSet s = line_samples(values, 1.0);
  const auto exp = empirical_variogram(s, {1, 0, 0}, 90.0, 1.0, 10);
  for (const auto& bin : exp.bins) {
    REQUIRE(bin.count > 0);
    CHECK(bin.gamma == Catch::Approx(1.0).margin(0.3));
  }
}

TEST_CASE("direction cone filters pairs symmetrically") {
  SampleSet s;
  s.add({{0, 0, 0, std::nullopt}, 1.0, "A"});
  s.add({{10, 0, 0, std::nullopt}, 2.0, "B"});
  s.add({{0, 10, 0, std::nullopt}, 5.0, "C"});
  const auto along_x = empirical_variogram(s, {1, 0, 0}, 20.0, 10.0, 3);
  CHECK(along_x.bins[0].count == 1);  // only the x pair fits the cone
  CHECK(along_x.warnings.empty());

  const auto flipped = empirical_variogram(s, {-1, 0, 0}, 20.0, 10.0, 3);
  CHECK(flipped.bins[0].count == along_x.bins[0].count);
  CHECK(flipped.bins[0].gamma == along_x.bins[0].gamma);

  const auto along_z = empirical_variogram(s, {0, 0, 1}, 10.0, 10.0, 3);
  CHECK(along_z.occupied() == 0);
  REQUIRE_FALSE(along_z.warnings.empty());
}

TEST_CASE("fit recovers a forward-modelled spherical variogram") {
  const auto truth = single(VariogramShape::spherical, 2.0, 25.0, 0.0);
  std::vector<ExperimentalVariogram> exps(1);
  exps[0].direction = {1, 0, 0};
  exps[0].lag_width = 5.0;
  for (int k = 1; k <= 8; ++k) {
    VariogramBin bin;
    bin.lag = 5.0 * k;
    bin.count = 50;
    bin.gamma = truth.gamma({bin.lag, 0, 0});
    exps[0].bins.push_back(bin);
  }
  auto init = single(VariogramShape::spherical, 1.2, 18.0);
  const auto fit = fit_variogram(exps, VariogramShape::spherical, init);
  CHECK(fit.model.structures[0].sill == Catch::Approx(2.0).epsilon(0.01));
  CHECK(fit.model.structures[0].ranges[0] == Catch::Approx(25.0).epsilon(0.05));
}

TEST_CASE("fit needs three occupied bins") {
  std::vector<ExperimentalVariogram> exps(1);
  exps[0].bins.push_back({10.0, 5, 1.0});
  CHECK_THROWS_AS(fit_variogram(exps, VariogramShape::spherical,
                                single(VariogramShape::spherical, 1.0, 10.0)),
                  DataError);
}

TEST_CASE("fit never worsens the initial objective") {
  const auto truth = single(VariogramShape::exponential, 1.0, 12.0, 0.1);
  std::vector<ExperimentalVariogram> exps(1);
  exps[0].direction = {1, 0, 0};
  exps[0].lag_width = 3.0;
  for (int k = 1; k <= 6; ++k) {
    VariogramBin bin;
    bin.lag = 3.0 * k;
    bin.count = 10 + k;
    bin.gamma = truth.gamma({bin.lag, 0, 0});
    exps[0].bins.push_back(bin);
  }
  const auto fit = fit_variogram(exps, VariogramShape::exponential, truth);
  CHECK(fit.objective <= 1e-18);  // init is exact, objective stays at 0
}

TEST_CASE("model text serialization round trips") {
  VariogramModel m;
  m.nugget = 0.125;
  VariogramStructure a;
  a.shape = VariogramShape::exponential;
  a.sill = 0.5;
  a.ranges = {120.0, 80.0, 10.0};
  a.angles = {30.0, 0.0, 0.0};
  VariogramStructure b;
  b.shape = VariogramShape::gaussian;
  b.sill = 0.375;
  b.ranges = {40.0, 40.0, 4.0};
  m.structures = {a, b};

  const VariogramModel back = parse_variogram_model(format_variogram_model(m));
  REQUIRE(back.structures.size() == 2);
  CHECK(back.nugget == m.nugget);
  CHECK(back.structures[0].shape == VariogramShape::exponential);
  CHECK(back.structures[0].sill == m.structures[0].sill);
  CHECK(back.structures[0].ranges == m.structures[0].ranges);
  CHECK(back.structures[0].angles == m.structures[0].angles);
  CHECK(back.structures[1].shape == VariogramShape::gaussian);

  CHECK_THROWS_AS(parse_variogram_model("nugget -1\n"), DataError);
  CHECK_THROWS_AS(parse_variogram_model("shape spherical\n"), DataError);
}

TEST_CASE("normalization and range scaling helpers") {
  auto m = single(VariogramShape::spherical, 4.0, 10.0, 1.0);
  const auto unit = m.normalized();
  CHECK(unit.total_sill() == Catch::Approx(1.0));
  CHECK(unit.nugget == Catch::Approx(0.2));
  const auto shorter = m.with_scaled_ranges(0.15);
  CHECK(shorter.structures[0].ranges[0] == Catch::Approx(1.5));
  CHECK(shorter.total_sill() == m.total_sill());
}
