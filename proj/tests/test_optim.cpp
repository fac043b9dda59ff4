#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "support.hpp"

using namespace testing;

namespace {

// rows in (e_p, age_days) with targets drawn from y ~ a * e_p
Dataset scaled_population(std::uint64_t seed, double alpha, std::size_t n = 600) {
  auto rng = make_rng(seed, "optim.population");
  std::vector<std::vector<double>> x;
  std::vector<std::int64_t> y;
  std::vector<SegmentKey> keys;
  for (std::size_t i = 0; i < n; ++i) {
    const double ep = std::floor(std::expm1(uniform01(rng) * 5));
    const double age = uniform01(rng) * 800;
    x.push_back({ep, age});
    y.push_back(static_cast<std::int64_t>(std::llround(alpha * ep)));
    keys.push_back({age, ep > 0 ? 1 : 0});
  }
  return make_dataset(FeatureCatalog({"e_p", "age_days"}), x, y, keys);
}

}  // namespace

TEST_CASE("Nelder-Mead minimises a shifted quadratic", "[optim]") {
  OptimizerConfig cfg;
  cfg.seed = 3;
  const std::vector<double> target = {1.5, -2.0, 0.25};
  auto f = [&](const std::vector<double>& x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i + 1.0) * (x[i] - target[i]) * (x[i] - target[i]);
    return s;
  };
  const auto r = nelder_mead(f, {0, 0, 0}, cfg);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(r.x[i] - target[i]) < 1e-4);
  CHECK(r.f <= f({0, 0, 0}));
  CHECK(r.evaluations > 0);

  // Rosenbrock from the classic start
  auto rosen = [](const std::vector<double>& x) {
    return 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1 - x[0]) * (1 - x[0]);
  };
  cfg.max_iters = 5000;
  const auto rr = nelder_mead(rosen, {-1.2, 1.0}, cfg);
  CHECK(std::abs(rr.x[0] - 1.0) < 1e-3);
  CHECK(std::abs(rr.x[1] - 1.0) < 1e-3);
}

TEST_CASE("Nelder-Mead edge cases", "[optim]") {
  OptimizerConfig cfg;
  const auto r = nelder_mead([](const std::vector<double>&) { return 4.0; }, {}, cfg);
  CHECK(r.f == 4.0);
  CHECK_THROWS_AS(nelder_mead([](const std::vector<double>&) { return std::nan(""); }, {1.0}, cfg), NumericalError);
  cfg.restarts = 0;
  CHECK_THROWS_AS(nelder_mead([](const std::vector<double>& x) { return x[0]; }, {1.0}, cfg), ArgumentError);
}

TEST_CASE("Nelder-Mead never ends above its start", "[optim][property]") {
  auto rng = make_rng(11, "optim.nm.property");
  for (int t = 0; t < 40; ++t) {
    const auto dim = 1 + static_cast<std::size_t>(uniform01(rng) * 6);
    std::vector<double> c(dim), x0(dim);
    for (auto& v : c) v = uniform01(rng) * 10 - 5;
    for (auto& v : x0) v = uniform01(rng) * 10 - 5;
    // non-smooth objective
    auto f = [&](const std::vector<double>& x) {
      double s = 0;
      for (std::size_t i = 0; i < dim; ++i) s += std::abs(x[i] - c[i]) + std::sin(3 * x[i]);
      return s;
    };
    OptimizerConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto r = nelder_mead(f, x0, cfg);
    REQUIRE(r.f <= f(x0));
    REQUIRE(r.f == f(r.x));
  }
}

TEST_CASE("least squares recovers exact coefficients", "[optim]") {
  std::vector<std::vector<double>> rows;
  std::vector<double> z;
  for (int i = 0; i < 50; ++i) {
    const double a = i * 0.3;
    const double b = std::sin(i);
    rows.push_back({a, b});
    z.push_back(2.0 - 0.5 * a + 3.0 * b);
  }
  const auto r = least_squares(rows, z);
  REQUIRE(r.beta.size() == 3);
  CHECK(r.beta[0] == Catch::Approx(2.0).margin(1e-6));
  CHECK(r.beta[1] == Catch::Approx(-0.5).margin(1e-6));
  CHECK(r.beta[2] == Catch::Approx(3.0).margin(1e-6));
}

TEST_CASE("persistence predicts e_p and has no parameters", "[optim]") {
  const auto ds = scaled_population(1, 0.5);
  const auto m = fit(ds, ModelForm::persistence(), SegmentScheme::whole, OptimizerConfig{});
  CHECK(m.parameter_count() == 0);
  const auto p = predict_dataset(m, ds);
  for (std::size_t i = 0; i < ds.size(); ++i) REQUIRE(p[i] == ds.rows[i].features[0]);
}

TEST_CASE("downscaled persistence recovers the scale per cell", "[optim]") {
  const auto ds = scaled_population(2, 0.5, 2000);
  const auto m = fit(ds, ModelForm::downscaled(), SegmentScheme::whole, OptimizerConfig{});
  REQUIRE(m.segments.size() == 1);
  CHECK(std::abs(m.segments[0].coeffs[0] - 0.5) < 0.05);
  CHECK(m.parameter_count() == 1);
  CHECK(training_objective_monotone(m));

  const auto j = fit(ds, ModelForm::downscaled(), SegmentScheme::join_date3, OptimizerConfig{});
  CHECK(j.parameter_count() == 3);
  for (const auto& s : j.segments) CHECK(s.train_rmsle <= s.initial_rmsle);
}

TEST_CASE("negative signal is reported as alpha 0", "[optim]") {
  // y is large exactly when e_p is 0
  std::vector<std::vector<double>> x;
  std::vector<std::int64_t> y;
  for (int i = 0; i < 100; ++i) {
    x.push_back({static_cast<double>(i % 2 ? 5 : 0)});
    y.push_back(i % 2 ? 0 : 9);
  }
  const auto ds = make_dataset(FeatureCatalog({"e_p"}), x, y);
  const auto m = fit(ds, ModelForm::downscaled(), SegmentScheme::whole, OptimizerConfig{});
  CHECK(m.segments[0].coeffs[0] == 0.0);
}

TEST_CASE("linear and log-log fits improve on their starting point", "[optim]") {
  const auto ds = scaled_population(3, 0.7, 1500);
  OptimizerConfig cfg;
  cfg.seed = 5;
  for (auto form : {ModelForm::linear(ds.catalog), ModelForm::log_log(FeatureCatalog({"log1p(e_p)"}))}) {
    auto data = ds;
    if (form.kind == FormKind::log_log) {
      data.catalog = FeatureCatalog({"e_p", "age_days", "log1p(e_p)"});
      for (auto& r : data.rows) r.features.push_back(std::log1p(r.features[0]));
    }
    const auto m = fit(data, form, SegmentScheme::old_new2, cfg);
    CHECK(training_objective_monotone(m));
    const auto p = predict_dataset(m, data);
    const double eps = rmsle(p, targets(data)).epsilon;
    const double base = rmsle(std::vector<double>(data.size(), optimal_constant(targets(data))), targets(data)).epsilon;
    CHECK(eps < base);
    for (double v : p) REQUIRE((std::isfinite(v) && v >= 0.0));
  }
}

TEST_CASE("log-log reproduces an exact power relation", "[optim]") {
  std::vector<std::vector<double>> x;
  std::vector<std::int64_t> y;
  for (int i = 0; i < 200; ++i) {
    const double e = i % 40;
    const auto yy = static_cast<std::int64_t>(std::llround(std::expm1(0.2 + 0.9 * std::log1p(e))));
    x.push_back({std::log1p(e)});
    y.push_back(yy);
  }
  const auto ds = make_dataset(FeatureCatalog({"log1p(e_p)"}), x, y);
  const auto m = fit(ds, ModelForm::log_log(ds.catalog), SegmentScheme::whole, OptimizerConfig{});
  CHECK(m.segments[0].train_rmsle < 0.05);
  CHECK(std::abs(m.segments[0].coeffs[1] - 0.9) < 0.05);
}

TEST_CASE("fit is deterministic and round-trips through text", "[optim]") {
  const auto ds = scaled_population(4, 0.6);
  OptimizerConfig cfg;
  cfg.seed = 17;
  const auto a = fit(ds, ModelForm::linear(ds.catalog), SegmentScheme::join_date3, cfg);
  const auto b = fit(ds, ModelForm::linear(ds.catalog), SegmentScheme::join_date3, cfg);
  CHECK(serialize_model(a) == serialize_model(b));
  const auto back = parse_model(serialize_model(a));
  CHECK(serialize_model(back) == serialize_model(a));
  CHECK(predict_dataset(back, ds) == predict_dataset(a, ds));
  CHECK_THROWS_AS(parse_model("editcast-model 1\ngarbage"), IntegrityError);
}

TEST_CASE("residual model adds its stage-one offset", "[optim]") {
  const auto ds = scaled_population(5, 0.8);
  const auto stage1 =
      std::make_shared<const FittedModel>(fit(ds, ModelForm::downscaled(), SegmentScheme::whole, OptimizerConfig{}));
  const auto m = fit(ds, ModelForm::linear(FeatureCatalog({"age_days"})), SegmentScheme::whole, OptimizerConfig{}, stage1);
  CHECK(m.catalog.names() == std::vector<std::string>{"age_days", "e_p"});
  CHECK(m.parameter_count() == 3);
  const auto p = predict_dataset(m, ds);
  const auto s1 = predict_dataset(*stage1, ds);
  const auto& seg = m.segments[0];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double want = clamp_prediction(seg.coeffs[0] + seg.coeffs[1] * ds.rows[i].features[1] + s1[i]);
    REQUIRE(p[i] == want);
  }
  CHECK_THROWS_AS(fit(ds, ModelForm::downscaled(), SegmentScheme::whole, OptimizerConfig{}, stage1), ArgumentError);
}

TEST_CASE("small cells fall back to whole-population coefficients", "[optim]") {
  auto ds = scaled_population(6, 0.5, 300);
  // move every editor but three into the old cell
  for (std::size_t i = 3; i < ds.size(); ++i) ds.rows[i].key.age_days = 500;
  for (std::size_t i = 0; i < 3; ++i) ds.rows[i].key.age_days = 10;
  const auto m = fit(ds, ModelForm::linear(ds.catalog), SegmentScheme::old_new2, OptimizerConfig{});
  CHECK_FALSE(m.segments[0].fallback);
  CHECK(m.segments[1].fallback);
  CHECK(m.segments[1].n_train == 3);
}

TEST_CASE("fit rejects bad arguments", "[optim]") {
  const auto ds = scaled_population(7, 0.5, 50);
  CHECK_THROWS_AS(fit(Dataset{ds.catalog, {}}, ModelForm::downscaled(), SegmentScheme::whole, OptimizerConfig{}),
                  ArgumentError);
  auto form = ModelForm::linear(ds.catalog);
  form.cell_features = {{"e_p"}};
  CHECK_THROWS_AS(fit(ds, form, SegmentScheme::join_date3, OptimizerConfig{}), ArgumentError);
  CHECK_THROWS_AS(fit(ds, ModelForm::linear(FeatureCatalog({"d_p"})), SegmentScheme::whole, OptimizerConfig{}),
                  ArgumentError);
  CHECK_THROWS_AS(parse_form("cubic"), ArgumentError);
}

TEST_CASE("clamp_prediction", "[optim]") {
  CHECK(clamp_prediction(-3.0) == 0.0);
  CHECK(clamp_prediction(std::nan("")) == 0.0);
  CHECK(clamp_prediction(2.5) == 2.5);
  CHECK(clamp_prediction(std::numeric_limits<double>::infinity()) == std::numeric_limits<double>::max());
}
