#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "support.hpp"

using namespace testing;

namespace {

AggregationRule rule(AggregationKind k, std::vector<double> w = {}) { return {k, std::move(w)}; }

Dataset linear_population(std::uint64_t seed, std::size_t n) {
  auto rng = make_rng(seed, "ensemble.population");
  std::vector<std::vector<double>> x;
  std::vector<std::int64_t> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double ep = std::floor(uniform01(rng) * 40);
    x.push_back({ep});
    y.push_back(static_cast<std::int64_t>(ep * 0.6 + uniform01(rng) * 3));
  }
  return make_dataset(FeatureCatalog({"e_p"}), x, y);
}

}  // namespace

TEST_CASE("aggregation worked examples", "[ensemble]") {
  const std::vector<double> m = {0.0, 3.0};
  CHECK(aggregate(m, rule(AggregationKind::arithmetic)) == 1.5);
  CHECK(aggregate(m, rule(AggregationKind::geometric)) == Catch::Approx(1.0).epsilon(1e-15));  // sqrt(1 * 4) - 1
  CHECK(aggregate(m, rule(AggregationKind::median)) == 1.5);
  CHECK(aggregate(std::vector<double>{1, 9, 4}, rule(AggregationKind::median)) == 4.0);
  CHECK(aggregate(std::vector<double>{1, 9, 4}, rule(AggregationKind::median, {0.6, 0.2, 0.2})) == 1.0);
  CHECK(aggregate(std::vector<double>{2.5}, rule(AggregationKind::geometric)) == 2.5);
  CHECK(aggregate(std::vector<double>{0.7, 0.7, 0.7}, rule(AggregationKind::geometric)) == 0.7);
  CHECK(aggregate(m, rule(AggregationKind::arithmetic, {0.25, 0.75})) == 2.25);
}

TEST_CASE("aggregation rejects bad input", "[ensemble]") {
  CHECK_THROWS_AS(aggregate(std::vector<double>{}, rule(AggregationKind::median)), ArgumentError);
  CHECK_THROWS_AS(aggregate(std::vector<double>{1, -1}, rule(AggregationKind::median)), ArgumentError);
  CHECK_THROWS_AS(aggregate(std::vector<double>{1, std::nan("")}, rule(AggregationKind::arithmetic)), ArgumentError);
  CHECK_THROWS_AS(aggregate(std::vector<double>{1, 2}, rule(AggregationKind::arithmetic, {0.5, 0.6})), ArgumentError);
  CHECK_THROWS_AS(aggregate(std::vector<double>{1, 2}, rule(AggregationKind::arithmetic, {1.5, -0.5})), ArgumentError);
  CHECK_THROWS_AS(aggregate(std::vector<double>{1, 2}, rule(AggregationKind::arithmetic, {1.0})), ArgumentError);
  CHECK_THROWS_AS(parse_aggregation("mode"), ArgumentError);
}

TEST_CASE("aggregation invariants", "[ensemble][property]") {
  auto rng = make_rng(21, "ensemble.property");
  for (int t = 0; t < 5000; ++t) {
    const auto n = 1 + static_cast<std::size_t>(uniform01(rng) * 9);
    std::vector<double> v(n), w(n);
    for (auto& x : v) x = uniform01(rng) < 0.2 ? 0.0 : std::expm1(uniform01(rng) * 10);
    double ws = 0;
    for (auto& x : w) ws += (x = uniform01(rng));
    for (auto& x : w) x /= ws;
    if (std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) > 1e-12) continue;
    const double lo = *std::ranges::min_element(v);
    const double hi = *std::ranges::max_element(v);
    for (auto k : {AggregationKind::arithmetic, AggregationKind::median, AggregationKind::geometric}) {
      for (const auto& weights : {std::vector<double>{}, w}) {
        const double a = aggregate(v, rule(k, weights));
        REQUIRE(a >= lo);
        REQUIRE(a <= hi);
        // member order does not matter, bit for bit
        auto pv = v, pw = weights;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(uniform01(rng) * i)]);
        for (std::size_t i = 0; i < n; ++i) {
          pv[i] = v[perm[i]];
          if (!weights.empty()) pw[i] = weights[perm[i]];
        }
        REQUIRE(aggregate(pv, rule(k, pw)) == a);
      }
    }
    REQUIRE(aggregate(v, rule(AggregationKind::geometric)) <= aggregate(v, rule(AggregationKind::arithmetic)));
    REQUIRE(aggregate(v, rule(AggregationKind::geometric, w)) <= aggregate(v, rule(AggregationKind::arithmetic, w)));
  }
}

TEST_CASE("aggregate_columns clamps members first", "[ensemble]") {
  const auto out = aggregate_columns({{-2.0, 4.0}, {2.0, 4.0}}, rule(AggregationKind::arithmetic));
  CHECK(out == std::vector<double>{1.0, 4.0});
  CHECK_THROWS_AS(aggregate_columns({{1.0}, {1.0, 2.0}}, rule(AggregationKind::median)), ArgumentError);
}

TEST_CASE("bootstrap resamples are reproducible", "[ensemble]") {
  const auto a = bootstrap_rows(100, 5, 3);
  CHECK(a == bootstrap_rows(100, 5, 3));
  CHECK(a != bootstrap_rows(100, 5, 4));
  CHECK(a != bootstrap_rows(100, 6, 3));
  for (auto r : a) CHECK(r < 100);
}

TEST_CASE("bagging is worker independent and round-trips", "[ensemble]") {
  const auto ds = linear_population(1, 400);
  auto fit_fn = [](const Dataset& d, std::size_t r) {
    OptimizerConfig cfg;
    cfg.seed = r;
    return fit(d, ModelForm::downscaled(), SegmentScheme::whole, cfg);
  };
  const auto a = bootstrap_bag(ds, 6, fit_fn, rule(AggregationKind::median), 9, 1);
  const auto b = bootstrap_bag(ds, 6, fit_fn, rule(AggregationKind::median), 9, 3);
  REQUIRE(a.members.size() == 6);
  std::ostringstream sa, sb;
  write_bag(sa, a);
  write_bag(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(training_objective_monotone(a));
  std::istringstream in(sa.str());
  const auto back = read_bag(in);
  CHECK(predict_dataset(back, ds) == predict_dataset(a, ds));

  // median of members, row by row
  const auto p = predict_dataset(a, ds);
  for (std::size_t i = 0; i < ds.size(); i += 37) {
    std::vector<double> col;
    for (const auto& m : a.members) col.push_back(predict_dataset(m, ds)[i]);
    CHECK(p[i] == aggregate(col, rule(AggregationKind::median)));
  }
}

TEST_CASE("a failing replicate is reported by its lowest index", "[ensemble]") {
  const auto ds = linear_population(2, 50);
  auto fit_fn = [](const Dataset& d, std::size_t r) {
    if (r == 2 || r == 4) throw NumericalError("boom " + std::to_string(r));
    return fit(d, ModelForm::downscaled(), SegmentScheme::whole, OptimizerConfig{});
  };
  for (unsigned workers : {1u, 3u}) {
    try {
      (void)bootstrap_bag(ds, 5, fit_fn, rule(AggregationKind::arithmetic), 1, workers);
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(std::string(e.what()) == "bootstrap_bag: replicate 2: boom 2");
      CHECK(e.code() == ExitCode::numerical);
    }
  }
  CHECK_THROWS_AS(bootstrap_bag(ds, 0, fit_fn, rule(AggregationKind::arithmetic), 1), ArgumentError);
}

TEST_CASE("ensemble spec parsing", "[ensemble]") {
  const auto spec = parse_ensemble_spec("# members\nrule median\nweights 0.5 0.25 0.25\nmember a.model\nmember dir/b c.model  \nmember d\n");
  CHECK(spec.rule.kind == AggregationKind::median);
  CHECK(spec.members == std::vector<std::string>{"a.model", "dir/b c.model", "d"});
  CHECK(parse_ensemble_spec(serialize_ensemble_spec(spec)).members == spec.members);

  try {
    (void)parse_ensemble_spec("rule median\nmember a\nbogus x\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_ensemble_spec("member a\nmember b\n"), ArgumentError);
  CHECK_THROWS_AS(parse_ensemble_spec("rule median\nmember a\n"), ArgumentError);
  CHECK_THROWS_AS(parse_ensemble_spec("rule median\nweights 0.9 0.3\nmember a\nmember b\n"), ArgumentError);
  CHECK_THROWS_AS(parse_ensemble_spec("rule mode\nmember a\nmember b\n"), ParseError);
}

TEST_CASE("prediction files round-trip exactly", "[ensemble]") {
  const auto ds = linear_population(3, 20);
  std::vector<double> p(ds.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1.0 / static_cast<double>(i + 3);
  const auto back = parse_predictions(serialize_predictions(ds, p));
  REQUIRE(back.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(back[i].editor_id == ds.rows[i].editor_id);
    CHECK(back[i].value == p[i]);
  }
  CHECK_THROWS_AS(parse_predictions("editor_id\tprediction\n1\t-2\n"), ParseError);
}
