#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "rankcf/errors.hpp"
#include "rankcf/harness.hpp"
#include "rankcf/random.hpp"

using namespace rankcf;
using nlohmann::json;

namespace {

json small_plan() {
  return json{{"source", {{"type", "sim"}}},
              {"sim_config", {{"m", 3}, {"n", 800}, {"alpha", 2.0}}},
              {"methods", {"ours", "fourstep", "bilevel"}},
              {"seeds", {1, 2}},
              {"grids",
               {{"bandwidth", {1.0}},
                {"kernel", {"gaussian"}},
                {"tau_step", 0.1},
                {"quantile_iterations", 400}}},
              {"max_validation_units", 50}};
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rankcf_harness_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("plan validation") {
  json p = small_plan();
  p["seeds"] = json::array();
  CHECK_THROWS_AS(parse_plan(p).validate(), ValidationError);

  p = small_plan();
  p["methods"] = {"ours", "mystery"};
  CHECK_THROWS_AS(parse_plan(p), ValidationError);

  p = small_plan();
  p["unexpected"] = 1;
  CHECK_THROWS_AS(parse_plan(p), ValidationError);

  p = small_plan();
  p["source"] = {{"type", "csv"}, {"path", "data.csv"}};
  p["propensity"] = "oracle";
  CHECK_THROWS_AS(parse_plan(p).validate(), ValidationError);

  p = small_plan();
  p["grids"]["bandwidth"] = {-1.0};
  CHECK_THROWS_AS(parse_plan(p).validate(), ValidationError);

  CHECK_THROWS_AS(parse_propensity_spec("scaled:1"), ValidationError);
  const PropensitySpec s = parse_propensity_spec("scaled:0.5,2");
  CHECK(s.kind == PropensitySpec::Kind::scaled);
  CHECK(s.c0 == 0.5);
  CHECK(s.c1 == 2.0);
}

TEST_CASE("plan round trip") {
  const ExperimentPlan plan = parse_plan(small_plan());
  const json once = to_json(plan);
  CHECK(to_json(parse_plan(once)) == once);
  CHECK(plan.sim.m == 3);
  CHECK(plan.seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("missing csv source is an io error") {
  json p = small_plan();
  p["source"] = {{"type", "csv"}, {"path", "/nonexistent/dir/data_{seed}.csv"}};
  CHECK_THROWS_AS(run_experiment(parse_plan(p)), IoError);
}

TEST_CASE("weighted crps against the pairwise formula") {
  Rng rng(3, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> v(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng.normal();
      w[i] = rng.uniform(0.1, 2.0);
    }
    const double y = rng.normal();
    double total = 0;
    for (double x : w) total += x;
    double e1 = 0, e2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      e1 += w[i] / total * std::abs(v[i] - y);
      for (std::size_t j = 0; j < n; ++j) e2 += w[i] * w[j] / (total * total) * std::abs(v[i] - v[j]);
    }
    CHECK(weighted_crps(v, w, y) == doctest::Approx(e1 - 0.5 * e2).epsilon(1e-10));
  }
}

TEST_CASE("small simulated run") {
  const ExperimentPlan plan = parse_plan(small_plan());
  const ExperimentResults res = run_experiment(plan);
  REQUIRE(res.rows.size() == 12);
  for (const ResultRow& r : res.rows) {
    CHECK(r.status == "ok");
    CHECK(std::isfinite(r.sqrt_pehe));
    CHECK(std::isfinite(r.median_abs_cf_error));
    // |mean d| <= sqrt(mean d^2).
    CHECK(r.ate_error <= r.sqrt_pehe + 1e-12);
    CHECK(std::isnan(r.att_error));
    CHECK(r.n_units == (r.sample == "in" ? 504u : 80u));
  }

  // Aggregates recomputed from the per-seed rows.
  for (const ResultRow& a : res.aggregates) {
    std::vector<double> v;
    for (const ResultRow& r : res.rows) {
      if (r.method == a.method && r.sample == a.sample) v.push_back(r.sqrt_pehe);
    }
    REQUIRE(v.size() == 2);
    const double mean = 0.5 * (v[0] + v[1]);
    const double sd = std::abs(v[0] - v[1]) / std::sqrt(2.0);
    if (a.stat == "mean") CHECK(a.sqrt_pehe == doctest::Approx(mean).epsilon(1e-12));
    if (a.stat == "std") CHECK(a.sqrt_pehe == doctest::Approx(sd).epsilon(1e-12));
  }
  CHECK(res.aggregates.size() == 12);

  const std::string csv = results_csv(res);
  CHECK(csv.rfind("stat,seed,method,sample,", 0) == 0);
  CHECK(count_lines(csv) == 1 + 12 + 12);
  CHECK(res.manifest.contains("plan"));
  CHECK(res.manifest["seeds"].size() == 2);

  // Same plan, same bytes.
  CHECK(results_csv(run_experiment(plan)) == csv);
}

TEST_CASE("csv sources gate metrics on available columns") {
  const auto dir = temp_dir("csv");
  SimConfig c;
  c.m = 2;
  c.n = 600;
  c.alpha = 2;
  c.seed = 5;
  const SimResult s = simulate(c);
  write_csv((dir / "with_truth.csv").string(), s.dataset, {}, &s.truth);
  write_csv((dir / "plain.csv").string(), s.dataset);

  json p = small_plan();
  p["methods"] = {"ours"};
  p["seeds"] = {1};
  p.erase("sim_config");
  p["source"] = {{"type", "csv"},
                 {"path", (dir / "with_truth.csv").string()},
                 {"schema", {{"y0", "y0"}, {"y1", "y1"}}}};
  const ExperimentResults with = run_experiment(parse_plan(p));
  REQUIRE(with.rows.size() == 2);
  for (const ResultRow& r : with.rows) {
    CHECK(r.status == "ok");
    CHECK(std::isfinite(r.sqrt_pehe));
    CHECK(std::isfinite(r.median_abs_cf_error));
  }

  p["source"] = {{"type", "csv"}, {"path", (dir / "plain.csv").string()}};
  const ExperimentResults without = run_experiment(parse_plan(p));
  REQUIRE(without.rows.size() == 2);
  for (const ResultRow& r : without.rows) {
    CHECK(r.status == "ok");
    CHECK(std::isnan(r.sqrt_pehe));
    CHECK(std::isnan(r.ate_error));
    CHECK(std::isnan(r.median_abs_cf_error));
    CHECK(r.n_units > 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep over bandwidth") {
  json p = small_plan();
  p["methods"] = {"ours"};
  p["seeds"] = {1};
  const SweepResults sw = sweep(SweepAxis::bandwidth, {"1", "3"}, parse_plan(p));
  REQUIRE(sw.runs.size() == 2);
  CHECK(sw.runs[0].rows[0].bandwidth == 1.0);
  CHECK(sw.runs[1].rows[0].bandwidth == 3.0);
  const std::string csv = sw.csv();
  CHECK(csv.rfind("axis,value,stat,", 0) == 0);
  CHECK(csv.find("\nbandwidth,3,seed,1,ours,in,") != std::string::npos);
  CHECK_THROWS_AS(parse_sweep_axis("colour"), ValidationError);
}
