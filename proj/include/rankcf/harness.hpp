#ifndef RANKCF_HARNESS_HPP
#define RANKCF_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/estimator.hpp"
#include "rankcf/kernels.hpp"
#include "rankcf/simulator.hpp"

namespace rankcf {

enum class Method { ours, ours_weighted, bilevel, fourstep };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct PropensitySpec {
  enum class Kind { logistic, oracle, scaled };
  Kind kind = Kind::logistic;
  double c0 = 1.0;
  double c1 = 1.0;
};

// "logistic" | "oracle" | "scaled:c0,c1"
PropensitySpec parse_propensity_spec(std::string_view text);
std::string to_string(const PropensitySpec& spec);

struct ExperimentPlan {
  enum class Source { sim, csv };
  Source source = Source::sim;
  // CSV sources: the path may contain "{seed}" to pick one file per seed.
  std::string csv_path;
  CsvSchema schema;
  SimConfig sim;
  // When set, beta is calibrated per seed so the pooled tau of (Y_0, Y_1)
  // hits this value (simulated sources only).
  std::optional<double> rank_target;
  std::size_t calibration_n = 100000;

  std::vector<Method> methods{Method::ours, Method::fourstep};
  std::vector<std::uint64_t> seeds;
  std::vector<KernelFamily> kernels{KernelFamily::gaussian, KernelFamily::epanechnikov};
  std::vector<double> bandwidths{1, 3, 5, 7, 9};
  double tau_step = 0.05;
  int quantile_iterations = 20000;

  PropensitySpec propensity;
  double l2 = 1e-4;
  double clip = 0.01;

  bool standardize = false;
  bool predict_both_arms = false;
  bool in_sample = true;
  bool out_sample = true;
  std::size_t max_validation_units = 300;
  unsigned threads = 0;

  void validate() const;
};

ExperimentPlan parse_plan(const nlohmann::json& plan);
nlohmann::json to_json(const ExperimentPlan& plan);
nlohmann::json to_json(const SimConfig& config);
SimConfig parse_sim_config(const nlohmann::json& j, SimConfig base = {});

// One (seed, method, sample) cell. Metrics that cannot be computed for the
// source are NaN.
struct ResultRow {
  std::string stat = "seed";  // "seed", "mean" or "std"
  std::string seed;
  std::string method;
  std::string sample;  // "in" (train) or "out" (test)
  std::size_t n_units = 0;
  std::size_t n_failed = 0;
  std::size_t n_unbounded = 0;
  double sqrt_pehe = std::numeric_limits<double>::quiet_NaN();
  double sqrt_pehe_standardized = std::numeric_limits<double>::quiet_NaN();
  double ate_error = std::numeric_limits<double>::quiet_NaN();
  double att_error = std::numeric_limits<double>::quiet_NaN();
  double policy_risk = std::numeric_limits<double>::quiet_NaN();
  double median_abs_cf_error = std::numeric_limits<double>::quiet_NaN();
  std::string kernel;
  double bandwidth = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";  // ok | partial | error
  std::string message;
  std::string summary;  // "mean ± std" of sqrt_pehe on mean rows
};

struct ExperimentResults {
  std::vector<ResultRow> rows;        // per-seed rows, (seed, method, sample) order
  std::vector<ResultRow> aggregates;  // mean and std rows per (method, sample)
  nlohmann::json manifest;
};

// Runs every (seed, method) cell. Module errors inside a cell are recorded on
// its rows and the run continues. Plan errors and unreadable sources throw.
ExperimentResults run_experiment(const ExperimentPlan& plan);

std::vector<ResultRow> aggregate_rows(const std::vector<ResultRow>& rows);

std::string results_csv(const ExperimentResults& results);
std::string results_csv(const std::vector<ResultRow>& rows,
                        const std::vector<std::string>& prefix_header = {},
                        const std::vector<std::vector<std::string>>& prefixes = {});

enum class SweepAxis { alpha, bandwidth, kernel, rho, beta };
SweepAxis parse_sweep_axis(std::string_view text);
std::string_view to_string(SweepAxis axis);

struct SweepResults {
  SweepAxis axis;
  std::vector<std::string> values;
  std::vector<ExperimentResults> runs;

  // Long format: axis, value, then the result columns.
  std::string csv() const;
};

SweepResults sweep(SweepAxis axis, const std::vector<std::string>& values,
                   const ExperimentPlan& base);

// Bandwidth / kernel selection on the validation split. For each factual
// validation unit the kernel- and inverse-propensity-weighted distribution of
// its own arm in the train pool is scored against the observed outcome with
// the continuous ranked probability score; the candidate with the fewest
// coverage failures and then the lowest mean score wins (ties go to the
// earlier candidate in grid order).
struct BandwidthSelection {
  KernelFamily kernel = KernelFamily::gaussian;
  double bandwidth = 1.0;
  double score = 0.0;
  std::size_t failures = 0;
  nlohmann::json candidates;
};

BandwidthSelection select_bandwidth(const ObservationalDataset& train,
                                    const ObservationalDataset& validation,
                                    const PropensityFn& propensity,
                                    const std::vector<KernelFamily>& kernels,
                                    const std::vector<double>& bandwidths,
                                    std::size_t max_units, unsigned threads);

// CRPS of the distribution placing weight w[i] (normalized internally) on v[i].
double weighted_crps(std::span<const double> values, std::span<const double> weights, double y);

}  // namespace rankcf

#endif  // RANKCF_HARNESS_HPP
