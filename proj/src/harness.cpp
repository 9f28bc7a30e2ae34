#include "rankcf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "rankcf/baselines.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/format.hpp"
#include "rankcf/metrics.hpp"
#include "rankcf/parallel.hpp"
#include "rankcf/propensity.hpp"
#include "rankcf/random.hpp"

namespace rankcf {

using nlohmann::json;

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ours:
      return "ours";
    case Method::ours_weighted:
      return "ours-weighted";
    case Method::bilevel:
      return "bilevel";
    case Method::fourstep:
      return "fourstep";
  }
  return "ours";
}

Method parse_method(std::string_view text) {
  if (text == "ours") return Method::ours;
  if (text == "ours-weighted") return Method::ours_weighted;
  if (text == "bilevel") return Method::bilevel;
  if (text == "fourstep") return Method::fourstep;
  throw ValidationError("unknown method '" + std::string(text) + "'");
}

PropensitySpec parse_propensity_spec(std::string_view text) {
  PropensitySpec spec;
  if (text == "logistic") return spec;
  if (text == "oracle") {
    spec.kind = PropensitySpec::Kind::oracle;
    return spec;
  }
  constexpr std::string_view prefix = "scaled:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string_view rest = text.substr(prefix.size());
    const std::size_t comma = rest.find(',');
    if (comma == std::string_view::npos ||
        !parse_double(rest.substr(0, comma), spec.c0) ||
        !parse_double(rest.substr(comma + 1), spec.c1) || !(spec.c0 > 0.0) ||
        !(spec.c1 > 0.0)) {
      throw ValidationError("expected scaled:c0,c1 with positive factors");
    }
    spec.kind = PropensitySpec::Kind::scaled;
    return spec;
  }
  throw ValidationError("unknown propensity '" + std::string(text) + "'");
}

std::string to_string(const PropensitySpec& spec) {
  switch (spec.kind) {
    case PropensitySpec::Kind::logistic:
      return "logistic";
    case PropensitySpec::Kind::oracle:
      return "oracle";
    case PropensitySpec::Kind::scaled:
      return "scaled:" + format_double(spec.c0) + "," + format_double(spec.c1);
  }
  return "logistic";
}

void ExperimentPlan::validate() const {
  if (seeds.empty()) throw ValidationError("plan must list at least one seed");
  if (methods.empty()) throw ValidationError("plan must list at least one method");
  if (kernels.empty() || bandwidths.empty()) {
    throw ValidationError("kernel and bandwidth grids must not be empty");
  }
  for (double h : bandwidths) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("bandwidths must be positive");
  }
  if (!(clip > 0.0 && clip < 0.5)) throw ValidationError("clip must lie in (0, 0.5)");
  if (!(l2 >= 0.0)) throw ValidationError("l2 must be non-negative");
  if (quantile_iterations < 2) throw ValidationError("quantile_iterations must be >= 2");
  if (!in_sample && !out_sample) throw ValidationError("plan evaluates no sample");
  if (max_validation_units == 0) throw ValidationError("max_validation_units must be positive");
  TauGrid::uniform(tau_step);
  if (source == Source::sim) {
    sim.validate();
  } else {
    if (csv_path.empty()) throw ValidationError("csv source needs a path");
    if (propensity.kind != PropensitySpec::Kind::logistic) {
      throw ValidationError("oracle and scaled propensities need a simulated source");
    }
    if (rank_target) throw ValidationError("rank_target needs a simulated source");
    if (schema.mode != TreatmentMode::binary) {
      throw ValidationError("the experiment harness evaluates binary treatments only");
    }
  }
  if (rank_target && !(*rank_target > -1.0 && *rank_target < 1.0)) {
    throw ValidationError("rank_target must lie in (-1, 1)");
  }
}

json to_json(const SimConfig& c) {
  return json{{"m", c.m},
              {"n", c.n},
              {"alpha", c.alpha},
              {"rho", c.rho},
              {"beta", c.beta},
              {"violation_draw", c.violation_draw},
              {"seed", c.seed},
              {"split_ratios", c.split_ratios}};
}

SimConfig parse_sim_config(const json& j, SimConfig c) {
  if (!j.is_object()) throw ValidationError("sim_config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "m") {
      c.m = value.get<std::size_t>();
    } else if (key == "n") {
      c.n = value.get<std::size_t>();
    } else if (key == "alpha") {
      c.alpha = value.get<double>();
    } else if (key == "rho") {
      c.rho = value.get<double>();
    } else if (key == "beta") {
      c.beta = value.get<double>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else if (key == "violation_draw") {
      c.violation_draw = value.get<std::uint64_t>();
    } else if (key == "split_ratios") {
      c.split_ratios = value.get<std::array<double, 3>>();
    } else {
      throw ValidationError("unknown sim_config key '" + key + "'");
    }
  }
  return c;
}

namespace {

CsvSchema parse_schema(const json& j) {
  CsvSchema s;
  for (const auto& [key, value] : j.items()) {
    if (key == "treatment") {
      s.treatment = value.get<std::string>();
    } else if (key == "outcome") {
      s.outcome = value.get<std::string>();
    } else if (key == "covariates") {
      s.covariates = value.get<std::vector<std::string>>();
    } else if (key == "split") {
      if (value.is_null()) {
        s.split.reset();
      } else {
        s.split = value.get<std::string>();
      }
    } else if (key == "y0") {
      s.y0 = value.get<std::string>();
    } else if (key == "y1") {
      s.y1 = value.get<std::string>();
    } else if (key == "randomized") {
      s.randomized = value.get<std::string>();
    } else if (key == "mode") {
      s.mode = parse_treatment_mode(value.get<std::string>());
    } else {
      throw ValidationError("unknown schema key '" + key + "'");
    }
  }
  return s;
}

json schema_to_json(const CsvSchema& s) {
  json j{{"treatment", s.treatment},
         {"outcome", s.outcome},
         {"covariates", s.covariates},
         {"mode", std::string(to_string(s.mode))}};
  j["split"] = s.split ? json(*s.split) : json(nullptr);
  if (s.y0) j["y0"] = *s.y0;
  if (s.y1) j["y1"] = *s.y1;
  if (s.randomized) j["randomized"] = *s.randomized;
  return j;
}

}  // namespace

ExperimentPlan parse_plan(const json& j) {
  if (!j.is_object()) throw ValidationError("plan must be a JSON object");
  ExperimentPlan plan;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "source") {
        const std::string type =
            value.is_string() ? value.get<std::string>() : value.at("type").get<std::string>();
        if (type == "sim") {
          plan.source = ExperimentPlan::Source::sim;
        } else if (type == "csv") {
          plan.source = ExperimentPlan::Source::csv;
          plan.csv_path = value.at("path").get<std::string>();
          if (value.contains("schema")) plan.schema = parse_schema(value.at("schema"));
        } else {
          throw ValidationError("unknown source type '" + type + "'");
        }
      } else if (key == "sim_config") {
        plan.sim = parse_sim_config(value, plan.sim);
      } else if (key == "rank_target") {
        if (!value.is_null()) plan.rank_target = value.get<double>();
      } else if (key == "calibration_n") {
        plan.calibration_n = value.get<std::size_t>();
      } else if (key == "methods") {
        plan.methods.clear();
        for (const auto& m : value) plan.methods.push_back(parse_method(m.get<std::string>()));
      } else if (key == "seeds") {
        plan.seeds = value.get<std::vector<std::uint64_t>>();
      } else if (key == "grids") {
        for (const auto& [gk, gv] : value.items()) {
          if (gk == "bandwidth") {
            plan.bandwidths = gv.get<std::vector<double>>();
          } else if (gk == "kernel") {
            plan.kernels.clear();
            for (const auto& k : gv) plan.kernels.push_back(parse_kernel_family(k.get<std::string>()));
          } else if (gk == "tau_step") {
            plan.tau_step = gv.get<double>();
          } else if (gk == "quantile_iterations") {
            plan.quantile_iterations = gv.get<int>();
          } else {
            throw ValidationError("unknown grids key '" + gk + "'");
          }
        }
      } else if (key == "metrics") {
        // Informational: every metric computable for the source is reported.
        for (const auto& m : value) {
          const auto name = m.get<std::string>();
          if (name != "pehe" && name != "ate" && name != "att" && name != "policy_risk" &&
              name != "cf_error") {
            throw ValidationError("unknown metric '" + name + "'");
          }
        }
      } else if (key == "propensity") {
        plan.propensity = parse_propensity_spec(value.get<std::string>());
      } else if (key == "l2") {
        plan.l2 = value.get<double>();
      } else if (key == "clip") {
        plan.clip = value.get<double>();
      } else if (key == "standardize") {
        plan.standardize = value.get<bool>();
      } else if (key == "predict_both_arms") {
        plan.predict_both_arms = value.get<bool>();
      } else if (key == "in_sample") {
        plan.in_sample = value.get<bool>();
      } else if (key == "out_sample") {
        plan.out_sample = value.get<bool>();
      } else if (key == "max_validation_units") {
        plan.max_validation_units = value.get<std::size_t>();
      } else if (key == "threads") {
        plan.threads = value.get<unsigned>();
      } else {
        throw ValidationError("unknown plan key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

json to_json(const ExperimentPlan& plan) {
  json j;
  if (plan.source == ExperimentPlan::Source::sim) {
    j["source"] = json{{"type", "sim"}};
  } else {
    j["source"] = json{{"type", "csv"}, {"path", plan.csv_path}, {"schema", schema_to_json(plan.schema)}};
  }
  j["sim_config"] = to_json(plan.sim);
  j["rank_target"] = plan.rank_target ? json(*plan.rank_target) : json(nullptr);
  j["calibration_n"] = plan.calibration_n;
  std::vector<std::string> methods, kernels;
  for (Method m : plan.methods) methods.emplace_back(to_string(m));
  for (KernelFamily k : plan.kernels) kernels.emplace_back(to_string(k));
  j["methods"] = methods;
  j["seeds"] = plan.seeds;
  j["grids"] = json{{"bandwidth", plan.bandwidths},
                    {"kernel", kernels},
                    {"tau_step", plan.tau_step},
                    {"quantile_iterations", plan.quantile_iterations}};
  j["propensity"] = to_string(plan.propensity);
  j["l2"] = plan.l2;
  j["clip"] = plan.clip;
  j["standardize"] = plan.standardize;
  j["predict_both_arms"] = plan.predict_both_arms;
  j["in_sample"] = plan.in_sample;
  j["out_sample"] = plan.out_sample;
  j["max_validation_units"] = plan.max_validation_units;
  return j;
}

double weighted_crps(std::span<const double> values, std::span<const double> weights, double y) {
  if (values.size() != weights.size() || values.empty()) {
    throw ValidationError("weighted_crps: inconsistent inputs");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw CoverageError("weighted_crps: no positive weight");
  // E|V - y| - E|V - V'| / 2, the second term via prefix sums over sorted V.
  double to_y = 0.0, spread = 0.0, prefix_w = 0.0, prefix_wv = 0.0;
  for (std::size_t i : order) {
    const double w = weights[i] / total;
    const double v = values[i];
    to_y += w * std::abs(v - y);
    spread += w * (v * prefix_w - prefix_wv);
    prefix_w += w;
    prefix_wv += w * v;
  }
  return to_y - spread;
}

BandwidthSelection select_bandwidth(const ObservationalDataset& train,
                                    const ObservationalDataset& validation,
                                    const PropensityFn& propensity,
                                    const std::vector<KernelFamily>& kernels,
                                    const std::vector<double>& bandwidths,
                                    std::size_t max_units, unsigned threads) {
  if (kernels.empty() || bandwidths.empty()) {
    throw ValidationError("bandwidth selection needs a non-empty grid");
  }
  const std::size_t n = train.size();
  const std::size_t m = train.dim();
  std::vector<double> inverse_p(n);
  for (std::size_t k = 0; k < n; ++k) {
    inverse_p[k] = 1.0 / propensity(train.covariates(k), train.treatment(k) == 1.0 ? 1 : 0);
  }
  std::vector<std::size_t> units;
  const std::size_t n_val = validation.size();
  const std::size_t take = std::min(max_units, n_val);
  for (std::size_t i = 0; i < take; ++i) units.push_back(i * n_val / take);

  struct Candidate {
    KernelFamily kernel;
    double bandwidth;
    double score = 0.0;
    std::size_t failures = 0;
  };
  std::vector<Candidate> candidates;
  for (KernelFamily k : kernels) {
    for (double h : bandwidths) candidates.push_back({k, h});
  }

  // scores[c * units + u]; NaN marks a coverage failure.
  std::vector<double> scores(candidates.size() * units.size());
  parallel_for(units.size(), threads, [&](std::size_t u) {
    const std::size_t row = units[u];
    const auto zq = validation.covariates(row);
    const double xq = validation.treatment(row);
    const double yq = validation.outcome(row);
    std::vector<double> values, weights, delta(m);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const KernelSpec spec(candidates[c].kernel, candidates[c].bandwidth);
      values.clear();
      weights.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (train.treatment(k) != xq) continue;
        const auto z = train.covariates(k);
        for (std::size_t j = 0; j < m; ++j) delta[j] = z[j] - zq[j];
        const double w = scaled_weight(spec, delta);
        if (w == 0.0) continue;
        values.push_back(train.outcome(k));
        weights.push_back(w * inverse_p[k]);
      }
      double total = 0.0;
      for (double w : weights) total += w;
      scores[c * units.size() + u] = total > 0.0
                                         ? weighted_crps(values, weights, yq)
                                         : std::numeric_limits<double>::quiet_NaN();
    }
  });

  BandwidthSelection best;
  best.candidates = json::array();
  bool have_best = false;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& cand = candidates[c];
    double sum = 0.0;
    std::size_t ok = 0;
    for (std::size_t u = 0; u < units.size(); ++u) {
      const double s = scores[c * units.size() + u];
      if (std::isnan(s)) {
        ++cand.failures;
      } else {
        sum += s;
        ++ok;
      }
    }
    cand.score = ok > 0 ? sum / static_cast<double>(ok) : std::numeric_limits<double>::infinity();
    best.candidates.push_back(json{{"kernel", std::string(to_string(cand.kernel))},
                                   {"bandwidth", cand.bandwidth},
                                   {"crps", ok > 0 ? json(cand.score) : json(nullptr)},
                                   {"failures", cand.failures}});
    if (!have_best || cand.failures < best.failures ||
        (cand.failures == best.failures && cand.score < best.score)) {
      best.kernel = cand.kernel;
      best.bandwidth = cand.bandwidth;
      best.score = cand.score;
      best.failures = cand.failures;
      have_best = true;
    }
  }
  return best;
}

namespace {

struct UnitPrediction {
  double counterfactual = 0.0;
  double factual = 0.0;
  bool ok = false;
  bool bounded = true;
};

struct SeedData {
  ObservationalDataset dataset;
  std::optional<PotentialOutcomeTable> truth;
  std::optional<std::vector<bool>> randomized;
  std::optional<TreatedProbabilityFn> true_propensity;
  json info = json::object();
};

std::string seed_path(const std::string& pattern, std::uint64_t seed) {
  std::string path = pattern;
  const std::string token = "{seed}";
  for (std::size_t pos = path.find(token); pos != std::string::npos; pos = path.find(token)) {
    path.replace(pos, token.size(), std::to_string(seed));
  }
  return path;
}

SeedData prepare_seed(const ExperimentPlan& plan, std::uint64_t seed) {
  if (plan.source == ExperimentPlan::Source::sim) {
    SimConfig config = plan.sim;
    config.seed = seed;
    json info = json::object();
    if (plan.rank_target) {
      const BetaCalibration cal = calibrate_beta(config, *plan.rank_target, plan.calibration_n);
      config.beta = cal.beta;
      config.violation_draw = cal.violation_draw;
      info["beta_calibration"] = json{{"target_tau", *plan.rank_target},
                                      {"beta", cal.beta},
                                      {"achieved_tau", cal.achieved_tau},
                                      {"violation_draw", cal.violation_draw},
                                      {"bracketed", cal.bracketed}};
    }
    SimResult sim = simulate(config);
    info["sim_config"] = to_json(config);
    info["w_x"] = sim.w_x;
    info["w_y"] = sim.w_y;
    if (config.beta > 0.0) info["w_y1"] = sim.w_y1;
    info["covariance_regularized"] = sim.covariance_regularized;
    TreatedProbabilityFn pi = sim.propensity();
    return SeedData{std::move(sim.dataset), std::move(sim.truth), std::nullopt, std::move(pi),
                    std::move(info)};
  }
  LoadedData loaded = load_csv_full(seed_path(plan.csv_path, seed), plan.schema);
  ObservationalDataset dataset = std::move(loaded.dataset);
  json info = json{{"path", seed_path(plan.csv_path, seed)}};
  // Files without split labels are split by a seeded shuffle.
  if (dataset.indices(Split::train).size() == dataset.size()) {
    const std::size_t n = dataset.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, static_cast<std::uint64_t>(SimStream::split));
    rng.shuffle(order);
    const auto& r = plan.sim.split_ratios;
    const auto n_train = static_cast<std::size_t>(std::llround(r[0] * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(r[1] * static_cast<double>(n)));
    std::vector<Split> splits(n);
    for (std::size_t i = 0; i < n; ++i) {
      splits[order[i]] = i < n_train ? Split::train : i < n_train + n_val ? Split::val : Split::test;
    }
    const auto cov = dataset.covariate_matrix();
    dataset = ObservationalDataset(
        dataset.mode(), std::vector<double>(dataset.treatments().begin(), dataset.treatments().end()),
        std::vector<double>(cov.begin(), cov.end()), dataset.dim(),
        std::vector<double>(dataset.outcomes().begin(), dataset.outcomes().end()), std::move(splits));
    info["split"] = "seeded shuffle";
  }
  return SeedData{std::move(dataset), std::move(loaded.truth), std::move(loaded.randomized),
                  std::nullopt, std::move(info)};
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Fills metric columns of `row` from per-unit predictions.
void score_units(const SeedData& data, std::span<const std::size_t> rows,
                 const std::vector<UnitPrediction>& preds, double outcome_sd, ResultRow& row) {
  std::vector<std::size_t> kept;
  ItePredictions ite;
  std::vector<double> cf_errors;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!preds[i].ok) {
      ++row.n_failed;
      continue;
    }
    row.n_unbounded += !preds[i].bounded;
    const std::size_t k = rows[i];
    kept.push_back(k);
    const bool treated = data.dataset.treatment(k) == 1.0;
    ite.y1_hat.push_back(treated ? preds[i].factual : preds[i].counterfactual);
    ite.y0_hat.push_back(treated ? preds[i].counterfactual : preds[i].factual);
    if (data.truth) {
      const double truth_cf = treated ? data.truth->y0[k] : data.truth->y1[k];
      cf_errors.push_back(std::abs(preds[i].counterfactual - truth_cf));
    }
  }
  row.n_units = rows.size();
  if (kept.empty()) {
    row.status = "error";
    if (row.message.empty()) row.message = "no unit could be estimated";
    return;
  }
  if (row.n_failed > 0) {
    row.status = "partial";
    row.message = std::to_string(row.n_failed) + " units failed (coverage)";
  }
  if (data.truth) {
    const PotentialOutcomeTable truth = data.truth->select(kept);
    row.sqrt_pehe = std::sqrt(pehe(ite, truth));
    row.ate_error = ate_error(ite, truth);
    row.median_abs_cf_error = median(cf_errors);
    if (outcome_sd > 0.0) row.sqrt_pehe_standardized = row.sqrt_pehe / outcome_sd;
  }
  if (data.randomized) {
    std::vector<double> treated_y, control_e_y, e_x, e_y;
    std::vector<std::size_t> treated_index;
    ItePredictions e_pred;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const std::size_t k = kept[i];
      const double x = data.dataset.treatment(k);
      const double y = data.dataset.outcome(k);
      const bool in_e = (*data.randomized)[k];
      if (x == 1.0) {
        treated_y.push_back(y);
        treated_index.push_back(i);
      } else if (in_e) {
        control_e_y.push_back(y);
      }
      if (in_e) {
        e_pred.y1_hat.push_back(ite.y1_hat[i]);
        e_pred.y0_hat.push_back(ite.y0_hat[i]);
        e_x.push_back(x);
        e_y.push_back(y);
      }
    }
    if (!treated_y.empty() && !control_e_y.empty()) {
      row.att_error = att_error(ite, treated_y, control_e_y, treated_index);
    }
    if (e_pred.size() > 0) row.policy_risk = policy_risk(e_pred, e_x, e_y).risk;
  }
}

Evidence unit_evidence(const ObservationalDataset& d, std::size_t k) {
  const auto z = d.covariates(k);
  return Evidence{d.treatment(k), std::vector<double>(z.begin(), z.end()), d.outcome(k),
                  1.0 - d.treatment(k)};
}

std::vector<ResultRow> run_seed(const ExperimentPlan& plan, std::uint64_t seed, json& seed_info) {
  SeedData data = prepare_seed(plan, seed);
  seed_info = data.info;
  seed_info["seed"] = seed;

  if (plan.standardize) {
    const auto train_rows = data.dataset.indices(Split::train);
    const std::size_t m = data.dataset.dim();
    std::vector<double> mean(m, 0.0), scale(m, 0.0);
    for (std::size_t k : train_rows) {
      const auto z = data.dataset.covariates(k);
      for (std::size_t j = 0; j < m; ++j) mean[j] += z[j];
    }
    for (double& v : mean) v /= static_cast<double>(train_rows.size());
    for (std::size_t k : train_rows) {
      const auto z = data.dataset.covariates(k);
      for (std::size_t j = 0; j < m; ++j) scale[j] += (z[j] - mean[j]) * (z[j] - mean[j]);
    }
    for (double& v : scale) {
      v = std::sqrt(v / static_cast<double>(train_rows.size()));
      if (!(v > 0.0)) v = 1.0;
    }
    data.dataset = data.dataset.standardized(mean, scale);
    if (data.true_propensity) {
      // Oracle propensities are defined on the raw covariates.
      data.true_propensity = [pi = *data.true_propensity, mean, scale](std::span<const double> z) {
        std::vector<double> raw(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) raw[j] = z[j] * scale[j] + mean[j];
        return pi(raw);
      };
    }
  }

  const ObservationalDataset train = data.dataset.subset(Split::train);
  const auto val_rows = data.dataset.indices(Split::val);
  if (val_rows.empty()) throw ValidationError("validation split is empty");
  const ObservationalDataset validation = data.dataset.select(val_rows);
  double outcome_sd = sample_sd(train.outcomes());

  PropensityFn propensity;
  switch (plan.propensity.kind) {
    case PropensitySpec::Kind::logistic: {
      LogisticOptions opt;
      opt.l2 = plan.l2;
      opt.clip = plan.clip;
      const LogisticFit fit = fit_logistic(train, opt);
      propensity = as_propensity_fn(fit.model);
      seed_info["propensity"] = json{{"kind", "logistic"},
                                     {"iterations", fit.iterations},
                                     {"converged", fit.converged},
                                     {"separation_warning", fit.separation_warning},
                                     {"weights", fit.model.weights},
                                     {"intercept", fit.model.intercept}};
      break;
    }
    case PropensitySpec::Kind::oracle:
      propensity = as_propensity_fn(*data.true_propensity, plan.clip);
      seed_info["propensity"] = json{{"kind", "oracle"}};
      break;
    case PropensitySpec::Kind::scaled: {
      PropensityOverride ov;
      ov.mode = PropensityOverride::Mode::scaled;
      ov.c0 = plan.propensity.c0;
      ov.c1 = plan.propensity.c1;
      const OverrideCheck check = check_override(*data.true_propensity, ov, train);
      propensity = override_propensity(*data.true_propensity, ov);
      seed_info["propensity"] = json{{"kind", to_string(plan.propensity)},
                                     {"fraction_out_of_range", check.fraction_out_of_range},
                                     {"warning", check.warning}};
      break;
    }
  }

  std::vector<std::pair<std::string, std::vector<std::size_t>>> samples;
  if (plan.in_sample) samples.emplace_back("in", data.dataset.indices(Split::train));
  if (plan.out_sample) samples.emplace_back("out", data.dataset.indices(Split::test));

  std::optional<BandwidthSelection> selection;
  const TauGrid grid = TauGrid::uniform(plan.tau_step);
  QuantileFitOptions qopt;
  qopt.iterations = plan.quantile_iterations;

  std::vector<ResultRow> out;
  for (Method method : plan.methods) {
    std::vector<ResultRow> rows;
    for (const auto& [sample, units] : samples) {
      ResultRow r;
      r.seed = std::to_string(seed);
      r.method = std::string(to_string(method));
      r.sample = sample;
      r.n_units = units.size();
      rows.push_back(r);
    }
    try {
      std::function<UnitPrediction(const Evidence&)> predict;
      std::optional<CounterfactualEstimator> estimator;
      std::optional<BilevelQuantileModel> bilevel;
      std::optional<FourStepQuantileModel> fourstep;
      if (method == Method::ours || method == Method::ours_weighted) {
        if (!selection) {
          selection = select_bandwidth(train, validation, propensity, plan.kernels,
                                       plan.bandwidths, plan.max_validation_units, plan.threads);
          seed_info["bandwidth_selection"] =
              json{{"criterion", "validation factual CRPS"},
                   {"kernel", std::string(to_string(selection->kernel))},
                   {"bandwidth", selection->bandwidth},
                   {"candidates", selection->candidates}};
        }
        estimator.emplace(train, KernelSpec(selection->kernel, selection->bandwidth), propensity);
        const bool weighted = method == Method::ours_weighted;
        predict = [&, weighted](const Evidence& ev) {
          UnitPrediction p;
          const RowWeightFn w = weighted ? kernel_ratio_weight(train, estimator->kernel(), ev.z)
                                         : RowWeightFn{};
          const CounterfactualEstimate est = estimator->estimate(ev, w);
          p.counterfactual = est.y_hat;
          p.bounded = est.bounded;
          p.factual = ev.y;
          p.ok = true;
          return p;
        };
        for (auto& r : rows) {
          r.kernel = std::string(to_string(selection->kernel));
          r.bandwidth = selection->bandwidth;
        }
      } else if (method == Method::bilevel) {
        bilevel.emplace(train, grid, qopt, plan.threads);
        predict = [&](const Evidence& ev) {
          UnitPrediction p;
          p.counterfactual = bilevel->estimate(ev);
          p.factual = ev.y;
          if (plan.predict_both_arms) {
            std::vector<double> f{ev.x};
            f.insert(f.end(), ev.z.begin(), ev.z.end());
            p.factual = bilevel->model(bilevel->selected_level(ev)).predict(f);
          }
          p.ok = true;
          return p;
        };
      } else {
        fourstep.emplace(train, grid, propensity, qopt, plan.threads);
        predict = [&](const Evidence& ev) {
          UnitPrediction p;
          p.counterfactual = fourstep->estimate(ev);
          p.factual = plan.predict_both_arms
                          ? fourstep->model(static_cast<int>(ev.x), fourstep->selected_level(ev))
                                .predict(ev.z)
                          : ev.y;
          p.ok = true;
          return p;
        };
      }

      for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& units = samples[s].second;
        std::vector<UnitPrediction> preds(units.size());
        parallel_for(units.size(), plan.threads, [&](std::size_t i) {
          try {
            preds[i] = predict(unit_evidence(data.dataset, units[i]));
          } catch (const CoverageError&) {
            preds[i].ok = false;
          }
        });
        score_units(data, units, preds, outcome_sd, rows[s]);
      }
    } catch (const std::exception& e) {
      for (auto& r : rows) {
        r.status = "error";
        r.message = e.what();
      }
    }
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

void check_sources(const ExperimentPlan& plan) {
  if (plan.source != ExperimentPlan::Source::csv) return;
  for (std::uint64_t seed : plan.seeds) {
    const std::string path = seed_path(plan.csv_path, seed);
    if (!std::filesystem::exists(path)) throw IoError("data file '" + path + "' does not exist");
  }
}

std::string cell(double v) { return std::isnan(v) ? "" : format_double(v); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<ResultRow> aggregate_rows(const std::vector<ResultRow>& rows) {
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows) {
    if (r.stat != "seed") continue;
    const auto key = std::make_pair(r.method, r.sample);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<ResultRow> out;
  for (const auto& [method, sample] : keys) {
    std::vector<const ResultRow*> group;
    for (const auto& r : rows) {
      if (r.stat == "seed" && r.method == method && r.sample == sample && r.status != "error") {
        group.push_back(&r);
      }
    }
    ResultRow mean_row, sd_row;
    for (ResultRow* a : {&mean_row, &sd_row}) {
      a->seed = "all";
      a->method = method;
      a->sample = sample;
      a->status = group.empty() ? "error" : "ok";
    }
    mean_row.stat = "mean";
    sd_row.stat = "std";
    auto reduce = [&](double ResultRow::*field) {
      std::vector<double> v;
      for (const auto* r : group) {
        if (!std::isnan(r->*field)) v.push_back(r->*field);
      }
      if (v.empty()) return;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      mean_row.*field = mean;
      sd_row.*field = sample_sd(v);
    };
    for (auto field : {&ResultRow::sqrt_pehe, &ResultRow::sqrt_pehe_standardized,
                       &ResultRow::ate_error, &ResultRow::att_error, &ResultRow::policy_risk,
                       &ResultRow::median_abs_cf_error}) {
      reduce(field);
    }
    for (const auto* r : group) {
      mean_row.n_units += r->n_units;
      mean_row.n_failed += r->n_failed;
      mean_row.n_unbounded += r->n_unbounded;
    }
    sd_row.n_units = mean_row.n_units;
    sd_row.n_failed = mean_row.n_failed;
    sd_row.n_unbounded = mean_row.n_unbounded;
    if (!std::isnan(mean_row.sqrt_pehe)) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f \xC2\xB1 %.2f", mean_row.sqrt_pehe,
                    sd_row.sqrt_pehe);
      mean_row.summary = buf;
    }
    mean_row.message = std::to_string(group.size()) + " seeds";
    out.push_back(mean_row);
    out.push_back(sd_row);
  }
  return out;
}

ExperimentResults run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  check_sources(plan);
  ExperimentResults results;
  json seeds = json::array();
  // Seeds run in order; parallelism lives inside each cell.
  for (std::uint64_t seed : plan.seeds) {
    json info;
    std::vector<ResultRow> rows;
    try {
      rows = run_seed(plan, seed, info);
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      for (Method method : plan.methods) {
        for (const char* sample : {"in", "out"}) {
          if ((sample[0] == 'i' && !plan.in_sample) || (sample[0] == 'o' && !plan.out_sample)) {
            continue;
          }
          ResultRow r;
          r.seed = std::to_string(seed);
          r.method = std::string(to_string(method));
          r.sample = sample;
          r.status = "error";
          r.message = e.what();
          rows.push_back(r);
        }
      }
      info["seed"] = seed;
      info["error"] = e.what();
    }
    seeds.push_back(info);
    results.rows.insert(results.rows.end(), rows.begin(), rows.end());
  }
  results.aggregates = aggregate_rows(results.rows);
  results.manifest = json{{"plan", to_json(plan)}, {"seeds", seeds}};
  json cells = json::array();
  for (const auto& r : results.aggregates) {
    if (r.stat == "mean" && !r.summary.empty()) {
      cells.push_back(json{{"method", r.method}, {"sample", r.sample}, {"sqrt_pehe", r.summary}});
    }
  }
  results.manifest["table_cells"] = cells;
  results.manifest["not_reproduced"] =
      "neural baselines (T-learner, X-learner, BNN, TARNet, CFRNet, CEVAE, DragonNet, DeRCFR, "
      "DESCN, ESCFR, CFQP) are outside this tool";
  return results;
}

std::string results_csv(const std::vector<ResultRow>& rows,
                        const std::vector<std::string>& prefix_header,
                        const std::vector<std::vector<std::string>>& prefixes) {
  std::ostringstream out;
  for (const auto& h : prefix_header) out << h << ',';
  out << "stat,seed,method,sample,n_units,n_failed,n_unbounded,sqrt_pehe,"
         "sqrt_pehe_standardized,ate_error,att_error,policy_risk,median_abs_cf_error,kernel,"
         "bandwidth,status,summary,message\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!prefixes.empty()) {
      for (const auto& p : prefixes[i]) out << csv_escape(p) << ',';
    }
    out << r.stat << ',' << r.seed << ',' << r.method << ',' << r.sample << ',' << r.n_units
        << ',' << r.n_failed << ',' << r.n_unbounded << ',' << cell(r.sqrt_pehe) << ','
        << cell(r.sqrt_pehe_standardized) << ',' << cell(r.ate_error) << ','
        << cell(r.att_error) << ',' << cell(r.policy_risk) << ','
        << cell(r.median_abs_cf_error) << ',' << r.kernel << ',' << cell(r.bandwidth) << ','
        << r.status << ',' << csv_escape(r.summary) << ',' << csv_escape(r.message) << '\n';
  }
  return out.str();
}

std::string results_csv(const ExperimentResults& results) {
  std::vector<ResultRow> all = results.rows;
  all.insert(all.end(), results.aggregates.begin(), results.aggregates.end());
  return results_csv(all);
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "alpha") return SweepAxis::alpha;
  if (text == "bandwidth") return SweepAxis::bandwidth;
  if (text == "kernel") return SweepAxis::kernel;
  if (text == "rho") return SweepAxis::rho;
  if (text == "beta") return SweepAxis::beta;
  throw ValidationError("unknown sweep axis '" + std::string(text) + "'");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::alpha:
      return "alpha";
    case SweepAxis::bandwidth:
      return "bandwidth";
    case SweepAxis::kernel:
      return "kernel";
    case SweepAxis::rho:
      return "rho";
    case SweepAxis::beta:
      return "beta";
  }
  return "alpha";
}

SweepResults sweep(SweepAxis axis, const std::vector<std::string>& values,
                   const ExperimentPlan& base) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  SweepResults out{axis, values, {}};
  std::vector<ExperimentPlan> plans;
  for (const auto& text : values) {
    ExperimentPlan plan = base;
    double v = 0.0;
    if (axis != SweepAxis::kernel && !parse_double(text, v)) {
      throw ValidationError("sweep value '" + text + "' is not a number");
    }
    switch (axis) {
      case SweepAxis::alpha:
        plan.sim.alpha = v;
        break;
      case SweepAxis::rho:
        plan.sim.rho = v;
        break;
      case SweepAxis::beta:
        plan.sim.beta = v;
        plan.rank_target.reset();
        break;
      case SweepAxis::bandwidth:
        plan.bandwidths = {v};
        break;
      case SweepAxis::kernel:
        plan.kernels = {parse_kernel_family(text)};
        break;
    }
    if (axis != SweepAxis::bandwidth && axis != SweepAxis::kernel &&
        plan.source != ExperimentPlan::Source::sim) {
      throw ValidationError("sweeping simulator parameters needs a simulated source");
    }
    plan.validate();
    plans.push_back(std::move(plan));
  }
  for (const auto& plan : plans) out.runs.push_back(run_experiment(plan));
  return out;
}

std::string SweepResults::csv() const {
  std::vector<ResultRow> all;
  std::vector<std::vector<std::string>> prefixes;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const auto* part : {&runs[i].rows, &runs[i].aggregates}) {
      for (const auto& r : *part) {
        all.push_back(r);
        prefixes.push_back({std::string(to_string(axis)), values[i]});
      }
    }
  }
  return results_csv(all, {"axis", "value"}, prefixes);
}

}  // namespace rankcf
