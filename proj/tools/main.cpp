// Command-line front end. Everything goes through the shared library's C
// interface; this file holds no numerics of its own.
//
// Exit codes: 0 success, 1 usage error, 2 data or processing error,
// 3 self-check property failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pointode/pointode.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProperty = 3;

bool verbose() {
  const char* v = std::getenv("PODE_VERBOSE");
  return v && *v && std::string(v) != "0";
}

void vlog(const std::string& message) {
  if (verbose()) std::fprintf(stderr, "pointode: %s\n", message.c_str());
}

// Prints the library's last error and picks the exit code for it.
int report_failure(pode_status status, const std::string& doing) {
  std::fprintf(stderr, "error: %s: %s\n", doing.c_str(), pode_last_error());
  return status == PODE_PROPERTY ? kExitProperty : kExitData;
}

struct CloudHandle {
  pode_cloud* ptr = nullptr;
  ~CloudHandle() { pode_cloud_free(ptr); }
};
struct PlanHandle {
  pode_plan* ptr = nullptr;
  ~PlanHandle() { pode_plan_free(ptr); }
};
struct ModelHandle {
  pode_model* ptr = nullptr;
  ~ModelHandle() { pode_model_free(ptr); }
};
struct ResultHandle {
  pode_result* ptr = nullptr;
  ~ResultHandle() { pode_result_free(ptr); }
};

// Shared flag bundle for the two inference commands.
struct InferFlags {
  std::string points;
  std::string weights;
  std::string plan;
  std::string preset = "elite";
  std::string numeric = "float";
  int iters = 0;  // 0: leave the model's budget alone
  double t_end = -1.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_infer_flags(CLI::App* cmd, InferFlags& f, bool weights_required) {
  cmd->add_option("--points", f.points, "point cloud file (text x-y-z lines, or .bin/.raw/.f32)")
      ->required();
  auto* weights = cmd->add_option("--weights", f.weights, "weight archive to load");
  if (weights_required) weights->required();
  cmd->add_option("--plan", f.plan, "precomputed sampling plan (default: computed internally)");
  cmd->add_option("--preset", f.preset, "architecture preset when building random weights")
      ->check(CLI::IsMember({"pointmlp-like", "naive", "pointode", "elite"}));
  cmd->add_option("--iters", f.iters, "solver iteration budget per stage")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--t-end", f.t_end, "solver integration interval end")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--numeric", f.numeric, "arithmetic path (default float)")
      ->check(CLI::IsMember({"float", "fixed"}));
  cmd->add_option("--seed", f.seed, "seed for random weights when --weights is absent");
  cmd->add_option("--threads", f.threads, "worker threads for inference (default 1)")
      ->check(CLI::PositiveNumber);
}

// Loads or builds the model per flags; returns exit code, 0 on success.
int make_model(const InferFlags& f, ModelHandle& model) {
  if (!f.weights.empty()) {
    if (pode_status s = pode_model_load(f.weights.c_str(), &model.ptr); s != PODE_OK)
      return report_failure(s, "loading " + f.weights);
    vlog("loaded weights from " + f.weights);
  } else {
    pode_config cfg;
    if (pode_status s = pode_config_preset(f.preset.c_str(), &cfg); s != PODE_OK) {
      std::fprintf(stderr, "error: %s\n", pode_last_error());
      return kExitUsage;
    }
    if (f.iters > 0) cfg.ode_iterations = static_cast<uint32_t>(f.iters);
    if (f.t_end >= 0.0) cfg.t_end = f.t_end;
    if (pode_status s = pode_model_build(&cfg, f.seed, &model.ptr); s != PODE_OK)
      return report_failure(s, "building random weights");
    vlog("built random '" + f.preset + "' weights, seed " + std::to_string(f.seed));
  }
  if (f.iters > 0 || f.t_end >= 0.0) {
    pode_config cfg;
    pode_model_config(model.ptr, &cfg);
    uint32_t iters = f.iters > 0 ? static_cast<uint32_t>(f.iters) : cfg.ode_iterations;
    double t_end = f.t_end >= 0.0 ? f.t_end : cfg.t_end;
    if (pode_status s = pode_model_set_solver(model.ptr, iters, t_end); s != PODE_OK)
      return report_failure(s, "applying solver overrides");
  }
  return kExitOk;
}

// Loads the cloud, normalizes it onto the unit sphere, and prepares the
// sampling plan (from file or computed from the cloud).
int make_inputs(const InferFlags& f, const ModelHandle& model, CloudHandle& cloud,
                PlanHandle& plan) {
  if (pode_status s = pode_cloud_load(f.points.c_str(), &cloud.ptr); s != PODE_OK)
    return report_failure(s, "loading " + f.points);
  vlog("loaded cloud with " + std::to_string(pode_cloud_size(cloud.ptr)) + " points");
  if (pode_status s = pode_cloud_normalize(cloud.ptr); s != PODE_OK)
    return report_failure(s, "normalizing the cloud");

  if (!f.plan.empty()) {
    if (pode_status s = pode_plan_load(f.plan.c_str(), &plan.ptr); s != PODE_OK)
      return report_failure(s, "loading " + f.plan);
    vlog("loaded sampling plan from " + f.plan);
  } else {
    pode_config cfg;
    pode_model_config(model.ptr, &cfg);
    if (pode_status s = pode_plan_build(cloud.ptr, cfg.group_size, &plan.ptr); s != PODE_OK)
      return report_failure(s, "building the sampling plan");
    vlog("built sampling plan internally, k=" + std::to_string(cfg.group_size));
  }
  return kExitOk;
}

void print_timing(const pode_result* result) {
  double prep = 0, ode = 0, ms = 0;
  std::printf("timing (ms):\n");
  pode_result_embed_ms(result, &ms);
  std::printf("  %-10s %9.3f\n", "embedding", ms);
  double total = ms;
  for (size_t s = 0; s < 4; ++s) {
    pode_result_stage_ms(result, s, &prep, &ode);
    std::printf("  stage %zu    %9.3f   (prep %.3f, ode %.3f)\n", s + 1, prep + ode, prep, ode);
    total += prep + ode;
  }
  pode_result_head_ms(result, &ms);
  std::printf("  %-10s %9.3f\n", "head", ms);
  total += ms;
  std::printf("  %-10s %9.3f\n", "total", total);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int write_features(const std::string& path, const std::vector<double>& values, size_t rows,
                   size_t dim) {
  if (ends_with(path, ".csv")) {
    std::ofstream out(path);
    if (!out) {
      std::fprintf(stderr, "error: cannot open %s for writing\n", path.c_str());
      return kExitData;
    }
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < dim; ++c) {
        if (c) out << ',';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", values[r * dim + c]);
        out << buf;
      }
      out << '\n';
    }
    return out ? kExitOk : kExitData;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::fprintf(stderr, "error: cannot open %s for writing\n", path.c_str());
    return kExitData;
  }
  std::vector<float> packed(values.begin(), values.end());
  out.write(reinterpret_cast<const char*>(packed.data()),
            static_cast<std::streamsize>(packed.size() * sizeof(float)));
  return out ? kExitOk : kExitData;
}

int cmd_extract(const InferFlags& f, const std::string& out_path) {
  ModelHandle model;
  CloudHandle cloud;
  PlanHandle plan;
  if (int rc = make_model(f, model); rc != kExitOk) return rc;
  if (int rc = make_inputs(f, model, cloud, plan); rc != kExitOk) return rc;

  pode_numeric numeric = f.numeric == "fixed" ? PODE_NUMERIC_FIXED : PODE_NUMERIC_FLOAT;
  ResultHandle result;
  if (pode_status s = pode_infer(model.ptr, cloud.ptr, plan.ptr, numeric, f.threads, &result.ptr);
      s != PODE_OK)
    return report_failure(s, "running inference");

  size_t rows = 0, dim = 0;
  pode_result_stage_shape(result.ptr, 3, &rows, &dim);
  std::vector<double> features(rows * dim);
  pode_result_stage_features(result.ptr, 3, features.data());
  std::printf("stage-4 features: %zu x %zu (%s)\n", rows, dim, f.numeric.c_str());

  if (numeric == PODE_NUMERIC_FIXED) {
    // run the float path on the same inputs and report the worst deviation
    ResultHandle ref;
    if (pode_status s =
            pode_infer(model.ptr, cloud.ptr, plan.ptr, PODE_NUMERIC_FLOAT, f.threads, &ref.ptr);
        s != PODE_OK)
      return report_failure(s, "running the float reference");
    std::vector<double> reference(rows * dim);
    pode_result_stage_features(ref.ptr, 3, reference.data());
    double worst = 0.0;
    for (size_t i = 0; i < features.size(); ++i)
      worst = std::max(worst, std::abs(features[i] - reference[i]));
    std::printf("fixed vs float max abs feature deviation: %.6g\n", worst);
  }

  print_timing(result.ptr);

  if (int rc = write_features(out_path, features, rows, dim); rc != kExitOk) return rc;
  std::printf("wrote %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_classify(const InferFlags& f) {
  ModelHandle model;
  CloudHandle cloud;
  PlanHandle plan;
  if (int rc = make_model(f, model); rc != kExitOk) return rc;
  if (int rc = make_inputs(f, model, cloud, plan); rc != kExitOk) return rc;

  pode_numeric numeric = f.numeric == "fixed" ? PODE_NUMERIC_FIXED : PODE_NUMERIC_FLOAT;
  ResultHandle result;
  if (pode_status s = pode_infer(model.ptr, cloud.ptr, plan.ptr, numeric, f.threads, &result.ptr);
      s != PODE_OK)
    return report_failure(s, "running inference");

  size_t n = pode_result_logits_len(result.ptr);
  std::vector<double> logits(n);
  pode_result_logits(result.ptr, logits.data());
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return logits[a] > logits[b]; });

  size_t top = std::min<size_t>(5, n);
  std::printf("top-%zu classes (%s):\n", top, f.numeric.c_str());
  for (size_t r = 0; r < top; ++r)
    std::printf("  %zu. class %-4zu logit %.6f\n", r + 1, order[r], logits[order[r]]);
  return kExitOk;
}

int cmd_count(const std::string& preset, std::uint64_t points_n, int iters) {
  pode_config cfg;
  if (pode_status s = pode_config_preset(preset.c_str(), &cfg); s != PODE_OK) {
    std::fprintf(stderr, "error: %s\n", pode_last_error());
    return kExitUsage;
  }
  if (iters > 0) cfg.ode_iterations = static_cast<uint32_t>(iters);

  pode_param_counts params;
  uint64_t flops = 0;
  if (pode_status s = pode_count_params(&cfg, &params); s != PODE_OK)
    return report_failure(s, "counting parameters");
  if (pode_status s = pode_count_flops(&cfg, points_n, &flops); s != PODE_OK)
    return report_failure(s, "counting FLOPs");

  pode_config base;
  pode_config_preset("pointmlp-like", &base);
  base.group_size = cfg.group_size;  // compare at the same grouping width
  pode_param_counts base_params;
  uint64_t base_flops = 0;
  pode_count_params(&base, &base_params);
  pode_count_flops(&base, points_n, &base_flops);

  std::printf("preset: %s\n", preset.c_str());
  std::printf("  %-22s %12s\n", "quantity", "value");
  std::printf("  %-22s %12llu\n", "extractor params",
              static_cast<unsigned long long>(params.feature_extractor));
  std::printf("  %-22s %12llu\n", "head params", static_cast<unsigned long long>(params.head));
  std::printf("  %-22s %12llu  (%.2fM)\n", "total params",
              static_cast<unsigned long long>(params.total), params.total / 1e6);
  std::printf("  %-22s %12llu  (%.3fG, N=%llu, C=%u)\n", "forward FLOPs",
              static_cast<unsigned long long>(flops), flops / 1e9,
              static_cast<unsigned long long>(points_n), cfg.ode_iterations);
  std::printf("vs pointmlp-like:\n");
  std::printf("  %-22s %11.2fx\n", "parameter reduction",
              static_cast<double>(base_params.total) / static_cast<double>(params.total));
  std::printf("  %-22s %11.2fx\n", "FLOP reduction",
              static_cast<double>(base_flops) / static_cast<double>(flops));
  return kExitOk;
}

int cmd_simulate(const std::string& preset, size_t stage, std::uint64_t groups,
                 std::uint64_t lanes, const std::string& csv_path) {
  pode_config cfg;
  if (pode_status s = pode_config_preset(preset.c_str(), &cfg); s != PODE_OK) {
    std::fprintf(stderr, "error: %s\n", pode_last_error());
    return kExitUsage;
  }
  uint64_t steps[4];
  if (pode_status s = pode_pipeline_default_latencies(&cfg, stage - 1, lanes, steps);
      s != PODE_OK)
    return report_failure(s, "computing stage latencies");
  pode_pipeline_report report;
  if (pode_status s = pode_pipeline_simulate(groups, steps, &report); s != PODE_OK)
    return report_failure(s, "simulating the pipeline");

  std::printf("stage %zu, %llu groups, %llu lane(s):\n", stage,
              static_cast<unsigned long long>(groups), static_cast<unsigned long long>(lanes));
  for (size_t i = 0; i < 4; ++i)
    std::printf("  step %zu %-10s %8llu cycles   occupancy %.3f\n", i + 1,
                pode_pipeline_step_name(i), static_cast<unsigned long long>(steps[i]),
                report.occupancy[i]);
  std::printf("  sequential %llu cycles, pipelined %llu cycles, speedup %.3f\n",
              static_cast<unsigned long long>(report.sequential_cycles),
              static_cast<unsigned long long>(report.pipelined_cycles), report.speedup);

  std::string csv = "stage,step,latency,occupancy,speedup\n";
  for (size_t i = 0; i < 4; ++i) {
    char line[128];
    std::snprintf(line, sizeof line, "%zu,%s,%llu,%.6f,%.6f\n", stage,
                  pode_pipeline_step_name(i), static_cast<unsigned long long>(steps[i]),
                  report.occupancy[i], report.speedup);
    csv += line;
  }
  if (csv_path.empty()) {
    std::printf("%s", csv.c_str());
  } else {
    std::ofstream out(csv_path);
    if (!(out << csv)) {
      std::fprintf(stderr, "error: cannot write %s\n", csv_path.c_str());
      return kExitData;
    }
    std::printf("wrote %s\n", csv_path.c_str());
  }
  return kExitOk;
}

int cmd_verify(std::uint64_t seed, const std::string& only) {
  bool all_passed = true;
  bool matched = false;
  for (size_t i = 0; i < pode_verify_count(); ++i) {
    if (!only.empty() && only != pode_verify_name(i)) continue;
    matched = true;
    pode_status s = pode_verify_run(i, seed);
    if (s == PODE_OK) {
      std::printf("[PASS] %-24s %s\n", pode_verify_name(i), pode_verify_summary(i));
    } else {
      all_passed = false;
      std::printf("[FAIL] %-24s %s\n", pode_verify_name(i), pode_last_error());
    }
  }
  if (!matched) {
    std::fprintf(stderr, "error: no property named '%s' (see --help or run without --only)\n",
                 only.c_str());
    return kExitUsage;
  }
  return all_passed ? kExitOk : kExitProperty;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point-cloud feature extraction and classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", []() { return std::string(pode_version()); });

  InferFlags extract_flags;
  std::string out_path = "features.f32";
  CLI::App* extract = app.add_subcommand("extract", "run the feature extractor on a cloud");
  add_infer_flags(extract, extract_flags, false);
  extract->add_option("--out", out_path,
                      "feature output file; .csv writes text, anything else packed f32");

  InferFlags classify_flags;
  CLI::App* classify = app.add_subcommand("classify", "classify a cloud and print top classes");
  add_infer_flags(classify, classify_flags, true);

  std::string count_preset;
  std::uint64_t count_points = 1024;
  int count_iters = 0;
  CLI::App* count = app.add_subcommand("count", "parameter and FLOP census for a preset");
  count->add_option("--preset", count_preset, "architecture preset")->required();
  count->add_option("--points-n", count_points, "input point count for the FLOP census")
      ->check(CLI::PositiveNumber);
  count->add_option("--iters", count_iters, "solver iteration budget")->check(CLI::PositiveNumber);

  std::string sim_preset = "elite";
  size_t sim_stage = 1;
  std::uint64_t sim_groups = 0, sim_lanes = 1;
  std::string sim_csv;
  CLI::App* simulate = app.add_subcommand("simulate", "pipeline makespan model for one stage");
  simulate->add_option("--preset", sim_preset, "architecture preset (default elite)");
  simulate->add_option("--stage", sim_stage, "extractor stage, 1-4")->required();
  simulate->add_option("--groups", sim_groups, "number of sampled groups to stream")->required();
  simulate->add_option("--lanes", sim_lanes, "MAC-array replication factor")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--csv", sim_csv, "write the CSV report here instead of stdout");

  std::uint64_t verify_seed = 1;
  std::string verify_only;
  CLI::App* verify = app.add_subcommand("verify", "run the self-check property suite");
  verify->add_option("--seed", verify_seed, "seed for the generated inputs");
  verify->add_option("--only", verify_only, "run just the named property");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (extract->parsed()) return cmd_extract(extract_flags, out_path);
  if (classify->parsed()) return cmd_classify(classify_flags);
  if (count->parsed()) return cmd_count(count_preset, count_points, count_iters);
  if (simulate->parsed()) {
    if (sim_stage < 1 || sim_stage > 4) {
      std::fprintf(stderr, "error: --stage must be between 1 and 4\n");
      return kExitUsage;
    }
    return cmd_simulate(sim_preset, sim_stage, sim_groups, sim_lanes, sim_csv);
  }
  if (verify->parsed()) return cmd_verify(verify_seed, verify_only);
  return kExitUsage;
}
