// qukf_sim: run scenarios, compare the two estimators, benchmark the QUKF.
//
// Exit codes: 0 success, 1 other failure, 2 config parse error,
// 3 validation error, 4 divergence, 5 I/O error, 64 bad command line.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "qukf/bench.hpp"
#include "qukf/config.hpp"
#include "qukf/error.hpp"
#include "qukf/metrics.hpp"
#include "qukf/simulation.hpp"
#include "qukf/telemetry.hpp"

namespace {

using namespace qukf;

enum Exit { kOk = 0, kOther = 1, kParse = 2, kValidation = 3, kDivergence = 4, kIo = 5,
            kUsage = 64 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kParseError: return kParse;
    case ErrorCode::kValidationError: return kValidation;
    case ErrorCode::kDivergenceDetected: return kDivergence;
    case ErrorCode::kIoError: return kIo;
    default: return kOther;
  }
}

struct CommonOptions {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out = ".";
  std::string format = "csv";
  std::vector<std::string> estimators;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "scenario YAML file, or 'default'");
  cmd->add_option("--seed", o.seed, "noise seed");
  cmd->add_option("--duration", o.duration, "simulated time, s");
  cmd->add_option("--estimators", o.estimators, "subset of {qukf, ekf}")->delimiter(',');
}

ScenarioConfig load(const CommonOptions& o) {
  ScenarioConfig c = parse_config(o.config);
  if (o.seed) c.run.seed = *o.seed;
  if (o.duration) c.run.duration = *o.duration;
  if (!o.estimators.empty()) c.run.estimators = o.estimators;
  c.validate();
  return c;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + dir.string() + "': " + ec.message());
}

std::string cell(const std::optional<double>& v, const char* fmt) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, *v);
  return buf;
}

int cmd_run(const CommonOptions& o) {
  const ScenarioConfig c = load(o);
  const TelemetryFormat format = parse_format(o.format);
  const ScenarioResult result = run_scenario(c);
  const MetricsReport report = compute_metrics(result.records, c.run.metric_window);
  const std::filesystem::path dir(o.out);
  ensure_dir(dir);
  write_telemetry(result.records, dir / ("telemetry" + extension(format)), format);
  write_text(dir / "metrics.json", metrics_document(report, c));
  std::printf("wrote %zu records to %s\n", result.records.size(), dir.string().c_str());
  if (c.run.enabled("qukf")) std::printf("qukf mean update: %.4f ms\n", result.qukf_update_ms);
  if (c.run.enabled("ekf")) std::printf("ekf mean update: %.4f ms\n", result.ekf_update_ms);
  return kOk;
}

int cmd_compare(CommonOptions o, int seeds) {
  o.estimators = {"qukf", "ekf"};
  const ScenarioConfig base = load(o);
  std::vector<MetricsReport> reports;
  for (int i = 0; i < seeds; ++i) {
    ScenarioConfig c = base;
    c.run.seed = base.run.seed + static_cast<std::uint64_t>(i);
    reports.push_back(compute_metrics(run_scenario(c).records, c.run.metric_window));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::printf("%d seed(s) from %llu, median RMSE over t >= %.2f s\n", seeds,
              static_cast<unsigned long long>(base.run.seed), base.run.metric_window);
  std::printf("%-9s %-6s %14s %14s %13s\n", "channel", "unit", "EKF", "QUKF", "improvement");
  for (std::size_t ch = 0; ch < reports.front().channels.size(); ++ch) {
    std::vector<double> ekf, qukf;
    for (const auto& r : reports) {
      ekf.push_back(*r.channels[ch].rmse_ekf);
      qukf.push_back(*r.channels[ch].rmse_qukf);
    }
    const double e = median(ekf), q = median(qukf);
    const auto& c = reports.front().channels[ch];
    std::printf("%-9s %-6s %14.6g %14.6g %12s%%\n", c.name.c_str(), c.unit.c_str(), e, q,
                cell(e > 0.0 ? std::optional<double>(improvement_percent(e, q)) : std::nullopt,
                     "%+.2f")
                    .c_str());
  }
  return kOk;
}

int cmd_bench(const CommonOptions& o, int iterations, int sweep_iterations,
              const std::vector<int>& paddings) {
  const ScenarioConfig c = load(o);
  const LatencyStats s = bench_qukf_step(c.system, c.run.dt, c.filter, iterations);
  std::printf("qukf_step: %d iterations, mean %.4f ms, p99 %.4f ms (N = %d)\n", s.iterations,
              s.mean_ms, s.p99_ms, c.filter.tangent_dim());
  const auto points = bench_padding_sweep(c.system, c.run.dt, paddings, sweep_iterations);
  for (const auto& p : points) std::printf("  N = %4d  mean %.4f ms\n", p.dimension, p.mean_ms);
  const ScalingFit fit = fit_cubic(points);
  std::printf("fit t = %.4g + %.4g N^3 ms, R^2 = %.4f\n", fit.c0, fit.c3, fit.r2);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quaternion UKF wrench estimation for a cooperative payload"};
  app.require_subcommand(1);

  CommonOptions run_opts, compare_opts, bench_opts;
  auto* run = app.add_subcommand("run", "run one scenario and write telemetry + metrics");
  add_common(run, run_opts);
  run->add_option("--out", run_opts.out, "output directory");
  run->add_option("--format", run_opts.format, "telemetry format")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  int seeds = 1;
  auto* compare = app.add_subcommand("compare", "QUKF vs EKF on identical measurements");
  add_common(compare, compare_opts);
  compare->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  int iterations = 10000, sweep_iterations = 50;
  std::vector<int> paddings{0, 20, 40, 60, 80, 100};
  auto* bench = app.add_subcommand("bench", "time qukf_step and fit the cubic scaling");
  add_common(bench, bench_opts);
  bench->add_option("--iterations", iterations, "timed steps at the base dimension")
      ->check(CLI::PositiveNumber);
  bench->add_option("--sweep-iterations", sweep_iterations, "timed steps per padded dimension")
      ->check(CLI::PositiveNumber);
  bench->add_option("--paddings", paddings, "dummy entries added per sweep point")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*compare) return cmd_compare(compare_opts, seeds);
    if (*bench) return cmd_bench(bench_opts, iterations, sweep_iterations, paddings);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
  return kOther;
}
