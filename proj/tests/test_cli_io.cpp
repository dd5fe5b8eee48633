#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

#include "qukf/config.hpp"
#include "qukf/error.hpp"
#include "qukf/telemetry.hpp"

using namespace qukf;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn, std::string* what = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qukf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<TelemetryRecord> random_records(int n, bool qukf, bool ekf, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 10.0);
  std::uniform_real_distribution<double> tiny(-1e-300, 1e-300);
  auto v3 = [&] { return Vec3(g(rng), tiny(rng), g(rng) * 1e-12); };
  auto quat = [&] { return rotvec_to_quat(RotationVector(g(rng) * 0.1, g(rng) * 0.1, g(rng) * 0.1)); };
  auto estimate = [&] {
    EstimateRecord e;
    e.state.q = quat();
    e.state.r = v3();
    e.state.v = v3();
    e.state.omega = v3();
    for (int i = 0; i < 6; ++i) e.state.upsilon[i] = g(rng);
    e.wrench = {v3(), v3()};
    e.nis = std::abs(g(rng));
    return e;
  };
  std::vector<TelemetryRecord> out;
  for (int k = 0; k < n; ++k) {
    TelemetryRecord r;
    r.t = 0.01 * k;
    r.truth = {quat(), v3(), v3(), v3()};
    r.truth_wrench = {v3(), v3()};
    r.measurement = {quat(), v3(), v3()};
    if (qukf) r.qukf = estimate();
    if (ekf) r.ekf = estimate();
    r.control = {g(rng), v3()};
    for (int i = 0; i < 8; ++i) r.rotor_commands[i] = g(rng);
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  const ScenarioConfig c = parse_config_string("");
  EXPECT_TRUE(c == ScenarioConfig{});
  EXPECT_EQ(c.system.mass, 3.49);
  EXPECT_EQ(c.system.delta, 72.0);
  EXPECT_EQ(c.run.dt, 0.01);
  EXPECT_EQ(c.filter.noise.process(tangent::kVel, tangent::kVel), 0.1);
  EXPECT_EQ(c.filter.noise.measurement(3, 3), 1e-4);
  EXPECT_EQ(c.filter.initial_cov(tangent::kUpsilon, tangent::kUpsilon), 1.0);
  EXPECT_TRUE(parse_config("default") == ScenarioConfig{});
}

TEST(Config, CommittedDefaultFileMatchesBuiltIn) {
  const ScenarioConfig c = parse_config(fs::path(QUKF_SOURCE_DIR) / "config" / "default.yaml");
  EXPECT_TRUE(c == ScenarioConfig{});
  EXPECT_EQ(config_digest(c), config_digest(ScenarioConfig{}));
}

TEST(Config, RoundTrip) {
  const std::string text = R"(
system:
  mass: 4.25
  inertia: [1.5, 0.1, 2.5]
  lambda_weights: [1, 2, 1, 1, 1, 0.5, 1, 1]
filter:
  phi: 0.7
  padding: 3
  gamma_placement: affine
  wrench_model: in_dynamics
  process_noise:
    velocity: [0.3, 0.2, 0.1]
    padding: 1.0e-6
admittance:
  stiffness: [1.0, 2.0, 3.0]
profile:
  segments:
    - {start: 1.0, end: 3.0, force: [0.1, 0.2, 0.3], torque: [0, 0, 0.1], ramp: 0.25}
run:
  duration: 12.5
  seed: 18446744073709551615
  estimators: [ekf]
  noise_scale: 0.3333333333333333
)";
  const ScenarioConfig a = parse_config_string(text);
  EXPECT_FALSE(a == ScenarioConfig{});
  EXPECT_EQ(a.filter.tangent_dim(), 22);
  EXPECT_EQ(a.run.seed, 18446744073709551615ull);
  const std::string once = serialize_config(a);
  const ScenarioConfig b = parse_config_string(once);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(serialize_config(b), once);
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_NE(config_digest(a), config_digest(ScenarioConfig{}));
  EXPECT_EQ(config_digest(a).size(), 16u);
  EXPECT_TRUE(parse_config_string(serialize_config(ScenarioConfig{})) == ScenarioConfig{});
}

TEST(Config, ValidationNamesEveryField) {
  std::string what;
  EXPECT_EQ(code_of([] { parse_config_string("system:\n  mass: -1\nrun:\n  dt: 0\n"); }, &what),
            ErrorCode::kValidationError);
  EXPECT_NE(what.find("system.mass"), std::string::npos) << what;
  EXPECT_NE(what.find("run.dt"), std::string::npos) << what;
  EXPECT_EQ(what.find("ValidationError: ValidationError"), std::string::npos) << what;
  EXPECT_EQ(code_of([] { parse_config_string("filter:\n  eta: 5.0\n"); }),
            ErrorCode::kValidationError);
  EXPECT_EQ(code_of([] { parse_config_string("run:\n  estimators: [kf]\n"); }),
            ErrorCode::kValidationError);
}

TEST(Config, ParseErrorsCarryLineAndField) {
  std::string what;
  EXPECT_EQ(code_of([] { parse_config_string("system:\n  mas: 1\n"); }, &what),
            ErrorCode::kParseError);
  EXPECT_NE(what.find("line 2"), std::string::npos) << what;
  EXPECT_NE(what.find("system.mas"), std::string::npos) << what;
  EXPECT_EQ(code_of([] { parse_config_string("system:\n  mass: [1\n"); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_config_string("system:\n  mass: heavy\n"); }, &what),
            ErrorCode::kParseError);
  EXPECT_NE(what.find("system.mass"), std::string::npos) << what;
  EXPECT_EQ(code_of([] { parse_config_string("system:\n  inertia: [1, 2]\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_config_string("filter:\n  wrench_model: foo\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { parse_config(fs::path("/nonexistent/qukf.yaml")); }, &what),
            ErrorCode::kIoError);
  EXPECT_NE(what.find("/nonexistent/qukf.yaml"), std::string::npos);
}

TEST(Telemetry, CsvRoundTripIsExact) {
  for (auto [q, e] : {std::pair{true, true}, {true, false}, {false, true}}) {
    const auto recs = random_records(200, q, e, 5);
    std::stringstream ss;
    write_csv(ss, recs);
    const auto back = read_csv(ss);
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) ASSERT_TRUE(back[i] == recs[i]) << i;
  }
}

TEST(Telemetry, JsonLinesRoundTripIsExact) {
  const auto recs = random_records(200, true, true, 6);
  std::stringstream ss;
  write_jsonl(ss, recs);
  const auto back = read_jsonl(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) ASSERT_TRUE(back[i] == recs[i]) << i;
}

TEST(Telemetry, CsvLayout) {
  std::stringstream ss;
  write_csv(ss, random_records(1, true, true, 7));
  std::vector<std::string> lines;
  for (std::string line; std::getline(ss, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 2u);

  const auto cols = csv_columns(true, true);
  std::string header;
  for (std::size_t i = 0; i < cols.size(); ++i) header += (i ? "," : "") + cols[i];
  EXPECT_EQ(lines[0], header);
  EXPECT_EQ(cols.front(), "t[s]");
  auto pos = [&](const std::string& name) {
    return std::find(cols.begin(), cols.end(), name) - cols.begin();
  };
  for (const std::string prefix : {"truth_q_", "meas_q_", "qukf_q_", "ekf_q_"}) {
    const auto w = pos(prefix + "w[-]");
    EXPECT_EQ(pos(prefix + "x[-]"), w + 1);
    EXPECT_EQ(pos(prefix + "y[-]"), w + 2);
    EXPECT_EQ(pos(prefix + "z[-]"), w + 3);
  }
  EXPECT_LT(pos("truth_r_x[m]"), pos("qukf_r_x[m]"));
  EXPECT_LT(pos("qukf_nis[-]"), pos("ekf_q_w[-]"));
  EXPECT_EQ(csv_columns(true, false).size() + (cols.size() - csv_columns(false, false).size()) / 2,
            cols.size());
}

TEST(Telemetry, JsonLinesSchemaLine) {
  std::stringstream ss;
  write_jsonl(ss, random_records(3, true, false, 8));
  std::string first;
  std::getline(ss, first);
  const auto schema = nlohmann::json::parse(first);
  EXPECT_TRUE(schema.contains("units"));
  int lines = 0;
  for (std::string line; std::getline(ss, line);) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("t"));
    EXPECT_TRUE(j.contains("qukf"));
    EXPECT_FALSE(j.contains("ekf"));
    ++lines;
  }
  EXPECT_EQ(lines, 3);
}

TEST(Telemetry, FileErrorsAndFormats) {
  const fs::path dir = scratch_dir("telemetry");
  const auto recs = random_records(10, true, true, 9);
  for (TelemetryFormat f : {TelemetryFormat::kCsv, TelemetryFormat::kJsonLines}) {
    const fs::path p = dir / ("t" + extension(f));
    write_telemetry(recs, p, f);
    const auto back = read_telemetry(p, f);
    ASSERT_EQ(back.size(), recs.size());
    EXPECT_TRUE(back.back() == recs.back());
  }
  EXPECT_EQ(parse_format("csv"), TelemetryFormat::kCsv);
  EXPECT_EQ(parse_format("jsonl"), TelemetryFormat::kJsonLines);
  EXPECT_EQ(code_of([] { parse_format("xml"); }), ErrorCode::kInvalidArgument);
  std::string what;
  EXPECT_EQ(code_of([&] { write_telemetry(recs, dir / "missing" / "t.csv", TelemetryFormat::kCsv); },
                    &what),
            ErrorCode::kIoError);
  EXPECT_NE(what.find("missing"), std::string::npos);
  EXPECT_EQ(code_of([&] { write_telemetry({}, dir / "e.csv", TelemetryFormat::kCsv); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { read_telemetry(dir / "none.csv", TelemetryFormat::kCsv); }),
            ErrorCode::kIoError);
}

TEST(MetricsDocument, DeterministicAndSelfDescribing) {
  ScenarioConfig c;
  c.run.duration = 3.0;
  const auto report = compute_metrics(run_scenario(c).records, c.run.metric_window);
  const std::string a = metrics_document(report, c);
  const std::string b = metrics_document(compute_metrics(run_scenario(c).records, 1.0), c);
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j.at("config_digest").get<std::string>(), config_digest(c));
  EXPECT_EQ(j.at("version").get<std::string>(), kVersion);
  EXPECT_NE(a.find("\"rad/s\""), std::string::npos);
  EXPECT_NE(a.find("\"Mz\""), std::string::npos);
}

// The CLI binary: exit codes and run determinism.
class Cli : public ::testing::Test {
 protected:
  static int run(const std::string& args) {
    const std::string cmd = std::string(QUKF_SIM_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

TEST_F(Cli, RunWritesOutputsDeterministically) {
  const fs::path dir = scratch_dir("cli_run");
  ASSERT_EQ(run("run --config default --seed 42 --duration 2 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("run --config default --seed 42 --duration 2 --out " + (dir / "b").string()), 0);
  EXPECT_EQ(slurp(dir / "a" / "metrics.json"), slurp(dir / "b" / "metrics.json"));
  EXPECT_EQ(slurp(dir / "a" / "telemetry.csv"), slurp(dir / "b" / "telemetry.csv"));
  ASSERT_EQ(run("run --duration 1 --format jsonl --estimators ekf --out " + (dir / "c").string()),
            0);
  const auto recs = read_telemetry(dir / "c" / "telemetry.jsonl", TelemetryFormat::kJsonLines);
  EXPECT_EQ(recs.size(), 101u);
  EXPECT_FALSE(recs.front().qukf.has_value());
}

TEST_F(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli_codes");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  EXPECT_EQ(run("run --config " + write("bad.yaml", "system:\n  mas: 1\n") + " --out " +
                dir.string()),
            2);
  EXPECT_EQ(run("run --config " + write("neg.yaml", "system:\n  mass: -1\n") + " --out " +
                dir.string()),
            3);
  EXPECT_EQ(run("run --config " +
                write("div.yaml",
                      "profile:\n  segments:\n    - {start: 0.0, end: 5.0, force: [1.0e9, 0, 0], "
                      "torque: [0, 0, 0], ramp: 0.0}\nrun:\n  duration: 5.0\n") +
                " --out " + dir.string()),
            4);
  EXPECT_EQ(run("run --config " + (dir / "absent.yaml").string()), 5);
  EXPECT_EQ(run("run --format xml --duration 0.1 --out " + dir.string()), 64);
  EXPECT_EQ(run("run --duration 0.1"), 3);  // shorter than the metric window
  EXPECT_EQ(run("run --duration 1 --out " + write("file", "x") + "/sub"), 5);
  EXPECT_EQ(run("run --no-such-flag"), 64);
  EXPECT_EQ(run("frobnicate"), 64);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, CompareAndBench) {
  EXPECT_EQ(run("compare --duration 2"), 0);
  EXPECT_EQ(run("bench --iterations 200 --sweep-iterations 20 --paddings 0,10,20"), 0);
}
