#include "qukf/telemetry.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "qukf/error.hpp"

namespace qukf {

const char* const kVersion = QUKF_VERSION;

namespace {

using nlohmann::json;

constexpr const char* kAxes[] = {"x", "y", "z"};

struct Layout {
  int qukf_pad = -1;  // -1 when the estimator is absent
  int ekf_pad = -1;
};

void add3(std::vector<std::string>& cols, const std::string& prefix, const std::string& unit) {
  for (const char* a : kAxes) cols.push_back(prefix + "_" + a + "[" + unit + "]");
}

void add_quat(std::vector<std::string>& cols, const std::string& prefix) {
  for (const char* c : {"w", "x", "y", "z"}) cols.push_back(prefix + "_q_" + c + "[-]");
}

void add_estimate(std::vector<std::string>& cols, const std::string& p, int pad) {
  add_quat(cols, p);
  add3(cols, p + "_r", "m");
  add3(cols, p + "_v", "m/s");
  add3(cols, p + "_omega", "rad/s");
  for (int i = 1; i <= 6; ++i) {
    cols.push_back(p + "_upsilon_" + std::to_string(i) + (i <= 3 ? "[N]" : "[Nm]"));
  }
  for (int i = 1; i <= pad; ++i) cols.push_back(p + "_pad_" + std::to_string(i) + "[-]");
  add3(cols, p + "_F", "N");
  add3(cols, p + "_M", "Nm");
  cols.push_back(p + "_nis[-]");
}

std::vector<std::string> columns(const Layout& l) {
  std::vector<std::string> cols{"t[s]"};
  add_quat(cols, "truth");
  add3(cols, "truth_r", "m");
  add3(cols, "truth_v", "m/s");
  add3(cols, "truth_omega", "rad/s");
  add3(cols, "truth_F", "N");
  add3(cols, "truth_M", "Nm");
  add_quat(cols, "meas");
  add3(cols, "meas_r", "m");
  add3(cols, "meas_omega", "rad/s");
  if (l.qukf_pad >= 0) add_estimate(cols, "qukf", l.qukf_pad);
  if (l.ekf_pad >= 0) add_estimate(cols, "ekf", l.ekf_pad);
  cols.emplace_back("u_thrust[N]");
  add3(cols, "u_M", "Nm");
  for (int i = 1; i <= 8; ++i) cols.push_back("uc_" + std::to_string(i) + "[-]");
  return cols;
}

template <typename V>
void put(std::vector<double>& out, const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
}

void put_estimate(std::vector<double>& out, const EstimateRecord& e) {
  put(out, e.state.q.coeffs());
  put(out, e.state.r);
  put(out, e.state.v);
  put(out, e.state.omega);
  put(out, e.state.upsilon);
  put(out, e.state.pad);
  put(out, e.wrench.force);
  put(out, e.wrench.torque);
  out.push_back(e.nis);
}

std::vector<double> flatten(const TelemetryRecord& r) {
  std::vector<double> out{r.t};
  put(out, r.truth.q.coeffs());
  put(out, r.truth.r);
  put(out, r.truth.v);
  put(out, r.truth.omega);
  put(out, r.truth_wrench.force);
  put(out, r.truth_wrench.torque);
  put(out, r.measurement.q.coeffs());
  put(out, r.measurement.r);
  put(out, r.measurement.omega);
  if (r.qukf) put_estimate(out, *r.qukf);
  if (r.ekf) put_estimate(out, *r.ekf);
  out.push_back(r.control.thrust);
  put(out, r.control.moments);
  put(out, r.rotor_commands);
  return out;
}

class Cursor {
 public:
  explicit Cursor(const std::vector<double>& v) : v_(v) {}
  double next() { return v_.at(i_++); }
  template <int N>
  Eigen::Matrix<double, N, 1> vec() {
    Eigen::Matrix<double, N, 1> out;
    for (int k = 0; k < N; ++k) out[k] = next();
    return out;
  }
  VectorXd dyn(int n) {
    VectorXd out(n);
    for (int k = 0; k < n; ++k) out[k] = next();
    return out;
  }
  UnitQuaternion quat() { return UnitQuaternion::from_unit_coeffs(vec<4>()); }

 private:
  const std::vector<double>& v_;
  std::size_t i_ = 0;
};

EstimateRecord take_estimate(Cursor& c, int pad) {
  EstimateRecord e;
  e.state.q = c.quat();
  e.state.r = c.vec<3>();
  e.state.v = c.vec<3>();
  e.state.omega = c.vec<3>();
  e.state.upsilon = c.vec<6>();
  e.state.pad = c.dyn(pad);
  e.wrench.force = c.vec<3>();
  e.wrench.torque = c.vec<3>();
  e.nis = c.next();
  return e;
}

TelemetryRecord unflatten(const std::vector<double>& v, const Layout& l) {
  Cursor c(v);
  TelemetryRecord r;
  r.t = c.next();
  r.truth.q = c.quat();
  r.truth.r = c.vec<3>();
  r.truth.v = c.vec<3>();
  r.truth.omega = c.vec<3>();
  r.truth_wrench.force = c.vec<3>();
  r.truth_wrench.torque = c.vec<3>();
  r.measurement.q = c.quat();
  r.measurement.r = c.vec<3>();
  r.measurement.omega = c.vec<3>();
  if (l.qukf_pad >= 0) r.qukf = take_estimate(c, l.qukf_pad);
  if (l.ekf_pad >= 0) r.ekf = take_estimate(c, l.ekf_pad);
  r.control.thrust = c.next();
  r.control.moments = c.vec<3>();
  r.rotor_commands = c.vec<8>();
  return r;
}

Layout layout_of(const TelemetryRecord& r) {
  Layout l;
  if (r.qukf) l.qukf_pad = static_cast<int>(r.qukf->state.pad.size());
  if (r.ekf) l.ekf_pad = static_cast<int>(r.ekf->state.pad.size());
  return l;
}

void check_layout(const std::vector<TelemetryRecord>& records, const Layout& l) {
  for (const auto& r : records) {
    const Layout o = layout_of(r);
    if (o.qukf_pad != l.qukf_pad || o.ekf_pad != l.ekf_pad) {
      throw Error(ErrorCode::kInvalidArgument, "telemetry records have mixed layouts");
    }
  }
}

std::string shortest(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int count_prefix(const std::vector<std::string>& cols, const std::string& prefix) {
  int n = 0;
  for (const auto& c : cols) n += c.rfind(prefix, 0) == 0 ? 1 : 0;
  return n;
}

Layout layout_from_header(const std::vector<std::string>& cols) {
  Layout l;
  if (count_prefix(cols, "qukf_") > 0) l.qukf_pad = count_prefix(cols, "qukf_pad_");
  if (count_prefix(cols, "ekf_") > 0) l.ekf_pad = count_prefix(cols, "ekf_pad_");
  if (columns(l) != cols) throw Error(ErrorCode::kParseError, "unexpected CSV header");
  return l;
}

template <typename V>
json arr(const V& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_of(const json& j) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
    throw Error(ErrorCode::kParseError, "expected an array of " + std::to_string(N));
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

VectorXd dyn_of(const json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json estimate_json(const EstimateRecord& e) {
  return json{{"q", arr(e.state.q.coeffs())},
              {"r", arr(e.state.r)},
              {"v", arr(e.state.v)},
              {"omega", arr(e.state.omega)},
              {"upsilon", arr(e.state.upsilon)},
              {"pad", arr(e.state.pad)},
              {"tau_hat", {{"force", arr(e.wrench.force)}, {"torque", arr(e.wrench.torque)}}},
              {"nis", e.nis}};
}

EstimateRecord estimate_from(const json& j) {
  EstimateRecord e;
  e.state.q = UnitQuaternion::from_unit_coeffs(vec_of<4>(j.at("q")));
  e.state.r = vec_of<3>(j.at("r"));
  e.state.v = vec_of<3>(j.at("v"));
  e.state.omega = vec_of<3>(j.at("omega"));
  e.state.upsilon = vec_of<6>(j.at("upsilon"));
  e.state.pad = dyn_of(j.at("pad"));
  e.wrench.force = vec_of<3>(j.at("tau_hat").at("force"));
  e.wrench.torque = vec_of<3>(j.at("tau_hat").at("torque"));
  e.nis = j.at("nis").get<double>();
  return e;
}

const json& units_json() {
  static const json units = {
      {"t", "s"},          {"q", "unitless, [w, x, y, z]"},
      {"r", "m"},          {"v", "m/s"},
      {"omega", "rad/s"},  {"force", "N"},
      {"torque", "N m"},   {"upsilon", "N (1-3), N m (4-6)"},
      {"thrust", "N"},     {"moments", "N m"},
      {"uc", "per-UAV [u1 N, u_tau N m] x 2"}, {"nis", "unitless"}};
  return units;
}

}  // namespace

TelemetryFormat parse_format(const std::string& name) {
  if (name == "csv") return TelemetryFormat::kCsv;
  if (name == "jsonl") return TelemetryFormat::kJsonLines;
  throw Error(ErrorCode::kInvalidArgument, "unknown telemetry format '" + name + "'");
}

std::string extension(TelemetryFormat format) {
  return format == TelemetryFormat::kCsv ? ".csv" : ".jsonl";
}

std::vector<std::string> csv_columns(bool with_qukf, bool with_ekf) {
  return columns({with_qukf ? 0 : -1, with_ekf ? 0 : -1});
}

void write_csv(std::ostream& out, const std::vector<TelemetryRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no telemetry records");
  const Layout l = layout_of(records.front());
  check_layout(records, l);
  const auto cols = columns(l);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records) {
    const auto row = flatten(r);
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << shortest(row[i]);
    out << '\n';
  }
}

std::vector<TelemetryRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "missing CSV header");
  const auto cols = split(line);
  const Layout l = layout_from_header(cols);
  std::vector<TelemetryRecord> out;
  std::size_t lineno = 1;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != cols.size()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(lineno) + ": expected " +
                                              std::to_string(cols.size()) + " columns");
    }
    row.clear();
    for (const auto& c : cells) row.push_back(parse_double(c, lineno));
    out.push_back(unflatten(row, l));
  }
  return out;
}

void write_jsonl(std::ostream& out, const std::vector<TelemetryRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no telemetry records");
  out << json{{"schema", "qukf-telemetry"}, {"version", kVersion}, {"units", units_json()}}.dump()
      << '\n';
  for (const auto& r : records) {
    json j{{"t", r.t},
           {"truth",
            {{"q", arr(r.truth.q.coeffs())},
             {"r", arr(r.truth.r)},
             {"v", arr(r.truth.v)},
             {"omega", arr(r.truth.omega)},
             {"tau_h", {{"force", arr(r.truth_wrench.force)}, {"torque", arr(r.truth_wrench.torque)}}}}},
           {"measurement",
            {{"q", arr(r.measurement.q.coeffs())},
             {"r", arr(r.measurement.r)},
             {"omega", arr(r.measurement.omega)}}},
           {"control",
            {{"thrust", r.control.thrust},
             {"moments", arr(r.control.moments)},
             {"uc", arr(r.rotor_commands)}}}};
    if (r.qukf) j["qukf"] = estimate_json(*r.qukf);
    if (r.ekf) j["ekf"] = estimate_json(*r.ekf);
    out << j.dump() << '\n';
  }
}

std::vector<TelemetryRecord> read_jsonl(std::istream& in) {
  std::vector<TelemetryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("schema")) continue;
      TelemetryRecord r;
      r.t = j.at("t").get<double>();
      const json& truth = j.at("truth");
      r.truth.q = UnitQuaternion::from_unit_coeffs(vec_of<4>(truth.at("q")));
      r.truth.r = vec_of<3>(truth.at("r"));
      r.truth.v = vec_of<3>(truth.at("v"));
      r.truth.omega = vec_of<3>(truth.at("omega"));
      r.truth_wrench.force = vec_of<3>(truth.at("tau_h").at("force"));
      r.truth_wrench.torque = vec_of<3>(truth.at("tau_h").at("torque"));
      const json& m = j.at("measurement");
      r.measurement.q = UnitQuaternion::from_unit_coeffs(vec_of<4>(m.at("q")));
      r.measurement.r = vec_of<3>(m.at("r"));
      r.measurement.omega = vec_of<3>(m.at("omega"));
      const json& c = j.at("control");
      r.control.thrust = c.at("thrust").get<double>();
      r.control.moments = vec_of<3>(c.at("moments"));
      r.rotor_commands = vec_of<8>(c.at("uc"));
      if (j.contains("qukf")) r.qukf = estimate_from(j.at("qukf"));
      if (j.contains("ekf")) r.ekf = estimate_from(j.at("ekf"));
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_telemetry(const std::vector<TelemetryRecord>& records,
                     const std::filesystem::path& path, TelemetryFormat format) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no telemetry records");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  if (format == TelemetryFormat::kCsv) {
    write_csv(out, records);
  } else {
    write_jsonl(out, records);
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path.string() + "'");
}

std::vector<TelemetryRecord> read_telemetry(const std::filesystem::path& path,
                                            TelemetryFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  try {
    return format == TelemetryFormat::kCsv ? read_csv(in) : read_jsonl(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string metrics_document(const MetricsReport& report, const ScenarioConfig& config) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json channels = json::array();
  for (const auto& c : report.channels) {
    channels.push_back({{"channel", c.name},
                        {"unit", c.unit},
                        {"rmse", {{"qukf", opt(c.rmse_qukf)}, {"ekf", opt(c.rmse_ekf)}}},
                        {"improvement_percent", opt(c.improvement)},
                        {"t_c_s", {{"qukf", opt(c.tc_qukf)}, {"ekf", opt(c.tc_ekf)}}}});
  }
  const json doc{{"schema", "qukf-metrics"},
                 {"version", kVersion},
                 {"config_digest", config_digest(config)},
                 {"seed", config.run.seed},
                 {"dt_s", config.run.dt},
                 {"duration_s", config.run.duration},
                 {"window_s", report.window},
                 {"channels", channels}};
  return doc.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path.string() + "'");
}

}  // namespace qukf
