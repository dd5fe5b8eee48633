#include "qukf/config.hpp"

#include <yaml-cpp/yaml.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "qukf/error.hpp"

namespace qukf {

namespace {

[[noreturn]] void parse_fail(const YAML::Node& node, const std::string& field,
                             const std::string& what) {
  const auto mark = node.Mark();
  std::string where = mark.is_null() ? "" : "line " + std::to_string(mark.line + 1) + ": ";
  throw Error(ErrorCode::kParseError, where + field + ": " + what);
}

// Walks one mapping, remembering which keys were consumed so that leftovers
// can be reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) parse_fail(node_, path_, "expected a mapping");
  }

  YAML::Node take(const std::string& key) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return YAML::Node(YAML::NodeType::Undefined);
    return node_[key];
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const std::string& key, double& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    out = to_double(n, field(key));
  }

  void integer(const std::string& key, std::uint64_t& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    if (!n.IsScalar()) parse_fail(n, field(key), "expected an integer");
    const std::string& s = n.Scalar();
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      parse_fail(n, field(key), "expected a non-negative integer, got '" + s + "'");
    }
  }

  void integer(const std::string& key, int& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    if (!n.IsScalar()) parse_fail(n, field(key), "expected an integer");
    const std::string& s = n.Scalar();
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      parse_fail(n, field(key), "expected an integer, got '" + s + "'");
    }
  }

  template <int N>
  void vector(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    const YAML::Node n = take(key);
    if (!n) return;
    out = to_vector<N>(n, field(key));
  }

  Section child(const std::string& key) { return Section(take(key), field(key)); }

  void finish() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) parse_fail(kv.first, field(key), "unknown key");
    }
  }

  static double to_double(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) parse_fail(n, field, "expected a number");
    const std::string& s = n.Scalar();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      parse_fail(n, field, "expected a number, got '" + s + "'");
    }
    return v;
  }

  template <int N>
  static Eigen::Matrix<double, N, 1> to_vector(const YAML::Node& n, const std::string& field) {
    if (!n.IsSequence() || n.size() != static_cast<std::size_t>(N)) {
      parse_fail(n, field, "expected a list of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) {
      v[i] = to_double(n[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
    }
    return v;
  }

  const YAML::Node& node() const { return node_; }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3 diag3(const MatrixXd& m, int at) { return m.diagonal().segment<3>(at); }

void set_diag(MatrixXd& m, int at, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) m(at + i, at + i) = v[i];
}

struct FilterGroups {
  Vec3 attitude, position, velocity, angular_velocity;
  Vec6 upsilon;
  double pad = 0.0;
};

FilterGroups groups_of(const MatrixXd& m, int padding) {
  using namespace tangent;
  FilterGroups g;
  g.attitude = diag3(m, kRot);
  g.position = diag3(m, kPos);
  g.velocity = diag3(m, kVel);
  g.angular_velocity = diag3(m, kOmega);
  g.upsilon = m.diagonal().segment<6>(kUpsilon);
  g.pad = padding > 0 ? m(kPad, kPad) : 0.0;
  return g;
}

MatrixXd matrix_of(const FilterGroups& g, int padding) {
  using namespace tangent;
  const int n = kTangentDim + padding;
  MatrixXd m = MatrixXd::Zero(n, n);
  set_diag(m, kRot, g.attitude);
  set_diag(m, kPos, g.position);
  set_diag(m, kVel, g.velocity);
  set_diag(m, kOmega, g.angular_velocity);
  set_diag(m, kUpsilon, g.upsilon);
  if (padding > 0) set_diag(m, kPad, VectorXd::Constant(padding, g.pad));
  return m;
}

void read_groups(Section s, FilterGroups& g) {
  s.vector<3>("attitude", g.attitude);
  s.vector<3>("position", g.position);
  s.vector<3>("velocity", g.velocity);
  s.vector<3>("angular_velocity", g.angular_velocity);
  s.vector<6>("upsilon", g.upsilon);
  s.number("padding", g.pad);
  s.finish();
}

Mat3 diagonal_matrix(Section& s, const std::string& key, const Mat3& current) {
  Vec3 d = current.diagonal();
  s.vector<3>(key, d);
  return d.asDiagonal();
}

ForceSegment read_segment(const YAML::Node& n, const std::string& path) {
  Section s(n, path);
  if (!n.IsMap()) parse_fail(n, path, "expected a mapping");
  ForceSegment seg;
  s.number("start", seg.start);
  s.number("end", seg.end);
  s.vector<3>("force", seg.force);
  s.vector<3>("torque", seg.torque);
  s.number("ramp", seg.ramp);
  s.finish();
  return seg;
}

ScenarioConfig from_yaml(const YAML::Node& root) {
  ScenarioConfig c;
  Section top(root, "");

  {
    Section s = top.child("system");
    s.number("mass", c.system.mass);
    c.system.inertia = diagonal_matrix(s, "inertia", c.system.inertia);
    s.number("gravity", c.system.gravity);
    s.number("payload_length", c.system.payload_length);
    s.vector<3>("attach_offset_1", c.system.attach_offset_1);
    s.vector<3>("attach_offset_2", c.system.attach_offset_2);
    s.number("u_max", c.system.u_max);
    Vec8 lambda = Eigen::Map<const Vec8>(c.system.lambda_weights.data());
    s.vector<8>("lambda_weights", lambda);
    for (int i = 0; i < 8; ++i) c.system.lambda_weights[static_cast<std::size_t>(i)] = lambda[i];
    Section r = s.child("rotor");
    r.number("thrust_constant", c.system.rotor.thrust_constant);
    r.number("drag_constant", c.system.rotor.drag_constant);
    r.number("arm_length", c.system.rotor.arm_length);
    r.finish();
    s.finish();
  }

  {
    Section s = top.child("filter");
    s.number("delta", c.system.delta);
    s.number("phi", c.filter.phi);
    s.number("gamma", c.filter.gamma);
    s.number("sigma", c.filter.sigma);
    const YAML::Node eta = s.take("eta");
    if (eta && !eta.IsNull()) c.filter.eta = Section::to_double(eta, s.field("eta"));
    s.integer("padding", c.filter.padding);
    const YAML::Node placement = s.take("gamma_placement");
    if (placement) {
      const std::string v = placement.IsScalar() ? placement.Scalar() : "";
      if (v == "state_coupled") {
        c.filter.placement = GammaPlacement::kStateCoupled;
      } else if (v == "affine") {
        c.filter.placement = GammaPlacement::kAffine;
      } else {
        parse_fail(placement, s.field("gamma_placement"), "expected state_coupled or affine");
      }
    }
    const YAML::Node wrench = s.take("wrench_model");
    if (wrench) {
      const std::string v = wrench.IsScalar() ? wrench.Scalar() : "";
      if (v == "observer_only") {
        c.filter.wrench_model = WrenchModel::kObserverOnly;
      } else if (v == "in_dynamics") {
        c.filter.wrench_model = WrenchModel::kInDynamics;
      } else {
        parse_fail(wrench, s.field("wrench_model"), "expected observer_only or in_dynamics");
      }
    }
    if (c.filter.padding < 0 || c.filter.padding > 10000) {
      parse_fail(s.node()["padding"], s.field("padding"), "must be in [0, 10000]");
    }
    const int padding = c.filter.padding;
    const FilterConfig base = FilterConfig::defaults(padding);
    FilterGroups q = groups_of(base.noise.process, padding);
    FilterGroups p0 = groups_of(base.initial_cov, padding);
    if (padding == 0) {
      q.pad = 1e-4;
      p0.pad = 1.0;
    }
    read_groups(s.child("process_noise"), q);
    read_groups(s.child("initial_covariance"), p0);
    c.filter.noise.process = matrix_of(q, padding);
    c.filter.initial_cov = matrix_of(p0, padding);

    Section r = s.child("measurement_noise");
    Vec9 rd = base.noise.measurement.diagonal();
    Vec3 a = rd.segment<3>(0), pos = rd.segment<3>(3), w = rd.segment<3>(6);
    r.vector<3>("attitude", a);
    r.vector<3>("position", pos);
    r.vector<3>("angular_velocity", w);
    r.finish();
    rd << a, pos, w;
    c.filter.noise.measurement = rd.asDiagonal();
    s.finish();
  }

  {
    Section s = top.child("admittance");
    c.admittance.mass = diagonal_matrix(s, "mass", c.admittance.mass);
    c.admittance.damping = diagonal_matrix(s, "damping", c.admittance.damping);
    c.admittance.stiffness = diagonal_matrix(s, "stiffness", c.admittance.stiffness);
    s.finish();
  }

  {
    Section s = top.child("controller");
    s.number("position_gain", c.controller.position);
    s.number("velocity_gain", c.controller.velocity);
    s.number("attitude_gain", c.controller.attitude);
    s.number("rate_gain", c.controller.rate);
    s.finish();
  }

  {
    Section s = top.child("profile");
    const YAML::Node segs = s.take("segments");
    if (segs) {
      if (!segs.IsSequence() && !segs.IsNull()) {
        parse_fail(segs, s.field("segments"), "expected a list");
      }
      c.profile.segments.clear();
      for (std::size_t i = 0; segs.IsSequence() && i < segs.size(); ++i) {
        c.profile.segments.push_back(
            read_segment(segs[i], s.field("segments") + "[" + std::to_string(i) + "]"));
      }
    }
    s.finish();
  }

  {
    Section s = top.child("run");
    s.number("dt", c.run.dt);
    s.number("duration", c.run.duration);
    s.integer("seed", c.run.seed);
    const YAML::Node est = s.take("estimators");
    if (est) {
      if (!est.IsSequence()) parse_fail(est, s.field("estimators"), "expected a list");
      c.run.estimators.clear();
      for (const auto& e : est) {
        if (!e.IsScalar()) parse_fail(e, s.field("estimators"), "expected names");
        c.run.estimators.push_back(e.Scalar());
      }
    }
    s.vector<3>("initial_position", c.run.initial_position);
    s.number("metric_window", c.run.metric_window);
    s.number("noise_scale", c.run.noise_scale);
    s.finish();
  }

  top.finish();
  return c;
}

std::string num(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string s(buf.data(), res.ptr);
  // Keep integral values recognizable as floating point.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <typename V>
std::string list(const V& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

void emit_groups(std::ostringstream& out, const char* name, const FilterGroups& g) {
  out << "  " << name << ":\n"
      << "    attitude: " << list(g.attitude) << "\n"
      << "    position: " << list(g.position) << "\n"
      << "    velocity: " << list(g.velocity) << "\n"
      << "    angular_velocity: " << list(g.angular_velocity) << "\n"
      << "    upsilon: " << list(g.upsilon) << "\n"
      << "    padding: " << num(g.pad) << "\n";
}

bool same_filter(const FilterConfig& a, const FilterConfig& b) {
  return a.noise.process == b.noise.process && a.noise.measurement == b.noise.measurement &&
         a.initial_cov == b.initial_cov && a.phi == b.phi && a.gamma == b.gamma &&
         a.sigma == b.sigma && a.eta == b.eta && a.padding == b.padding &&
         a.algebra == b.algebra && a.placement == b.placement &&
         a.wrench_model == b.wrench_model;
}

bool same_system(const SystemParams& a, const SystemParams& b) {
  return a.mass == b.mass && a.inertia == b.inertia && a.gravity == b.gravity &&
         a.payload_length == b.payload_length && a.attach_offset_1 == b.attach_offset_1 &&
         a.attach_offset_2 == b.attach_offset_2 && a.u_max == b.u_max && a.delta == b.delta &&
         a.rotor.thrust_constant == b.rotor.thrust_constant &&
         a.rotor.drag_constant == b.rotor.drag_constant &&
         a.rotor.arm_length == b.rotor.arm_length && a.lambda_weights == b.lambda_weights;
}

}  // namespace

ScenarioConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (root && !root.IsNull() && !root.IsMap()) {
    parse_fail(root, "<root>", "expected a mapping of sections");
  }
  ScenarioConfig c;
  try {
    c = from_yaml(root);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  c.validate();
  return c;
}

ScenarioConfig parse_config(const std::filesystem::path& path) {
  if (path == "default") return parse_config_string("");
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_string(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream out;
  const SystemParams& s = c.system;
  out << "system:\n"
      << "  mass: " << num(s.mass) << "\n"
      << "  inertia: " << list(Vec3(s.inertia.diagonal())) << "\n"
      << "  gravity: " << num(s.gravity) << "\n"
      << "  payload_length: " << num(s.payload_length) << "\n"
      << "  attach_offset_1: " << list(s.attach_offset_1) << "\n"
      << "  attach_offset_2: " << list(s.attach_offset_2) << "\n"
      << "  u_max: " << num(s.u_max) << "\n"
      << "  lambda_weights: " << list(Eigen::Map<const Vec8>(s.lambda_weights.data())) << "\n"
      << "  rotor:\n"
      << "    thrust_constant: " << num(s.rotor.thrust_constant) << "\n"
      << "    drag_constant: " << num(s.rotor.drag_constant) << "\n"
      << "    arm_length: " << num(s.rotor.arm_length) << "\n";

  const FilterConfig& f = c.filter;
  out << "filter:\n"
      << "  delta: " << num(s.delta) << "\n"
      << "  phi: " << num(f.phi) << "\n"
      << "  gamma: " << num(f.gamma) << "\n"
      << "  sigma: " << num(f.sigma) << "\n";
  if (f.eta) out << "  eta: " << num(*f.eta) << "\n";
  out << "  padding: " << f.padding << "\n"
      << "  gamma_placement: "
      << (f.placement == GammaPlacement::kAffine ? "affine" : "state_coupled") << "\n"
      << "  wrench_model: "
      << (f.wrench_model == WrenchModel::kInDynamics ? "in_dynamics" : "observer_only") << "\n";
  FilterGroups q = groups_of(f.noise.process, f.padding);
  FilterGroups p0 = groups_of(f.initial_cov, f.padding);
  if (f.padding == 0) {
    q.pad = 1e-4;
    p0.pad = 1.0;
  }
  emit_groups(out, "process_noise", q);
  emit_groups(out, "initial_covariance", p0);
  const Vec9 rd = f.noise.measurement.diagonal();
  out << "  measurement_noise:\n"
      << "    attitude: " << list(Vec3(rd.segment<3>(0))) << "\n"
      << "    position: " << list(Vec3(rd.segment<3>(3))) << "\n"
      << "    angular_velocity: " << list(Vec3(rd.segment<3>(6))) << "\n";

  out << "admittance:\n"
      << "  mass: " << list(Vec3(c.admittance.mass.diagonal())) << "\n"
      << "  damping: " << list(Vec3(c.admittance.damping.diagonal())) << "\n"
      << "  stiffness: " << list(Vec3(c.admittance.stiffness.diagonal())) << "\n";

  out << "controller:\n"
      << "  position_gain: " << num(c.controller.position) << "\n"
      << "  velocity_gain: " << num(c.controller.velocity) << "\n"
      << "  attitude_gain: " << num(c.controller.attitude) << "\n"
      << "  rate_gain: " << num(c.controller.rate) << "\n";

  out << "profile:\n";
  if (c.profile.segments.empty()) {
    out << "  segments: []\n";
  } else {
    out << "  segments:\n";
    for (const auto& seg : c.profile.segments) {
      out << "    - {start: " << num(seg.start) << ", end: " << num(seg.end)
          << ", force: " << list(seg.force) << ", torque: " << list(seg.torque)
          << ", ramp: " << num(seg.ramp) << "}\n";
    }
  }

  out << "run:\n"
      << "  dt: " << num(c.run.dt) << "\n"
      << "  duration: " << num(c.run.duration) << "\n"
      << "  seed: " << c.run.seed << "\n"
      << "  estimators: [";
  for (std::size_t i = 0; i < c.run.estimators.size(); ++i) {
    out << (i ? ", " : "") << c.run.estimators[i];
  }
  out << "]\n"
      << "  initial_position: " << list(c.run.initial_position) << "\n"
      << "  metric_window: " << num(c.run.metric_window) << "\n"
      << "  noise_scale: " << num(c.run.noise_scale) << "\n";
  return out.str();
}

std::string config_digest(const ScenarioConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  return same_system(a.system, b.system) && same_filter(a.filter, b.filter) &&
         a.admittance.mass == b.admittance.mass && a.admittance.damping == b.admittance.damping &&
         a.admittance.stiffness == b.admittance.stiffness &&
         a.controller.position == b.controller.position &&
         a.controller.velocity == b.controller.velocity &&
         a.controller.attitude == b.controller.attitude && a.controller.rate == b.controller.rate &&
         a.profile == b.profile && a.run.dt == b.run.dt && a.run.duration == b.run.duration &&
         a.run.seed == b.run.seed && a.run.estimators == b.run.estimators &&
         a.run.initial_position == b.run.initial_position &&
         a.run.metric_window == b.run.metric_window && a.run.noise_scale == b.run.noise_scale;
}

}  // namespace qukf
