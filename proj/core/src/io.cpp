#include "fbmp/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fbmp/errors.hpp"
#include "json.hpp"

namespace fbmp::io {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || (*end != '\0' && *end != '\r')) {
    throw DataError("malformed number '" + s + "' in " + path.string());
  }
  return v;
}

struct Csv {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.header = split(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != csv.header.size()) throw DataError("ragged row in " + path.string());
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path));
    rows.push_back(std::move(row));
  }
  csv.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(csv.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      csv.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return csv;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(values(r, c));
    }
    out += '\n';
  }
  write_text(path, out);
}

void expect_header(const Csv& csv, const std::vector<std::string>& header, const fs::path& path) {
  if (csv.header != header) throw DataError("unexpected CSV header in " + path.string());
}

double uniform_dt(const Eigen::VectorXd& t, const fs::path& path) {
  if (t.size() < 2) throw DataError("need at least 2 samples in " + path.string());
  const double dt = (t[t.size() - 1] - t[0]) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) throw DataError("non-increasing timestamps in " + path.string());
  for (Eigen::Index i = 1; i < t.size(); ++i) {
    if (std::abs(t[i] - t[i - 1] - dt) > 1e-6 * dt + 1e-12) throw DataError("non-uniform timestamps in " + path.string());
  }
  return dt;
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// --- JSON helpers -----------------------------------------------------------

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd to_mat(const json& j, Eigen::Index cols_if_empty = 0) {
  if (j.empty()) return Eigen::MatrixXd(0, cols_if_empty);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("ragged matrix in JSON document");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json quat(const UnitQuaternion& q) {
  const auto c = q.coeffs();
  return std::vector<double>(c.begin(), c.end());
}

UnitQuaternion to_quat(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw DataError("quaternion must have 4 components");
  return {v[0], v[1], v[2], v[3]};
}

json bank_json(const PhaseKernelBank& bank) {
  return {{"N", bank.size()}, {"centers", bank.centers}, {"widths", bank.widths}};
}

PhaseKernelBank bank_from(const json& j) {
  PhaseKernelBank bank;
  bank.centers = j.at("centers").get<std::vector<double>>();
  bank.widths = j.at("widths").get<std::vector<double>>();
  if (j.at("N").get<std::size_t>() != bank.size()) throw DataError("kernel bank size disagrees with N");
  bank.validate();
  return bank;
}

json gains_json(const DmpGains& g) { return {{"alpha", g.alpha}, {"beta", g.beta}, {"alpha_g", g.alpha_g}}; }

DmpGains gains_from(const json& j) {
  return {j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("alpha_g").get<double>()};
}

json common_json(const CanonicalParams& c, const PhaseKernelBank& bank, const DmpGains& g, double duration,
                 bool goal_evolution) {
  json j = bank_json(bank);
  j["tau"] = c.tau;
  j["alpha_u"] = c.alpha_u;
  j["duration"] = duration;
  j["gains"] = gains_json(g);
  j["goal_evolution"] = goal_evolution;
  return j;
}

json quaternion_json(const QuaternionPrimitive& p) {
  json j = {{"type", "quaternion"}};
  j.update(common_json(p.canonical, p.bank, p.gains, p.duration, p.goal_evolution));
  j["weights"] = mat(p.weights);
  j["goal"] = quat(p.goal);
  return j;
}

QuaternionPrimitive quaternion_from(const json& j) {
  if (j.at("type") != "quaternion") throw DataError("expected a quaternion primitive");
  QuaternionPrimitive p;
  p.canonical = CanonicalParams::with_tau(j.at("tau").get<double>(), j.at("alpha_u").get<double>());
  p.bank = bank_from(j);
  p.gains = gains_from(j.at("gains"));
  p.duration = j.at("duration").get<double>();
  p.goal_evolution = j.at("goal_evolution").get<bool>();
  p.weights = to_mat(j.at("weights"), 3);
  p.goal = to_quat(j.at("goal"));
  p.validate();
  return p;
}

json position_json(const PositionPrimitive& p) {
  json j = {{"type", "position"}};
  j.update(common_json(p.canonical, p.bank, p.gains, p.duration, p.goal_evolution));
  j["weights"] = mat(p.weights);
  j["goal"] = vec(p.goal);
  return j;
}

PositionPrimitive position_from(const json& j) {
  if (j.at("type") != "position") throw DataError("expected a position primitive");
  PositionPrimitive p;
  p.canonical = CanonicalParams::with_tau(j.at("tau").get<double>(), j.at("alpha_u").get<double>());
  p.bank = bank_from(j);
  p.gains = gains_from(j.at("gains"));
  p.duration = j.at("duration").get<double>();
  p.goal_evolution = j.at("goal_evolution").get<bool>();
  p.goal = to_vec(j.at("goal"));
  p.weights = to_mat(j.at("weights"), p.goal.size());
  p.validate();
  return p;
}

json layer_json(const DenseLayer& l) { return {{"weight", mat(l.weight)}, {"bias", vec(l.bias)}}; }

DenseLayer layer_from(const json& j) {
  DenseLayer l;
  l.bias = to_vec(j.at("bias"));
  l.weight = to_mat(j.at("weight"));
  if (l.weight.rows() != l.bias.size()) throw DataError("layer weight/bias size mismatch");
  return l;
}

json network_json(const Network& net) {
  json j;
  if (const auto* pm = std::get_if<PmnnParams>(&net)) {
    j["type"] = "pmnn";
    j["hidden"] = json::array();
    for (const auto& l : pm->hidden) j["hidden"].push_back(layer_json(l));
    j["modulated"] = layer_json(pm->modulated);
    j["output"] = vec(pm->output);
  } else {
    const auto& ff = std::get<FfnnParams>(net);
    j["type"] = "ffnn";
    j["phase_inputs"] = ff.phase_inputs;
    j["hidden"] = json::array();
    for (const auto& l : ff.hidden) j["hidden"].push_back(layer_json(l));
    j["output"] = vec(ff.output);
    j["output_bias"] = vec(ff.output_bias);
  }
  return j;
}

Network network_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "pmnn") {
    PmnnParams p;
    for (const auto& l : j.at("hidden")) p.hidden.push_back(layer_from(l));
    p.modulated = layer_from(j.at("modulated"));
    p.output = to_vec(j.at("output"));
    return p;
  }
  if (type == "ffnn") {
    FfnnParams f;
    f.phase_inputs = j.at("phase_inputs").get<bool>();
    for (const auto& l : j.at("hidden")) f.hidden.push_back(layer_from(l));
    f.output = to_vec(j.at("output"));
    f.output_bias = to_vec(j.at("output_bias"));
    return f;
  }
  throw DataError("unknown network type '" + type + "'");
}

json contact_json(const ContactModel& c) {
  return {{"channels", c.channels()},
          {"seed", c.seed},
          {"noise_sigma", c.noise_sigma},
          {"saturation", c.saturation},
          {"sensitivity", mat(c.sensitivity)},
          {"gain", vec(c.gain)},
          {"baseline", vec(c.baseline)},
          {"contact_level", vec(c.contact_level)},
          {"slide_amplitude", vec(c.slide_amplitude)},
          {"slide_frequency", vec(c.slide_frequency)},
          {"slide_phase", vec(c.slide_phase)}};
}

ContactModel contact_from(const json& j) {
  ContactModel c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.saturation = j.at("saturation").get<double>();
  c.sensitivity = to_mat(j.at("sensitivity"), 2);
  c.gain = to_vec(j.at("gain"));
  c.baseline = to_vec(j.at("baseline"));
  c.contact_level = to_vec(j.at("contact_level"));
  c.slide_amplitude = to_vec(j.at("slide_amplitude"));
  c.slide_frequency = to_vec(j.at("slide_frequency"));
  c.slide_phase = to_vec(j.at("slide_phase"));
  const Eigen::Index k = c.channels();
  for (const auto* v : {&c.gain, &c.baseline, &c.contact_level, &c.slide_amplitude, &c.slide_frequency, &c.slide_phase}) {
    if (v->size() != k) throw DataError("contact model arrays disagree on channel count");
  }
  return c;
}

json simulator_json(const SimulatorConfig& c) {
  return {{"settings", c.settings},
          {"demos_per_setting", c.demos_per_setting},
          {"channels", c.channels},
          {"pose_rate", c.pose_rate},
          {"tactile_rate", c.tactile_rate},
          {"stage_durations", std::vector<double>(std::begin(c.stage_durations), std::end(c.stage_durations))},
          {"descend_height", c.descend_height},
          {"descend_jitter", c.descend_jitter},
          {"slide_length", c.slide_length},
          {"slide_jitter", c.slide_jitter},
          {"pitch_deg", c.pitch_deg},
          {"pitch_jitter_deg", c.pitch_jitter_deg},
          {"tau_scale", c.tau_scale},
          {"teacher_kp", c.teacher_kp},
          {"teacher_kd", c.teacher_kd},
          {"teacher_saturation_deg", c.teacher_saturation_deg},
          {"correction_jitter", c.correction_jitter},
          {"noise_sigma", c.noise_sigma},
          {"contact_saturation_deg", c.contact_saturation_deg},
          {"seed", c.seed}};
}

// Missing keys keep their defaults so partial config files work.
SimulatorConfig simulator_from(const json& j, SimulatorConfig c = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("settings", c.settings);
  get("demos_per_setting", c.demos_per_setting);
  get("channels", c.channels);
  get("pose_rate", c.pose_rate);
  get("tactile_rate", c.tactile_rate);
  if (j.contains("stage_durations")) {
    const auto d = j.at("stage_durations").get<std::vector<double>>();
    if (d.size() != 3) throw ValidationError("stage_durations must have 3 entries");
    std::copy(d.begin(), d.end(), c.stage_durations);
  }
  get("descend_height", c.descend_height);
  get("descend_jitter", c.descend_jitter);
  get("slide_length", c.slide_length);
  get("slide_jitter", c.slide_jitter);
  get("pitch_deg", c.pitch_deg);
  get("pitch_jitter_deg", c.pitch_jitter_deg);
  get("tau_scale", c.tau_scale);
  get("teacher_kp", c.teacher_kp);
  get("teacher_kd", c.teacher_kd);
  get("teacher_saturation_deg", c.teacher_saturation_deg);
  get("correction_jitter", c.correction_jitter);
  get("noise_sigma", c.noise_sigma);
  get("contact_saturation_deg", c.contact_saturation_deg);
  get("seed", c.seed);
  c.validate();
  return c;
}

json nmse_json(const SplitNmse& s) {
  return {{"train", s.train}, {"val", s.val}, {"test", s.test}, {"gen", s.gen}};
}

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("malformed " + what + ": " + e.what());
  }
}

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError("invalid " + what + ": " + e.what());
  }
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_table_csv(const fs::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols()) throw ValidationError("table header/column mismatch");
  write_csv(path, header, values);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_orientation_csv(const fs::path& path, const OrientationTrajectory& traj) {
  traj.validate();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(traj.size()), 11);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = traj.q[i].coeffs();
    m.row(r) << traj.t[i], c[0], c[1], c[2], c[3], traj.omega.row(r), traj.omega_dot.row(r);
  }
  write_csv(path, {"t", "Q_r", "Q_x", "Q_y", "Q_z", "wx", "wy", "wz", "dwx", "dwy", "dwz"}, m);
}

OrientationTrajectory read_orientation_csv(const fs::path& path) {
  const Csv csv = read_csv(path);
  expect_header(csv, {"t", "Q_r", "Q_x", "Q_y", "Q_z", "wx", "wy", "wz", "dwx", "dwy", "dwz"}, path);
  OrientationTrajectory traj;
  traj.dt = uniform_dt(csv.values.col(0), path);
  traj.t.assign(csv.values.col(0).data(), csv.values.col(0).data() + csv.values.rows());
  for (Eigen::Index r = 0; r < csv.values.rows(); ++r) {
    traj.q.emplace_back(csv.values(r, 1), csv.values(r, 2), csv.values(r, 3), csv.values(r, 4));
  }
  traj.omega = csv.values.middleCols(5, 3);
  traj.omega_dot = csv.values.middleCols(8, 3);
  traj.validate();
  return traj;
}

void write_pose_csv(const fs::path& path, const PositionTrajectory& traj) {
  traj.validate();
  if (traj.dims() != 3) throw ValidationError("pose CSV holds 3-D positions");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(traj.size()), 10);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m.row(r) << traj.t[i], traj.y.row(r), traj.yd.row(r), traj.ydd.row(r);
  }
  write_csv(path, {"t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"}, m);
}

PositionTrajectory read_pose_csv(const fs::path& path) {
  const Csv csv = read_csv(path);
  expect_header(csv, {"t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"}, path);
  PositionTrajectory traj;
  traj.dt = uniform_dt(csv.values.col(0), path);
  traj.t.assign(csv.values.col(0).data(), csv.values.col(0).data() + csv.values.rows());
  traj.y = csv.values.middleCols(1, 3);
  traj.yd = csv.values.middleCols(4, 3);
  traj.ydd = csv.values.middleCols(7, 3);
  traj.validate();
  return traj;
}

void write_tactile_csv(const fs::path& path, const SensorTraceSet& traces) {
  traces.validate();
  std::vector<std::string> header{"t"};
  for (const auto& h : numbered("e", traces.channels())) header.push_back(h);
  Eigen::MatrixXd m(traces.values.rows(), traces.channels() + 1);
  m.col(0) = Eigen::Map<const Eigen::VectorXd>(traces.t.data(), static_cast<Eigen::Index>(traces.t.size()));
  m.rightCols(traces.channels()) = traces.values;
  write_csv(path, header, m);
}

SensorTraceSet read_tactile_csv(const fs::path& path, double setting) {
  const Csv csv = read_csv(path);
  if (csv.header.size() < 2 || csv.header[0] != "t") throw DataError("unexpected CSV header in " + path.string());
  std::vector<std::string> expected{"t"};
  for (const auto& h : numbered("e", static_cast<Eigen::Index>(csv.header.size() - 1))) expected.push_back(h);
  expect_header(csv, expected, path);
  SensorTraceSet s;
  s.dt = uniform_dt(csv.values.col(0), path);
  s.t.assign(csv.values.col(0).data(), csv.values.col(0).data() + csv.values.rows());
  s.values = csv.values.rightCols(csv.values.cols() - 1);
  s.setting = setting;
  s.validate();
  return s;
}

std::string setting_dir_name(double setting_deg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", setting_deg);
  return buf;
}

fs::path demo_dir(const fs::path& root, double setting_deg, int demo_id) {
  return root / setting_dir_name(setting_deg) / ("demo_" + std::to_string(demo_id));
}

void write_demo(const fs::path& root, const DemoRecord& demo) {
  const fs::path dir = demo_dir(root, demo.setting.roll_deg, demo.demo_id);
  write_pose_csv(dir / "pose.csv", demo.pose);
  write_orientation_csv(dir / "orientation.csv", demo.orientation);
  write_tactile_csv(dir / "tactile.csv", demo.tactile);
}

DemoRecord read_demo(const fs::path& root, double setting_deg, int demo_id) {
  const fs::path dir = demo_dir(root, setting_deg, demo_id);
  if (!fs::is_directory(dir)) throw DataError("missing demonstration directory " + dir.string());
  DemoRecord d;
  d.demo_id = demo_id;
  d.setting.roll_deg = setting_deg;
  d.pose = read_pose_csv(dir / "pose.csv");
  d.orientation = read_orientation_csv(dir / "orientation.csv");
  d.tactile = read_tactile_csv(dir / "tactile.csv", setting_deg);
  if (d.pose.size() != d.orientation.size()) throw DataError("pose and orientation lengths differ in " + dir.string());
  return d;
}

void write_corpus_meta(const fs::path& root, const CorpusMeta& meta) {
  json counts = json::object();
  for (double s : meta.simulator.settings) counts[setting_dir_name(s)] = meta.simulator.demos_per_setting;
  const json j = {{"settings", meta.simulator.settings},
                  {"counts", counts},
                  {"seed", meta.simulator.seed},
                  {"simulator", simulator_json(meta.simulator)},
                  {"contact", contact_json(meta.contact)}};
  write_text(root / "meta.json", j.dump(2) + "\n");
}

CorpusMeta read_corpus_meta(const fs::path& root) {
  const json j = parse(read_text(root / "meta.json"), "corpus meta");
  return guarded("corpus meta", [&] {
    CorpusMeta meta;
    meta.simulator = simulator_from(j.at("simulator"));
    meta.contact = contact_from(j.at("contact"));
    return meta;
  });
}

std::string simulator_config_json(const SimulatorConfig& config) { return simulator_json(config).dump(2); }

SimulatorConfig simulator_config_from_json(const std::string& text) {
  const json j = parse(text, "simulator config");
  return guarded("simulator config", [&] { return simulator_from(j); });
}

void write_primitive_file(const fs::path& path, int stage, const QuaternionPrimitive& orientation,
                          const PositionPrimitive& position, const ExpectedTraceModel& traces) {
  json et = position_json(traces.dmp);
  et["start"] = vec(traces.start);
  const json j = {{"stage", stage},
                  {"orientation", quaternion_json(orientation)},
                  {"position", position_json(position)},
                  {"expected_traces", et}};
  write_text(path, j.dump(2) + "\n");
}

PrimitiveFile read_primitive_file(const fs::path& path) {
  const json j = parse(read_text(path), path.string());
  return guarded(path.string(), [&] {
    PrimitiveFile f;
    f.stage = j.at("stage").get<int>();
    f.orientation = quaternion_from(j.at("orientation"));
    f.position = position_from(j.at("position"));
    f.traces.dmp = position_from(j.at("expected_traces"));
    f.traces.start = to_vec(j.at("expected_traces").at("start"));
    return f;
  });
}

NominalSkill read_skill(const fs::path& model_dir) {
  NominalSkill skill;
  for (int k = 1; k <= 3; ++k) {
    const auto f = read_primitive_file(model_dir / ("prim" + std::to_string(k) + ".json"));
    if (f.stage != k) throw DataError("primitive file prim" + std::to_string(k) + ".json has the wrong stage");
    skill.orientation.push_back(f.orientation);
    skill.position.push_back(f.position);
    skill.traces.push_back(f.traces);
  }
  skill.validate();
  return skill;
}

std::string feedback_model_json(const FeedbackModel& model) {
  model.validate();
  json j;
  j["input_dim"] = model.input_dim();
  j["architecture"] = model.arch.label();
  j["normalization"] = {{"mean", vec(model.normalization.mean)}, {"scale", vec(model.normalization.scale)}};
  if (model.pca) {
    j["pca"] = {{"mean", vec(model.pca->mean)},
                {"components", mat(model.pca->components)},
                {"variances", vec(model.pca->variances)},
                {"retained_fraction", model.pca->retained_fraction}};
  } else {
    j["pca"] = nullptr;
  }
  j["output_scale"] = vec(model.output_scale);
  j["bank"] = bank_json(model.bank);
  j["networks"] = json::array();
  for (const auto& net : model.networks) j["networks"].push_back(network_json(net));
  return j.dump(2) + "\n";
}

FeedbackModel feedback_model_from_json(const std::string& text) {
  const json j = parse(text, "feedback model");
  return guarded("feedback model", [&] {
    FeedbackModel m;
    m.arch = ArchitectureSpec::parse(j.at("architecture").get<std::string>());
    m.normalization.mean = to_vec(j.at("normalization").at("mean"));
    m.normalization.scale = to_vec(j.at("normalization").at("scale"));
    if (!j.at("pca").is_null()) {
      Pca p;
      p.mean = to_vec(j.at("pca").at("mean"));
      p.components = to_mat(j.at("pca").at("components"));
      p.variances = to_vec(j.at("pca").at("variances"));
      p.retained_fraction = j.at("pca").at("retained_fraction").get<double>();
      m.pca = p;
    }
    m.output_scale = to_vec(j.at("output_scale"));
    m.bank = bank_from(j.at("bank"));
    for (const auto& n : j.at("networks")) m.networks.push_back(network_from(n));
    if (j.at("input_dim").get<Eigen::Index>() != m.input_dim()) throw DataError("feedback model input_dim disagrees");
    m.validate();
    return m;
  });
}

void write_feedback_model(const fs::path& path, const FeedbackModel& model) {
  write_text(path, feedback_model_json(model));
}

FeedbackModel read_feedback_model(const fs::path& path) { return feedback_model_from_json(read_text(path)); }

void write_dataset_csv(const fs::path& path, const CouplingDataset& data) {
  data.validate();
  std::vector<std::string> header{"demo_id", "setting", "p", "u"};
  for (const auto& h : numbered("ds_", data.input_dim())) header.push_back(h);
  for (const auto& h : numbered("C_", data.output_dim())) header.push_back(h);
  const auto n = static_cast<Eigen::Index>(data.rows());
  Eigen::MatrixXd m(n, 4 + data.input_dim() + data.output_dim());
  for (Eigen::Index r = 0; r < n; ++r) {
    m(r, 0) = data.demo_id[static_cast<std::size_t>(r)];
    m(r, 1) = data.setting[static_cast<std::size_t>(r)];
    m(r, 2) = data.p[r];
    m(r, 3) = data.u[r];
  }
  m.middleCols(4, data.input_dim()) = data.ds;
  m.rightCols(data.output_dim()) = data.c;
  write_csv(path, header, m);
}

CouplingDataset read_dataset_csv(const fs::path& path) {
  const Csv csv = read_csv(path);
  const auto& h = csv.header;
  if (h.size() < 6 || h[0] != "demo_id" || h[1] != "setting" || h[2] != "p" || h[3] != "u") {
    throw DataError("unexpected dataset header in " + path.string());
  }
  Eigen::Index k = 0, m = 0;
  for (std::size_t i = 4; i < h.size(); ++i) {
    if (h[i] == "ds_" + std::to_string(k + 1) && m == 0) {
      ++k;
    } else if (h[i] == "C_" + std::to_string(m + 1)) {
      ++m;
    } else {
      throw DataError("unexpected dataset column '" + h[i] + "' in " + path.string());
    }
  }
  if (k == 0 || m == 0) throw DataError("dataset needs ds_ and C_ columns in " + path.string());
  CouplingDataset d;
  const Eigen::Index n = csv.values.rows();
  for (Eigen::Index r = 0; r < n; ++r) {
    d.demo_id.push_back(static_cast<int>(std::llround(csv.values(r, 0))));
    d.setting.push_back(csv.values(r, 1));
  }
  d.p = csv.values.col(2);
  d.u = csv.values.col(3);
  d.ds = csv.values.middleCols(4, k);
  d.c = csv.values.rightCols(m);
  d.validate();
  return d;
}

void write_curve_csv(const fs::path& path, const LearningCurve& curve) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(curve.step.size()), 5);
  for (std::size_t i = 0; i < curve.step.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) << curve.step[i], curve.train[i], curve.val[i], curve.test[i], curve.gen[i];
  }
  write_csv(path, {"step", "train", "val", "test", "gen"}, m);
}

std::string reports_json(const std::vector<EvalReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json folds = json::array();
    for (const auto& f : r.folds) {
      json by_setting = json::object();
      for (const auto& [s, v] : f.gen_by_setting) by_setting[setting_dir_name(s)] = v;
      folds.push_back({{"demo", f.demo}, {"nmse", nmse_json(f.nmse)}, {"gen_by_setting", by_setting}});
    }
    out.push_back({{"model", r.model},
                   {"primitive", r.label},
                   {"mean", nmse_json(r.mean())},
                   {"std", nmse_json(r.stddev())},
                   {"folds", folds}});
  }
  return out.dump(2) + "\n";
}

}  // namespace fbmp::io
