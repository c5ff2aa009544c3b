#include "fbmp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fbmp/errors.hpp"
#include "fbmp/random.hpp"

namespace fbmp {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Minimum-jerk profile s(x) = 10x^3 - 15x^4 + 6x^5 and its first two derivatives in x.
struct MinJerk {
  double s, ds, dds;
};

MinJerk min_jerk(double x) {
  if (x <= 0.0) return {0.0, 0.0, 0.0};
  if (x >= 1.0) return {1.0, 0.0, 0.0};
  const double x2 = x * x, x3 = x2 * x;
  return {10 * x3 - 15 * x3 * x + 6 * x3 * x2, 30 * x2 - 60 * x3 + 30 * x3 * x, 60 * x - 180 * x2 + 120 * x3};
}

std::uint64_t setting_salt(double setting_deg) {
  return static_cast<std::uint64_t>(std::llround(setting_deg * 1000.0) + (1LL << 40));
}

const Vec3 kEx = Vec3::UnitX();
const Vec3 kEy = Vec3::UnitY();

}  // namespace

SimulatorConfig SimulatorConfig::tiny_profile() {
  SimulatorConfig c;
  c.settings = {0.0, 5.0, 10.0};
  c.demos_per_setting = 4;
  c.channels = 8;
  return c;
}

std::size_t SimulatorConfig::stage_steps(int stage) const {
  if (stage < 0 || stage > 2) throw ValidationError("simulator: stage index out of range");
  return static_cast<std::size_t>(std::llround(stage_durations[stage] * pose_rate));
}

void SimulatorConfig::validate() const {
  if (settings.empty()) throw ValidationError("simulator: no settings");
  for (double s : settings) BoardSetting{s}.validate();
  if (demos_per_setting < 1) throw ValidationError("simulator: demos_per_setting must be >= 1");
  if (channels < 1) throw ValidationError("simulator: channels must be >= 1");
  if (!(pose_rate > 0.0) || !(tactile_rate > 0.0)) throw ValidationError("simulator: rates must be positive");
  for (int k = 0; k < 3; ++k) {
    if (stage_steps(k) < 3) throw ValidationError("simulator: every stage needs at least 3 pose samples");
  }
  if (!(tau_scale > 0.0)) throw ValidationError("simulator: tau_scale must be positive");
  if (!(noise_sigma >= 0.0)) throw ValidationError("simulator: noise sigma must be non-negative");
  if (!(teacher_saturation_deg > 0.0) || !(contact_saturation_deg > 0.0)) {
    throw ValidationError("simulator: saturation scales must be positive");
  }
  if (!(correction_jitter >= 0.0 && correction_jitter <= 0.05)) {
    throw ValidationError("simulator: correction jitter must be within [0, 0.05]");
  }
}

void BoardSetting::validate() const {
  if (!std::isfinite(roll_deg) || std::abs(roll_deg) > 20.0) throw ValidationError("board roll must be within ±20°");
}

Eigen::VectorXd ContactModel::response(double delta, double delta_dot) const {
  return sensitivity.col(0) * delta + sensitivity.col(1) * delta_dot +
         gain.cwiseProduct(Eigen::VectorXd::Constant(channels(), std::tanh(delta / saturation)));
}

Eigen::VectorXd ContactModel::nominal(double t, double t2, double t3) const {
  const double ramp = min_jerk((t - t2) / (t3 - t2)).s;
  const double slide_in = min_jerk((t - t3) / 0.3).s;
  Eigen::VectorXd e = baseline + ramp * contact_level;
  if (slide_in > 0.0) {
    const double ts = t - t3;
    for (Eigen::Index k = 0; k < e.size(); ++k) {
      e[k] += slide_in * slide_amplitude[k] *
              std::sin(2.0 * std::numbers::pi * slide_frequency[k] * ts + slide_phase[k]);
    }
  }
  return e;
}

ContactModel build_contact_model(int channels, std::uint64_t seed, double noise_sigma, double saturation_deg) {
  if (channels < 1) throw ValidationError("build_contact_model: need at least one channel");
  if (!(noise_sigma >= 0.0) || !(saturation_deg > 0.0)) throw ValidationError("build_contact_model: bad parameters");
  Rng rng(seed);
  const Eigen::Index k = channels;
  ContactModel m;
  m.seed = seed;
  m.noise_sigma = noise_sigma;
  m.saturation = saturation_deg * kDeg;
  m.sensitivity.resize(k, 2);
  m.gain.resize(k);
  m.baseline.resize(k);
  m.contact_level.resize(k);
  m.slide_amplitude.resize(k);
  m.slide_frequency.resize(k);
  m.slide_phase.resize(k);
  // A quarter of the channels are guaranteed strong (|S| >= 60 > half of the max of 100).
  const Eigen::Index strong = (k + 3) / 4;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double mag = i < strong ? rng.uniform(0.6, 1.0) : rng.uniform(0.05, 1.0);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    m.sensitivity(i, 0) = 100.0 * sign * mag;
    m.sensitivity(i, 1) = 10.0 * rng.uniform(-1.0, 1.0);
    m.gain[i] = rng.uniform(-8.0, 8.0);
    m.baseline[i] = rng.uniform(-10.0, 10.0);
    m.contact_level[i] = rng.uniform(5.0, 20.0);
    m.slide_amplitude[i] = rng.uniform(1.0, 4.0);
    m.slide_frequency[i] = rng.uniform(0.5, 1.5);
    m.slide_phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  return m;
}

double roll_misalignment(const UnitQuaternion& q, double board_roll_rad) {
  const Vec3 n(std::sin(board_roll_rad), 0.0, std::cos(board_roll_rad));
  return std::asin(std::clamp(n.dot(to_rotation_matrix(q) * kEx), -1.0, 1.0));
}

double roll_misalignment_rate(const UnitQuaternion& q, const RotVec3& omega, double board_roll_rad) {
  const Vec3 n(std::sin(board_roll_rad), 0.0, std::cos(board_roll_rad));
  const Vec3 edge = to_rotation_matrix(q) * kEx;
  const double c = std::cos(std::asin(std::clamp(n.dot(edge), -1.0, 1.0)));
  return n.dot(omega.cross(edge)) / std::max(c, 1e-9);
}

DemoRecord generate_demo(const SimulatorConfig& config, const ContactModel& contact, double setting_deg,
                         int demo_id) {
  config.validate();
  BoardSetting{setting_deg}.validate();
  if (contact.channels() != config.channels) throw ValidationError("generate_demo: contact model channel mismatch");

  Rng rng(derive_seed(derive_seed(config.seed, setting_salt(setting_deg)), static_cast<std::uint64_t>(demo_id)));
  const double height = config.descend_height + rng.uniform(-config.descend_jitter, config.descend_jitter);
  const double slide = config.slide_length + rng.uniform(-config.slide_jitter, config.slide_jitter);
  const double pitch0 = (config.pitch_deg + rng.uniform(-config.pitch_jitter_deg, config.pitch_jitter_deg)) * kDeg;
  const double jitter = rng.uniform(-config.correction_jitter, config.correction_jitter);
  const double theta = setting_deg * kDeg;

  const double dt = config.dt();
  const std::size_t n1 = config.stage_steps(0), n2 = config.stage_steps(1), n3 = config.stage_steps(2);
  const std::size_t n = n1 + n2 + n3 + 1;
  const std::size_t e1 = n1, s3 = n1 + n2;
  const double T1 = static_cast<double>(n1) * dt, T2 = static_cast<double>(n2) * dt, T3 = static_cast<double>(n3) * dt;

  DemoRecord rec;
  rec.demo_id = demo_id;
  rec.setting.roll_deg = setting_deg;
  rec.truth = {e1, s3, n};

  // Corrective roll: the demonstrator reacts to the perceived misalignment through the same
  // second-order dynamics as the orientation primitive (moving goal seeded at the stage start).
  std::vector<double> x(n, 0.0), xd(n, 0.0), xdd(n, 0.0);
  const DmpGains gains;
  const double sat = config.teacher_saturation_deg * kDeg;
  const std::size_t starts[2] = {e1, s3};
  const std::size_t ends[2] = {s3, n - 1};
  const double taus[2] = {config.tau_scale * T2, config.tau_scale * T3};
  for (int stage = 0; stage < 2; ++stage) {
    const double tau = taus[stage];
    const auto canonical = CanonicalParams::with_tau(tau);
    PhaseState phase;
    double goal = x[starts[stage]];
    for (std::size_t i = starts[stage];; ++i) {
      const double perceived = theta * (1.0 + jitter) - x[i];
      const double drive = config.teacher_kp * sat * std::tanh(perceived / sat) - config.teacher_kd * tau * xd[i];
      const double c = -phase.u * drive;
      xdd[i] = (gains.alpha * (gains.beta * (goal - x[i]) - tau * xd[i]) + c) / (tau * tau);
      if (i == ends[stage]) break;
      x[i + 1] = x[i] + dt * xd[i];
      xd[i + 1] = xd[i] + dt * xdd[i];
      goal += dt * gains.alpha_g * (0.0 - goal) / tau;
      phase = canonical_step(phase, canonical, dt);
    }
  }

  rec.pose.dt = dt;
  rec.pose.t = uniform_times(n, dt);
  rec.pose.y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3);
  rec.pose.yd = rec.pose.y;
  rec.pose.ydd = rec.pose.y;
  rec.orientation.dt = dt;
  rec.orientation.t = rec.pose.t;
  rec.orientation.omega.resize(static_cast<Eigen::Index>(n), 3);
  rec.orientation.omega_dot.resize(static_cast<Eigen::Index>(n), 3);
  rec.roll = x;
  rec.misalignment.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double t = rec.pose.t[i];
    const MinJerk z = min_jerk(t / T1);
    rec.pose.y(r, 2) = height * (1.0 - z.s);
    rec.pose.yd(r, 2) = -height * z.ds / T1;
    rec.pose.ydd(r, 2) = -height * z.dds / (T1 * T1);
    const MinJerk y = min_jerk(static_cast<double>(static_cast<long>(i) - static_cast<long>(s3)) / static_cast<double>(n3));
    rec.pose.y(r, 1) = slide * y.s;
    rec.pose.yd(r, 1) = slide * y.ds / T3;
    rec.pose.ydd(r, 1) = slide * y.dds / (T3 * T3);

    const MinJerk a = min_jerk(static_cast<double>(static_cast<long>(i) - static_cast<long>(e1)) / static_cast<double>(n2));
    const double alpha = pitch0 * (1.0 - a.s);
    const double alpha_d = -pitch0 * a.ds / T2;
    const double alpha_dd = -pitch0 * a.dds / (T2 * T2);

    const UnitQuaternion roll_q = axis_angle(kEy, x[i]);
    rec.orientation.q.push_back(compose(roll_q, axis_angle(kEx, alpha)));
    const Eigen::Matrix3d r1 = to_rotation_matrix(roll_q);
    const Vec3 w1 = xd[i] * kEy;
    const Vec3 w2 = r1 * (alpha_d * kEx);
    rec.orientation.omega.row(r) = (w1 + w2).transpose();
    rec.orientation.omega_dot.row(r) = (xdd[i] * kEy + w1.cross(w2) + r1 * (alpha_dd * kEx)).transpose();
    rec.misalignment[i] = theta - x[i];
  }

  // Tactile readings on their own grid, misalignment interpolated from the pose grid.
  const double duration = static_cast<double>(n - 1) * dt;
  const auto m = static_cast<std::size_t>(std::floor(duration * config.tactile_rate + 1e-9)) + 1;
  rec.tactile.dt = 1.0 / config.tactile_rate;
  rec.tactile.setting = setting_deg;
  rec.tactile.t = uniform_times(m, rec.tactile.dt);
  rec.tactile.values.resize(static_cast<Eigen::Index>(m), config.channels);
  Eigen::MatrixXd delta(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) delta.row(static_cast<Eigen::Index>(i)) << theta - x[i], -xd[i];
  const Eigen::MatrixXd delta_t = resample_linear(rec.pose.t, delta, rec.tactile.t);
  for (std::size_t j = 0; j < m; ++j) {
    const double t = rec.tactile.t[j];
    Eigen::VectorXd e = contact.nominal(t, T1, T1 + T2);
    if (t >= T1 - 1e-9) e += contact.response(delta_t(static_cast<Eigen::Index>(j), 0), delta_t(static_cast<Eigen::Index>(j), 1));
    for (Eigen::Index k = 0; k < e.size(); ++k) e[k] += contact.noise_sigma * rng.normal();
    rec.tactile.values.row(static_cast<Eigen::Index>(j)) = e.transpose();
  }
  return rec;
}

std::vector<DemoRecord> generate_nominal_demos(const SimulatorConfig& config, const ContactModel& contact, int count) {
  return generate_corrected_demos(config, contact, BoardSetting{0.0}, count);
}

std::vector<DemoRecord> generate_corrected_demos(const SimulatorConfig& config, const ContactModel& contact,
                                                 const BoardSetting& setting, int count) {
  if (count < 1) throw ValidationError("generate demos: count must be >= 1");
  std::vector<DemoRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out.push_back(generate_demo(config, contact, setting.roll_deg, k));
  return out;
}

void NominalSkill::validate() const {
  if (orientation.size() != 3 || position.size() != 3 || traces.size() != 3) {
    throw ValidationError("nominal skill: expected three primitives with traces");
  }
  for (std::size_t k = 0; k < 3; ++k) {
    orientation[k].validate();
    position[k].validate();
    if (!(orientation[k].bank == traces[k].dmp.bank)) {
      throw ValidationError("nominal skill: expected traces must share the primitive's kernel bank");
    }
  }
}

Vec3 coupling_vector(const Eigen::VectorXd& c) {
  if (c.size() == 1) return {0.0, c[0], 0.0};
  if (c.size() == 3) return c;
  throw ValidationError("coupling_vector: expected 1 or 3 coupling dimensions");
}

ClosedLoopResult closed_loop_unroll(const NominalSkill& skill, const std::vector<const FeedbackModel*>& models,
                                    const BoardSetting& setting, const ContactModel& contact,
                                    const SimulatorConfig& config, const ClosedLoopOptions& options) {
  skill.validate();
  setting.validate();
  const double theta = setting.roll_deg * kDeg;
  const double dt = config.dt();
  const Eigen::Index channels = contact.channels();
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (!models[k]) continue;
    models[k]->validate();
    if (!(models[k]->bank == skill.orientation[k].bank)) {
      throw ValidationError("closed_loop_unroll: feedback model bank differs from primitive " + std::to_string(k + 1));
    }
    if (models[k]->input_dim() != channels) throw ValidationError("closed_loop_unroll: feedback input dimension mismatch");
  }

  std::vector<std::size_t> steps(3);
  for (std::size_t k = 0; k < 3; ++k) {
    steps[k] = static_cast<std::size_t>(std::ceil(skill.orientation[k].duration / dt - 1e-9));
  }
  const double t2 = static_cast<double>(steps[0]) * dt;
  const double t3 = t2 + static_cast<double>(steps[1]) * dt;
  const std::size_t n = steps[0] + steps[1] + steps[2] + 1;

  Rng noise(derive_seed(options.noise_seed, setting_salt(setting.roll_deg)));
  const double height = options.start_height >= 0.0 ? options.start_height : config.descend_height;
  const double pitch = (options.start_pitch_deg >= 0.0 ? options.start_pitch_deg : config.pitch_deg) * kDeg;

  ClosedLoopResult res;
  DemoRecord& rec = res.record;
  rec.setting = setting;
  rec.truth = {steps[0], steps[0] + steps[1], n};
  rec.pose.dt = rec.orientation.dt = rec.tactile.dt = dt;
  rec.pose.t = rec.orientation.t = rec.tactile.t = uniform_times(n, dt);
  rec.tactile.setting = setting.roll_deg;
  const auto rows = static_cast<Eigen::Index>(n);
  rec.pose.y.resize(rows, 3);
  rec.pose.yd.resize(rows, 3);
  rec.pose.ydd.resize(rows, 3);
  rec.orientation.omega.resize(rows, 3);
  rec.orientation.omega_dot.resize(rows, 3);
  rec.tactile.values.resize(rows, channels);

  ClosedLoopLog& log = res.log;
  const Eigen::Index outputs = [&] {
    for (const auto* m : models) {
      if (m) return m->outputs();
    }
    return Eigen::Index{1};
  }();
  log.coupling = Eigen::MatrixXd::Zero(rows, outputs);
  log.deviation = Eigen::MatrixXd::Zero(rows, channels);

  UnitQuaternion q = axis_angle(kEx, pitch);
  RotVec3 omega = RotVec3::Zero();
  Eigen::VectorXd y = Eigen::Vector3d(0.0, 0.0, height);
  Eigen::VectorXd yd = Eigen::VectorXd::Zero(3);
  std::size_t row = 0;
  double coupling_sum = 0.0;
  std::size_t coupling_count = 0;

  for (std::size_t k = 0; k < 3; ++k) {
    const auto& prim = skill.orientation[k];
    const auto& pprim = skill.position[k];
    const int stage = static_cast<int>(k) + 1;
    const bool feedback = options.coupling &&
                          std::find(options.feedback_stages.begin(), options.feedback_stages.end(), stage) !=
                              options.feedback_stages.end() &&
                          k < models.size() && models[k] != nullptr;
    const Eigen::MatrixXd expected = skill.traces[k].unroll(dt, steps[k] + 1);
    if (expected.cols() != channels) throw ValidationError("closed_loop_unroll: expected trace channel mismatch");

    PrimitiveState s = initial_state(prim, q);
    s.omega = omega;
    PositionState ps = initial_position_state(pprim, y);
    ps.yd = yd;
    const double offset = static_cast<double>(row) * dt;

    for (std::size_t i = 0;; ++i) {
      const double t = offset + static_cast<double>(i) * dt;
      const double delta = roll_misalignment(s.q, theta);
      const double delta_dot = roll_misalignment_rate(s.q, s.omega, theta);
      Eigen::VectorXd e = contact.nominal(t, t2, t3);
      if (k > 0) e += contact.response(delta, delta_dot);
      for (Eigen::Index c = 0; c < channels; ++c) e[c] += contact.noise_sigma * noise.normal();
      const Eigen::VectorXd ds = e - expected.row(static_cast<Eigen::Index>(i)).transpose();

      Eigen::VectorXd c = Eigen::VectorXd::Zero(outputs);
      if (feedback) c = predict_coupling(*models[k], ds, s.phase);
      const Vec3 cv = coupling_vector(c);
      const Vec3 f = forcing_term(s.phase.p, s.phase.u, prim);
      const Eigen::VectorXd pf = position_forcing_term(ps.phase.p, ps.phase.u, pprim);
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);

      const bool last = i == steps[k];
      if (!last || k == 2) {
        const auto r = static_cast<Eigen::Index>(row);
        rec.pose.y.row(r) = ps.y.transpose();
        rec.pose.yd.row(r) = ps.yd.transpose();
        rec.pose.ydd.row(r) = position_acceleration(ps, pf, zero, pprim).transpose();
        rec.orientation.q.push_back(s.q);
        rec.orientation.omega.row(r) = s.omega.transpose();
        rec.orientation.omega_dot.row(r) = angular_acceleration(s, f, cv, prim).transpose();
        rec.tactile.values.row(r) = e.transpose();
        rec.roll.push_back(theta - delta);
        rec.misalignment.push_back(delta);
        log.t.push_back(t);
        log.primitive.push_back(stage);
        log.p.push_back(s.phase.p);
        log.u.push_back(s.phase.u);
        log.coupling.row(r) = c.transpose();
        if (feedback) {
          log.deviation.row(r) = ds.transpose();
          coupling_sum += c.cwiseAbs().sum();
          ++coupling_count;
        }
        log.misalignment.push_back(delta);
        ++row;
      }
      if (last) break;
      s = transformation_step(s, f, cv, prim, dt);
      ps = position_transformation_step(ps, pf, zero, pprim, dt);
    }
    q = s.q;
    omega = s.omega;
    y = ps.y;
    yd = ps.yd;
  }

  res.final_error_deg = std::abs(res.log.misalignment.back()) / kDeg;
  res.mean_abs_coupling = coupling_count ? coupling_sum / static_cast<double>(coupling_count) : 0.0;
  return res;
}

}  // namespace fbmp
