#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fbmp/feedback.hpp"
#include "fbmp/primitives.hpp"
#include "fbmp/sensors.hpp"

namespace fbmp {

/// Synthetic tilt-board scraping task. Stage 1 descends in z with the tool pitched, stage 2
/// rotates the tool flat onto the board, stage 3 slides in y. The board is rolled about world y.
struct SimulatorConfig {
  std::vector<double> settings{0.0, 2.5, 5.0, 7.5, 10.0};  // board roll, degrees
  int demos_per_setting = 15;
  int channels = 38;
  double pose_rate = 100.0;
  double tactile_rate = 100.0;

  double stage_durations[3] = {1.0, 1.0, 1.5};
  double descend_height = 0.10;
  double descend_jitter = 0.003;
  double slide_length = 0.30;
  double slide_jitter = 0.010;
  double pitch_deg = 20.0;
  double pitch_jitter_deg = 1.0;

  /// tau = tau_scale * primitive duration, for the primitives and the simulated teacher.
  double tau_scale = 4.0;

  // Simulated demonstrator correcting the roll during stages 2-3.
  double teacher_kp = 1500.0;
  double teacher_kd = 30.0;
  double teacher_saturation_deg = 4.0;
  double correction_jitter = 0.05;

  // Contact surrogate.
  double noise_sigma = 0.5;
  double contact_saturation_deg = 3.0;

  std::uint64_t seed = 20170529;

  static SimulatorConfig default_profile() { return {}; }
  static SimulatorConfig tiny_profile();

  double dt() const { return 1.0 / pose_rate; }
  /// Samples per stage on the pose grid.
  std::size_t stage_steps(int stage) const;
  std::size_t samples() const { return stage_steps(0) + stage_steps(1) + stage_steps(2) + 1; }
  double duration() const { return dt() * static_cast<double>(samples() - 1); }
  void validate() const;
};

/// e = nominal(t) + [in contact] (S [delta, delta_dot] + g tanh(delta / delta_sat)) + noise.
struct ContactModel {
  Eigen::MatrixXd sensitivity;  // K x 2: per rad, per rad/s
  Eigen::VectorXd gain;         // K
  double saturation = 0.0;      // rad
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // Nominal electrode profile.
  Eigen::VectorXd baseline, contact_level, slide_amplitude, slide_frequency, slide_phase;

  Eigen::Index channels() const { return sensitivity.rows(); }
  /// Noise-free deviation caused by misalignment delta (rad) and its rate.
  Eigen::VectorXd response(double delta, double delta_dot) const;
  /// Noise-free nominal reading at time t of an episode with stage start times t2, t3.
  Eigen::VectorXd nominal(double t, double t2, double t3) const;
};

ContactModel build_contact_model(int channels, std::uint64_t seed, double noise_sigma = 0.5,
                                 double saturation_deg = 3.0);

struct BoardSetting {
  double roll_deg = 0.0;
  void validate() const;
};

struct DemoRecord {
  int demo_id = 0;
  BoardSetting setting;
  PositionTrajectory pose;
  OrientationTrajectory orientation;
  SensorTraceSet tactile;
  Segmentation truth;              // built-in stage boundaries
  std::vector<double> roll;        // corrective roll x(t), rad
  std::vector<double> misalignment;  // delta(t) = board roll - tool roll, rad
};

/// Tool-board roll misalignment asin(n_board · R(Q) e_x), rad.
double roll_misalignment(const UnitQuaternion& q, double board_roll_rad);
/// Its rate given the world angular velocity.
double roll_misalignment_rate(const UnitQuaternion& q, const RotVec3& omega, double board_roll_rad);

DemoRecord generate_demo(const SimulatorConfig& config, const ContactModel& contact, double setting_deg, int demo_id);

std::vector<DemoRecord> generate_nominal_demos(const SimulatorConfig& config, const ContactModel& contact, int count);

std::vector<DemoRecord> generate_corrected_demos(const SimulatorConfig& config, const ContactModel& contact,
                                                 const BoardSetting& setting, int count);

/// Learned nominal behavior: one orientation primitive, position primitive and expected
/// trace model per stage.
struct NominalSkill {
  std::vector<QuaternionPrimitive> orientation;
  std::vector<PositionPrimitive> position;
  std::vector<ExpectedTraceModel> traces;

  void validate() const;
};

struct ClosedLoopLog {
  std::vector<double> t;
  std::vector<int> primitive;
  std::vector<double> p, u;
  Eigen::MatrixXd coupling;   // steps x M
  Eigen::MatrixXd deviation;  // steps x K
  std::vector<double> misalignment;
};

struct ClosedLoopResult {
  DemoRecord record;
  ClosedLoopLog log;
  double final_error_deg = 0.0;
  double mean_abs_coupling = 0.0;
};

struct ClosedLoopOptions {
  bool coupling = true;
  /// Stages (1-based) that receive feedback; the scraping task uses 2 and 3.
  std::vector<int> feedback_stages{2, 3};
  std::uint64_t noise_seed = 99;
  /// Episode starting pose; defaults to the nominal configuration.
  double start_height = -1.0;
  double start_pitch_deg = -1.0;
};

/// Runs the three primitives in sequence. In the feedback stages every step reads the contact
/// model at the current misalignment, subtracts the expected traces and adds the model's
/// coupling to the roll axis. `models[k]` serves stage k + 1 (null: no feedback).
ClosedLoopResult closed_loop_unroll(const NominalSkill& skill, const std::vector<const FeedbackModel*>& models,
                                    const BoardSetting& setting, const ContactModel& contact,
                                    const SimulatorConfig& config, const ClosedLoopOptions& options = {});

/// Coupling axes for M outputs: M = 1 -> roll (world y), M = 3 -> x, y, z.
Vec3 coupling_vector(const Eigen::VectorXd& c);

}  // namespace fbmp
