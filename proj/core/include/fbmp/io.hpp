#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fbmp/feedback.hpp"
#include "fbmp/primitives.hpp"
#include "fbmp/sensors.hpp"
#include "fbmp/simulator.hpp"
#include "fbmp/training.hpp"

namespace fbmp::io {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path);
/// Writes atomically enough for our purposes: parent directories are created first.
void write_text(const fs::path& path, const std::string& text);

/// Formats a double so that it parses back bit-identically.
std::string format_double(double v);

/// Generic numeric table with a header row.
void write_table_csv(const fs::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& values);

// Trajectory CSVs.
void write_orientation_csv(const fs::path& path, const OrientationTrajectory& traj);
OrientationTrajectory read_orientation_csv(const fs::path& path);
void write_pose_csv(const fs::path& path, const PositionTrajectory& traj);
PositionTrajectory read_pose_csv(const fs::path& path);
void write_tactile_csv(const fs::path& path, const SensorTraceSet& traces);
SensorTraceSet read_tactile_csv(const fs::path& path, double setting = 0.0);

// Corpus layout: <root>/<setting>/demo_<k>/{pose,orientation,tactile}.csv and <root>/meta.json.
std::string setting_dir_name(double setting_deg);
fs::path demo_dir(const fs::path& root, double setting_deg, int demo_id);
void write_demo(const fs::path& root, const DemoRecord& demo);
DemoRecord read_demo(const fs::path& root, double setting_deg, int demo_id);

struct CorpusMeta {
  SimulatorConfig simulator;
  ContactModel contact;
};
void write_corpus_meta(const fs::path& root, const CorpusMeta& meta);
CorpusMeta read_corpus_meta(const fs::path& root);

// JSON documents.
std::string simulator_config_json(const SimulatorConfig& config);
SimulatorConfig simulator_config_from_json(const std::string& text);

/// prim<k>.json: {stage, orientation, position, expected_traces}.
void write_primitive_file(const fs::path& path, int stage, const QuaternionPrimitive& orientation,
                          const PositionPrimitive& position, const ExpectedTraceModel& traces);
struct PrimitiveFile {
  int stage = 0;
  QuaternionPrimitive orientation;
  PositionPrimitive position;
  ExpectedTraceModel traces;
};
PrimitiveFile read_primitive_file(const fs::path& path);

/// Loads prim1.json .. prim3.json from a model directory.
NominalSkill read_skill(const fs::path& model_dir);

std::string feedback_model_json(const FeedbackModel& model);
FeedbackModel feedback_model_from_json(const std::string& text);
void write_feedback_model(const fs::path& path, const FeedbackModel& model);
FeedbackModel read_feedback_model(const fs::path& path);

/// CSV `demo_id,setting,p,u,ds_1..ds_K,C_1..C_M`.
void write_dataset_csv(const fs::path& path, const CouplingDataset& data);
CouplingDataset read_dataset_csv(const fs::path& path);

/// CSV `step,train,val,test,gen`.
void write_curve_csv(const fs::path& path, const LearningCurve& curve);

std::string reports_json(const std::vector<EvalReport>& reports);

}  // namespace fbmp::io
