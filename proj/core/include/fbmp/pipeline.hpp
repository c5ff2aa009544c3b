#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fbmp/feedback.hpp"
#include "fbmp/simulator.hpp"
#include "fbmp/training.hpp"

namespace fbmp {

namespace fs = std::filesystem;

enum class VelocitySource { recorded, finite_difference };
VelocitySource parse_velocity_source(const std::string& text);

/// One demonstration cut into its three primitives, tactile resampled onto the pose grid.
struct SegmentedDemo {
  int demo_id = 0;
  double setting = 0.0;
  Segmentation segmentation;
  std::array<PositionTrajectory, 3> pose;
  std::array<OrientationTrajectory, 3> orientation;
  std::array<SensorTraceSet, 3> tactile;
};

SegmentedDemo segment_demo(const DemoRecord& demo, VelocitySource velocities = VelocitySource::recorded);

struct NominalFit {
  NominalSkill skill;
  std::array<double, 3> reproduction_nmse{};
};

/// Fits position and orientation primitives per stage and the expected traces on the
/// nominal demonstrations.
NominalFit learn_nominal_skill(const std::vector<SegmentedDemo>& nominal, const FitOptions& options);

/// Mean per-channel NMSE of coupling-free unrolls (started at each demo's start) against the
/// demos, over channels that actually move.
double reproduction_nmse(const QuaternionPrimitive& orientation, const PositionPrimitive& position,
                         const std::vector<SegmentedDemo>& demos, int stage);

/// Coupling dataset rows for one stage (2 or 3). axes: "roll" (M = 1) or "all" (M = 3).
CouplingDataset extract_dataset(const NominalSkill& skill, const std::vector<SegmentedDemo>& demos, int stage,
                                const std::string& axes = "roll");

struct PipelineConfig {
  fs::path workdir = "fbmp_run";
  fs::path corpus;  // defaults to workdir/corpus
  SimulatorConfig simulator;
  FitOptions fit;   // tau_scale is taken from the corpus
  VelocitySource velocities = VelocitySource::recorded;
  std::string coupling_axes = "roll";
  std::vector<int> primitives{2, 3};
  std::vector<ArchitectureSpec> architectures{ArchitectureSpec::pmnn()};
  TrainConfig train;
  unsigned threads = 1;
  int holdout_demo = 0;
  double unroll_setting = 10.0;
  bool coupling = true;
  bool force = false;

  fs::path corpus_dir() const { return corpus.empty() ? workdir / "corpus" : corpus; }
  fs::path model_dir() const { return workdir / "models"; }
  fs::path dataset_dir() const { return workdir / "datasets"; }
  fs::path feedback_dir() const { return workdir / "feedback"; }
  fs::path report_dir() const { return workdir / "reports"; }
  fs::path unroll_dir() const { return workdir / "unroll"; }
};

struct CommandOutput {
  std::string text;  // human-readable summary
  std::string json;  // same content for machines
};

CommandOutput cmd_gen_data(const PipelineConfig& config);
CommandOutput cmd_learn_nominal(const PipelineConfig& config);
CommandOutput cmd_extract_coupling(const PipelineConfig& config);
CommandOutput cmd_train(const PipelineConfig& config);
CommandOutput cmd_loo(const PipelineConfig& config);
CommandOutput cmd_unroll(const PipelineConfig& config);
CommandOutput cmd_dominance(const PipelineConfig& config);

/// Loads every demonstration listed in the corpus meta, segmented.
std::vector<SegmentedDemo> load_corpus(const fs::path& corpus, VelocitySource velocities,
                                       const std::vector<double>& only_settings = {});

}  // namespace fbmp
