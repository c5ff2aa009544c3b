#include "fbmp/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "fbmp/errors.hpp"
#include "fbmp/io.hpp"
#include "json.hpp"

namespace fbmp {

using nlohmann::json;

namespace {

std::string prim_name(int stage) { return "prim" + std::to_string(stage); }

void check_stage(int stage) {
  if (stage < 1 || stage > 3) throw ValidationError("primitive index must be 1, 2 or 3");
}

// Stretches a trace onto n samples of the given grid (tolerates ±1-sample segment differences).
SensorTraceSet align_trace(const SensorTraceSet& trace, double dt, std::size_t n) {
  if (trace.size() == n) return trace;
  SensorTraceSet scaled = trace;
  const double factor = static_cast<double>(n - 1) / static_cast<double>(trace.size() - 1);
  for (auto& t : scaled.t) t *= factor;
  scaled.dt *= factor;
  return resample(scaled, dt, n);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

CommandOutput output(std::string text, const json& j) { return {std::move(text), j.dump(2)}; }

bool non_empty_dir(const fs::path& p) { return fs::is_directory(p) && !fs::is_empty(p); }

}  // namespace

VelocitySource parse_velocity_source(const std::string& text) {
  if (text == "recorded") return VelocitySource::recorded;
  if (text == "finite_difference" || text == "finite-difference") return VelocitySource::finite_difference;
  throw ValidationError("velocity source must be 'recorded' or 'finite_difference'");
}

SegmentedDemo segment_demo(const DemoRecord& demo, VelocitySource velocities) {
  PositionTrajectory pose = demo.pose;
  OrientationTrajectory orientation = demo.orientation;
  if (velocities == VelocitySource::finite_difference) {
    std::tie(pose.yd, pose.ydd) = estimate_linear_motion(pose.y, pose.dt);
    std::tie(orientation.omega, orientation.omega_dot) = estimate_angular_motion(orientation.q, orientation.dt);
  }
  SegmentedDemo out;
  out.demo_id = demo.demo_id;
  out.setting = demo.setting.roll_deg;
  try {
    out.segmentation = segment_zvc(pose);
  } catch (const SegmentationError& e) {
    throw SegmentationError("demo " + std::to_string(demo.demo_id) + " at setting " +
                            io::setting_dir_name(demo.setting.roll_deg) + ": " + e.what());
  }
  const SensorTraceSet tactile = resample(demo.tactile, pose.dt, pose.size());
  for (int k = 1; k <= 3; ++k) {
    const auto [b, e] = out.segmentation.range(k);
    out.pose[static_cast<std::size_t>(k - 1)] = pose.slice(b, e);
    out.orientation[static_cast<std::size_t>(k - 1)] = orientation.slice(b, e);
    out.tactile[static_cast<std::size_t>(k - 1)] = tactile.slice(b, e);
  }
  return out;
}

double reproduction_nmse(const QuaternionPrimitive& orientation, const PositionPrimitive& position,
                         const std::vector<SegmentedDemo>& demos, int stage) {
  check_stage(stage);
  const auto s = static_cast<std::size_t>(stage - 1);
  double total = 0.0;
  int channels = 0;
  auto accumulate = [&](const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      const Eigen::VectorXd col = target.col(c);
      if ((col.array() - col.mean()).square().mean() <= 1e-12) continue;
      total += channel_nmse(pred.col(c), col);
      ++channels;
    }
  };
  for (const auto& d : demos) {
    const auto& pose = d.pose[s];
    const auto& ori = d.orientation[s];
    UnrollOptions opt;
    opt.duration_factor = pose.duration() / position.duration;
    const auto pu = position_unroll(position, pose.y.row(0).transpose(), {}, pose.dt, opt);
    if (pu.size() != pose.size()) throw DataError("reproduction: unroll length differs from demo");
    accumulate(pu.y, pose.y);

    opt.duration_factor = ori.duration() / orientation.duration;
    const auto qu = unroll(orientation, ori.q.front(), {}, ori.dt, opt);
    Eigen::MatrixXd pred(static_cast<Eigen::Index>(ori.size()), 3), target(static_cast<Eigen::Index>(ori.size()), 3);
    for (std::size_t i = 0; i < ori.size(); ++i) {
      pred.row(static_cast<Eigen::Index>(i)) = rotation_error(qu.q[i], ori.q.front()).transpose();
      target.row(static_cast<Eigen::Index>(i)) = rotation_error(ori.q[i], ori.q.front()).transpose();
    }
    accumulate(pred, target);
  }
  if (channels == 0) return 0.0;
  return total / channels;
}

NominalFit learn_nominal_skill(const std::vector<SegmentedDemo>& nominal, const FitOptions& options) {
  if (nominal.empty()) throw DataError("learn_nominal: no nominal demonstrations");
  NominalFit fit;
  for (int k = 1; k <= 3; ++k) {
    const auto s = static_cast<std::size_t>(k - 1);
    std::vector<OrientationTrajectory> ori;
    std::vector<PositionTrajectory> pose;
    for (const auto& d : nominal) {
      ori.push_back(d.orientation[s]);
      pose.push_back(d.pose[s]);
    }
    QuaternionPrimitive qp = fit_quaternion_primitive(ori, options);
    PositionPrimitive pp = fit_position_primitive(pose, options);

    const double dt = ori.front().dt;
    const auto n = static_cast<std::size_t>(std::llround(qp.duration / dt)) + 1;
    std::vector<SensorTraceSet> trials;
    for (const auto& d : nominal) trials.push_back(align_trace(d.tactile[s], dt, n));
    ExpectedTraceModel traces = fit_expected_traces(trials, qp.canonical, qp.bank, options.ridge);

    fit.reproduction_nmse[s] = reproduction_nmse(qp, pp, nominal, k);
    fit.skill.orientation.push_back(std::move(qp));
    fit.skill.position.push_back(std::move(pp));
    fit.skill.traces.push_back(std::move(traces));
  }
  fit.skill.validate();
  return fit;
}

CouplingDataset extract_dataset(const NominalSkill& skill, const std::vector<SegmentedDemo>& demos, int stage,
                                const std::string& axes) {
  check_stage(stage);
  if (axes != "roll" && axes != "all") throw ValidationError("coupling axes must be 'roll' or 'all'");
  const auto s = static_cast<std::size_t>(stage - 1);
  const auto& prim = skill.orientation[s];
  CouplingDataset out;
  for (const auto& d : demos) {
    const auto& ori = d.orientation[s];
    const Eigen::MatrixX3d c = extract_coupling_target(ori, prim);
    const Eigen::MatrixXd ds = deviation(d.tactile[s], skill.traces[s]);
    const auto phases = canonical_rollout(prim.canonical, ori.dt, ori.size() - 1);
    CouplingDataset part;
    const auto n = static_cast<Eigen::Index>(ori.size());
    part.demo_id.assign(ori.size(), d.demo_id);
    part.setting.assign(ori.size(), d.setting);
    part.p.resize(n);
    part.u.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      part.p[i] = phases[static_cast<std::size_t>(i)].p;
      part.u[i] = phases[static_cast<std::size_t>(i)].u;
    }
    part.ds = ds;
    part.c = axes == "roll" ? Eigen::MatrixXd(c.col(1)) : Eigen::MatrixXd(c);
    out.append(part);
  }
  out.validate();
  return out;
}

std::vector<SegmentedDemo> load_corpus(const fs::path& corpus, VelocitySource velocities,
                                       const std::vector<double>& only_settings) {
  const io::CorpusMeta meta = io::read_corpus_meta(corpus);
  std::vector<SegmentedDemo> out;
  for (double setting : meta.simulator.settings) {
    if (!only_settings.empty() &&
        std::find(only_settings.begin(), only_settings.end(), setting) == only_settings.end()) {
      continue;
    }
    for (int k = 0; k < meta.simulator.demos_per_setting; ++k) {
      out.push_back(segment_demo(io::read_demo(corpus, setting, k), velocities));
    }
  }
  return out;
}

CommandOutput cmd_gen_data(const PipelineConfig& config) {
  const fs::path root = config.corpus_dir();
  if (non_empty_dir(root)) {
    if (!config.force) throw ValidationError(root.string() + " is not empty; pass --force to regenerate");
    if (!fs::exists(root / "meta.json")) {
      throw DataError("refusing to clear " + root.string() + ": it does not look like a corpus (no meta.json)");
    }
    fs::remove_all(root);
  }
  const SimulatorConfig& sim = config.simulator;
  sim.validate();
  const ContactModel contact =
      build_contact_model(sim.channels, derive_seed(sim.seed, 0xC0FFEE), sim.noise_sigma, sim.contact_saturation_deg);
  std::string text;
  json counts = json::object();
  std::size_t total = 0;
  for (double setting : sim.settings) {
    const auto demos = generate_corrected_demos(sim, contact, BoardSetting{setting}, sim.demos_per_setting);
    for (const auto& d : demos) io::write_demo(root, d);
    counts[io::setting_dir_name(setting)] = demos.size();
    total += demos.size();
    text += "setting " + io::setting_dir_name(setting) + " deg: " + std::to_string(demos.size()) + " demos\n";
  }
  io::write_corpus_meta(root, {sim, contact});
  text += "total: " + std::to_string(total) + " demos in " + root.string() + "\n";
  return output(text, {{"corpus", root.string()}, {"counts", counts}, {"total", total}});
}

CommandOutput cmd_learn_nominal(const PipelineConfig& config) {
  const io::CorpusMeta meta = io::read_corpus_meta(config.corpus_dir());
  if (std::find(meta.simulator.settings.begin(), meta.simulator.settings.end(), 0.0) == meta.simulator.settings.end()) {
    throw DataError("corpus has no 0 deg (nominal) setting");
  }
  FitOptions fit = config.fit;
  fit.tau_scale = meta.simulator.tau_scale;
  const auto nominal = load_corpus(config.corpus_dir(), config.velocities, {0.0});
  const NominalFit learned = learn_nominal_skill(nominal, fit);
  std::string text;
  json j = {{"reproduction_nmse", json::object()}, {"files", json::array()}};
  for (int k = 1; k <= 3; ++k) {
    const auto s = static_cast<std::size_t>(k - 1);
    const fs::path path = config.model_dir() / (prim_name(k) + ".json");
    io::write_primitive_file(path, k, learned.skill.orientation[s], learned.skill.position[s], learned.skill.traces[s]);
    j["reproduction_nmse"][prim_name(k)] = learned.reproduction_nmse[s];
    j["files"].push_back(path.string());
    text += prim_name(k) + ": reproduction NMSE " + fmt("%.3e", learned.reproduction_nmse[s]) + " -> " + path.string() + "\n";
  }
  return output(text, j);
}

CommandOutput cmd_extract_coupling(const PipelineConfig& config) {
  const NominalSkill skill = io::read_skill(config.model_dir());
  const auto demos = load_corpus(config.corpus_dir(), config.velocities);
  const bool corrected = std::any_of(demos.begin(), demos.end(), [](const auto& d) { return d.setting != 0.0; });
  if (!corrected) throw DataError("corpus has no corrected (non-zero) settings");
  std::string text;
  json j = json::object();
  for (int stage : config.primitives) {
    if (stage == 1) throw ValidationError("feedback datasets are only built for primitives 2 and 3");
    const CouplingDataset data = extract_dataset(skill, demos, stage, config.coupling_axes);
    const fs::path path = config.dataset_dir() / (prim_name(stage) + ".csv");
    io::write_dataset_csv(path, data);
    j[prim_name(stage)] = {{"rows", data.rows()}, {"path", path.string()}};
    text += prim_name(stage) + ": " + std::to_string(data.rows()) + " rows -> " + path.string() + "\n";
  }
  return output(text, j);
}

CommandOutput cmd_train(const PipelineConfig& config) {
  const NominalSkill skill = io::read_skill(config.model_dir());
  std::string text;
  json j = json::object();
  for (const auto& arch : config.architectures) {
    for (int stage : config.primitives) {
      check_stage(stage);
      const CouplingDataset data = io::read_dataset_csv(config.dataset_dir() / (prim_name(stage) + ".csv"));
      const DatasetSplit split = split_dataset(data, config.holdout_demo, config.train.seed);
      const TrainResult r =
          train_model(data, split, arch, skill.orientation[static_cast<std::size_t>(stage - 1)].bank, config.train);
      const fs::path dir = config.feedback_dir() / arch.label();
      io::write_feedback_model(dir / (prim_name(stage) + ".json"), r.model);
      for (std::size_t m = 0; m < r.curves.size(); ++m) {
        const std::string suffix = r.curves.size() > 1 ? "_C" + std::to_string(m + 1) : "";
        io::write_curve_csv(dir / (prim_name(stage) + "_curve" + suffix + ".csv"), r.curves[m]);
      }
      j[arch.label()][prim_name(stage)] = {{"train", r.best.train}, {"val", r.best.val}, {"test", r.best.test},
                                           {"gen", r.best.gen}, {"best_step", r.best_step}};
      text += arch.label() + " " + prim_name(stage) + ": train " + fmt("%.4f", r.best.train) + " val " +
              fmt("%.4f", r.best.val) + " test " + fmt("%.4f", r.best.test) + " gen " + fmt("%.4f", r.best.gen) +
              " -> " + (dir / (prim_name(stage) + ".json")).string() + "\n";
    }
  }
  return output(text, j);
}

CommandOutput cmd_loo(const PipelineConfig& config) {
  const NominalSkill skill = io::read_skill(config.model_dir());
  std::vector<EvalReport> reports;
  for (const auto& arch : config.architectures) {
    for (int stage : config.primitives) {
      check_stage(stage);
      const CouplingDataset data = io::read_dataset_csv(config.dataset_dir() / (prim_name(stage) + ".csv"));
      EvalReport r = loo_evaluate(data, arch, skill.orientation[static_cast<std::size_t>(stage - 1)].bank,
                                  config.train, config.threads);
      r.label = prim_name(stage);
      reports.push_back(std::move(r));
    }
  }
  const std::string table = report_table(reports);
  io::write_text(config.report_dir() / "loo.txt", table);
  io::write_text(config.report_dir() / "loo.json", io::reports_json(reports));
  return {table, io::reports_json(reports)};
}

CommandOutput cmd_unroll(const PipelineConfig& config) {
  const NominalSkill skill = io::read_skill(config.model_dir());
  const io::CorpusMeta meta = io::read_corpus_meta(config.corpus_dir());
  std::vector<FeedbackModel> loaded;
  std::vector<const FeedbackModel*> models(3, nullptr);
  const std::string label = config.architectures.front().label();
  if (config.coupling) {
    loaded.reserve(config.primitives.size());
    for (int stage : config.primitives) {
      check_stage(stage);
      loaded.push_back(io::read_feedback_model(config.feedback_dir() / label / (prim_name(stage) + ".json")));
      models[static_cast<std::size_t>(stage - 1)] = &loaded.back();
    }
  }
  ClosedLoopOptions opt;
  opt.coupling = config.coupling;
  opt.feedback_stages = config.primitives;
  const ClosedLoopResult res =
      closed_loop_unroll(skill, models, BoardSetting{config.unroll_setting}, meta.contact, meta.simulator, opt);

  const fs::path dir = config.unroll_dir() /
                       (io::setting_dir_name(config.unroll_setting) + (config.coupling ? "_on" : "_off"));
  io::write_pose_csv(dir / "pose.csv", res.record.pose);
  io::write_orientation_csv(dir / "orientation.csv", res.record.orientation);
  io::write_tactile_csv(dir / "tactile.csv", res.record.tactile);

  const auto& log = res.log;
  const auto rows = static_cast<Eigen::Index>(log.t.size());
  std::vector<std::string> header{"t", "primitive", "p", "u"};
  Eigen::MatrixXd coupling(rows, 4 + log.coupling.cols());
  for (Eigen::Index c = 0; c < log.coupling.cols(); ++c) header.push_back("C_" + std::to_string(c + 1));
  header.push_back("misalignment_deg");
  coupling.conservativeResize(rows, coupling.cols() + 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    coupling(r, 0) = log.t[i];
    coupling(r, 1) = log.primitive[i];
    coupling(r, 2) = log.p[i];
    coupling(r, 3) = log.u[i];
    coupling.row(r).segment(4, log.coupling.cols()) = log.coupling.row(r);
    coupling(r, coupling.cols() - 1) = log.misalignment[i] * 180.0 / M_PI;
  }
  io::write_table_csv(dir / "coupling.csv", header, coupling);

  std::vector<std::string> dheader{"t", "primitive"};
  for (Eigen::Index c = 0; c < log.deviation.cols(); ++c) dheader.push_back("ds_" + std::to_string(c + 1));
  Eigen::MatrixXd dev(rows, 2 + log.deviation.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    dev(r, 0) = log.t[static_cast<std::size_t>(r)];
    dev(r, 1) = log.primitive[static_cast<std::size_t>(r)];
  }
  dev.rightCols(log.deviation.cols()) = log.deviation;
  io::write_table_csv(dir / "deviation.csv", dheader, dev);

  const json j = {{"setting_deg", config.unroll_setting},
                  {"coupling", config.coupling},
                  {"model", config.coupling ? label : "none"},
                  {"final_error_deg", res.final_error_deg},
                  {"mean_abs_coupling", res.mean_abs_coupling},
                  {"output_dir", dir.string()}};
  io::write_text(dir / "summary.json", j.dump(2) + "\n");
  const std::string text = "setting " + io::setting_dir_name(config.unroll_setting) + " deg, coupling " +
                           (config.coupling ? "on" : "off") + ": final roll error " +
                           fmt("%.3f", res.final_error_deg) + " deg, mean |C| " + fmt("%.3f", res.mean_abs_coupling) +
                           " -> " + dir.string() + "\n";
  return output(text, j);
}

CommandOutput cmd_dominance(const PipelineConfig& config) {
  const std::string label = config.architectures.front().label();
  std::string text;
  json j = json::object();
  for (int stage : config.primitives) {
    check_stage(stage);
    const FeedbackModel model = io::read_feedback_model(config.feedback_dir() / label / (prim_name(stage) + ".json"));
    for (std::size_t m = 0; m < model.networks.size(); ++m) {
      const auto ranks = dominance_analysis(model, m);
      const auto width = static_cast<Eigen::Index>(ranks.front().size());
      std::vector<std::string> header{"kernel"};
      for (Eigen::Index r = 0; r < width; ++r) header.push_back("rank_" + std::to_string(r + 1));
      // top10: 1 when the row lists at least 10 features (the first 10 ranks are the dominant set).
      header.push_back("top10_count");
      Eigen::MatrixXd table(static_cast<Eigen::Index>(ranks.size()), width + 2);
      json rows = json::array();
      for (std::size_t k = 0; k < ranks.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        table(r, 0) = static_cast<double>(k + 1);
        for (Eigen::Index c = 0; c < width; ++c) table(r, c + 1) = static_cast<double>(ranks[k][static_cast<std::size_t>(c)]);
        table(r, width + 1) = static_cast<double>(std::min<Eigen::Index>(10, width));
        std::vector<Eigen::Index> top(ranks[k].begin(), ranks[k].begin() + std::min<Eigen::Index>(10, width));
        rows.push_back({{"kernel", k + 1}, {"top10", top}});
      }
      const std::string suffix = model.networks.size() > 1 ? "_C" + std::to_string(m + 1) : "";
      const fs::path path = config.report_dir() / ("dominance_" + prim_name(stage) + suffix + ".csv");
      io::write_table_csv(path, header, table);
      j[prim_name(stage) + suffix] = rows;
      text += prim_name(stage) + suffix + ": " + std::to_string(ranks.size()) + " kernels x " +
              std::to_string(width) + " ranked features -> " + path.string() + "\n";
    }
  }
  io::write_text(config.report_dir() / "dominance.json", j.dump(2) + "\n");
  return output(text, j);
}

}  // namespace fbmp
