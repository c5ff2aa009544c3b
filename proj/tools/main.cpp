#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fbmp/errors.hpp"
#include "fbmp/io.hpp"
#include "fbmp/pipeline.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr std::uint64_t kBuiltinSeed = 20170529;

// Flags shared by every subcommand. Unset optionals fall back to the config file, then defaults.
struct Flags {
  std::string config_file;
  std::string profile;
  std::string workdir;
  std::string corpus;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> architectures;
  std::vector<int> primitives;
  std::optional<int> steps;
  std::optional<unsigned> threads;
  std::optional<int> holdout;
  std::optional<double> setting;
  std::string coupling;
  std::string velocities;
  std::string axes;
  bool force = false;
  bool json_output = false;
};

fbmp::TrainConfig train_from(const json& j, fbmp::TrainConfig t) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("learning_rate", t.learning_rate);
  get("decay", t.decay);
  get("epsilon", t.epsilon);
  get("batch_size", t.batch_size);
  get("max_steps", t.max_steps);
  get("dropout", t.dropout);
  get("check_interval", t.check_interval);
  if (j.contains("selection")) {
    const auto s = j.at("selection").get<std::string>();
    if (s == "generalization") t.selection = fbmp::Selection::generalization;
    else if (s == "validation") t.selection = fbmp::Selection::validation;
    else throw fbmp::ValidationError("train.selection must be 'generalization' or 'validation'");
  }
  return t;
}

std::uint64_t env_seed() {
  const char* text = std::getenv("FBMP_SEED");
  if (!text || !*text) return kBuiltinSeed;
  char* end = nullptr;
  const auto v = std::strtoull(text, &end, 10);
  if (*end != '\0') throw fbmp::ValidationError("FBMP_SEED must be a non-negative integer");
  return v;
}

fbmp::PipelineConfig build_config(const Flags& f) {
  json file = json::object();
  if (!f.config_file.empty()) {
    try {
      file = json::parse(fbmp::io::read_text(f.config_file));
    } catch (const json::exception& e) {
      throw fbmp::DataError(f.config_file + ": " + e.what());
    }
    if (!file.is_object()) throw fbmp::DataError(f.config_file + ": expected a JSON object");
  }
  fbmp::PipelineConfig c;
  try {
    const std::string profile = !f.profile.empty() ? f.profile : file.value("profile", std::string("default"));
    fbmp::SimulatorConfig base;
    if (profile == "tiny") base = fbmp::SimulatorConfig::tiny_profile();
    else if (profile != "default") throw fbmp::ValidationError("--profile must be 'tiny' or 'default'");

    std::uint64_t seed = f.seed ? *f.seed : file.contains("seed") ? file.at("seed").get<std::uint64_t>() : env_seed();
    json sim = json::parse(fbmp::io::simulator_config_json(base));
    if (file.contains("simulator")) sim.merge_patch(file.at("simulator"));
    if (!file.contains("simulator") || !file.at("simulator").contains("seed") || f.seed) sim["seed"] = seed;
    c.simulator = fbmp::io::simulator_config_from_json(sim.dump());

    c.workdir = !f.workdir.empty() ? f.workdir : file.value("workdir", std::string("fbmp_run"));
    c.corpus = !f.corpus.empty() ? f.corpus : file.value("corpus", std::string());
    if (file.contains("fit")) {
      const json& fit = file.at("fit");
      c.fit.n_basis = fit.value("n_basis", c.fit.n_basis);
      c.fit.ridge = fit.value("ridge", c.fit.ridge);
      c.fit.goal_evolution = fit.value("goal_evolution", c.fit.goal_evolution);
      c.fit.alpha_u = fit.value("alpha_u", c.fit.alpha_u);
    }
    c.velocities = fbmp::parse_velocity_source(
        !f.velocities.empty() ? f.velocities : file.value("velocities", std::string("recorded")));
    c.coupling_axes = !f.axes.empty() ? f.axes : file.value("coupling_axes", c.coupling_axes);
    if (!f.primitives.empty()) c.primitives = f.primitives;
    else if (file.contains("primitives")) c.primitives = file.at("primitives").get<std::vector<int>>();

    std::vector<std::string> archs = f.architectures;
    if (archs.empty() && file.contains("architectures")) archs = file.at("architectures").get<std::vector<std::string>>();
    if (!archs.empty()) {
      c.architectures.clear();
      for (const auto& a : archs) c.architectures.push_back(fbmp::ArchitectureSpec::parse(a));
    }

    if (file.contains("train")) c.train = train_from(file.at("train"), c.train);
    c.train.seed = seed;
    if (f.steps) c.train.max_steps = *f.steps;
    c.threads = f.threads ? *f.threads : file.value("threads", 1u);
    c.holdout_demo = f.holdout ? *f.holdout : file.value("holdout_demo", 0);
    c.unroll_setting = f.setting ? *f.setting : file.value("unroll_setting", 10.0);
    const std::string coupling = !f.coupling.empty() ? f.coupling : file.value("coupling", std::string("on"));
    if (coupling != "on" && coupling != "off") throw fbmp::ValidationError("--coupling must be 'on' or 'off'");
    c.coupling = coupling == "on";
    c.force = f.force;
  } catch (const json::exception& e) {
    throw fbmp::ValidationError(std::string("config: ") + e.what());
  }
  c.train.validate();
  c.fit.validate();
  for (const auto& a : c.architectures) a.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback models for movement primitives: data generation, learning and evaluation"};
  app.require_subcommand(1);
  Flags flags;

  app.add_option("--config", flags.config_file, "JSON experiment config; flags override its values");
  app.add_option("--profile", flags.profile, "Simulator profile: tiny | default");
  app.add_option("--workdir", flags.workdir, "Output root (corpus/, models/, datasets/, feedback/, reports/, unroll/)");
  app.add_option("--corpus", flags.corpus, "Corpus directory (default: <workdir>/corpus)");
  app.add_option("--seed", flags.seed, "Seed (default: $FBMP_SEED, else built-in)");
  app.add_flag("--json", flags.json_output, "Print the JSON summary instead of text");

  struct Command {
    CLI::App* app;
    fbmp::CommandOutput (*run)(const fbmp::PipelineConfig&);
  };
  std::vector<Command> commands;
  auto add = [&](const char* name, const char* help, fbmp::CommandOutput (*run)(const fbmp::PipelineConfig&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    commands.push_back({sub, run});
    return sub;
  };

  auto* gen = add("gen-data", "Simulate the demonstration corpus", fbmp::cmd_gen_data);
  gen->add_flag("--force", flags.force, "Replace an existing corpus");

  auto* nominal = add("learn-nominal", "Segment nominal demos and fit primitives and expected traces",
                      fbmp::cmd_learn_nominal);
  nominal->add_option("--velocities", flags.velocities, "recorded | finite_difference");

  auto* extract = add("extract-coupling", "Build coupling-target datasets for primitives 2 and 3",
                      fbmp::cmd_extract_coupling);
  extract->add_option("--velocities", flags.velocities, "recorded | finite_difference");
  extract->add_option("--axes", flags.axes, "roll | all");
  extract->add_option("--primitives", flags.primitives, "Primitive indices");

  auto* train = add("train", "Train feedback models on one split", fbmp::cmd_train);
  auto* loo = add("loo", "Leave-one-demonstration-out evaluation", fbmp::cmd_loo);
  for (auto* sub : {train, loo}) {
    sub->add_option("--arch", flags.architectures, "pmnn-100, pmnn-0, ffnn-100-25[-nophase], pca-pmnn");
    sub->add_option("--primitives", flags.primitives, "Primitive indices");
    sub->add_option("--steps", flags.steps, "Maximum training steps");
  }
  train->add_option("--holdout", flags.holdout, "Demo id held out for generalization");
  loo->add_option("--threads", flags.threads, "Worker threads for folds");

  auto* unroll = add("unroll", "Closed- or open-loop episode on the simulator", fbmp::cmd_unroll);
  unroll->add_option("--setting", flags.setting, "Board roll, degrees");
  unroll->add_option("--coupling", flags.coupling, "on | off");
  unroll->add_option("--arch", flags.architectures, "Feedback model to load");
  unroll->add_option("--primitives", flags.primitives, "Primitives receiving feedback");

  auto* dominance = add("dominance", "Rank regular hidden features per phase kernel", fbmp::cmd_dominance);
  dominance->add_option("--arch", flags.architectures, "Feedback model to analyse");
  dominance->add_option("--primitives", flags.primitives, "Primitive indices");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const fbmp::PipelineConfig config = build_config(flags);
    for (const auto& c : commands) {
      if (!c.app->parsed()) continue;
      const fbmp::CommandOutput out = c.run(config);
      std::cout << (flags.json_output ? out.json + "\n" : out.text);
    }
    return 0;
  } catch (const fbmp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fbmp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const fbmp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
