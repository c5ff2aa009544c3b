#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fbmp/errors.hpp"
#include "fbmp/io.hpp"
#include "fbmp/pipeline.hpp"
#include "json.hpp"

using namespace fbmp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("fbmp_test_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

PipelineConfig tiny_config(const fs::path& workdir) {
  PipelineConfig c;
  c.workdir = workdir;
  c.simulator = SimulatorConfig::tiny_profile();
  c.train.max_steps = 100;
  return c;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("pipeline on the tiny profile") {
  TempDir dir("pipeline");
  PipelineConfig cfg = tiny_config(dir.path);

  cmd_gen_data(cfg);
  std::size_t demos = 0;
  for (const auto& e : fs::recursive_directory_iterator(cfg.corpus_dir())) demos += e.path().filename() == "pose.csv";
  CHECK(demos == 12);
  CHECK(first_line(cfg.corpus_dir() / "0" / "demo_0" / "pose.csv").rfind("t,", 0) == 0);

  SUBCASE("regeneration is byte-identical and guarded") {
    const std::string before = io::read_text(cfg.corpus_dir() / "5" / "demo_2" / "tactile.csv");
    CHECK_THROWS_AS(cmd_gen_data(cfg), ValidationError);
    cfg.force = true;
    cmd_gen_data(cfg);
    CHECK(io::read_text(cfg.corpus_dir() / "5" / "demo_2" / "tactile.csv") == before);
  }

  cmd_learn_nominal(cfg);
  for (int k = 1; k <= 3; ++k) CHECK(fs::exists(cfg.model_dir() / ("prim" + std::to_string(k) + ".json")));

  cmd_extract_coupling(cfg);
  const CouplingDataset prim2 = io::read_dataset_csv(cfg.dataset_dir() / "prim2.csv");
  const CouplingDataset prim3 = io::read_dataset_csv(cfg.dataset_dir() / "prim3.csv");
  CHECK(first_line(cfg.dataset_dir() / "prim2.csv") == "demo_id,setting,p,u,ds_1,ds_2,ds_3,ds_4,ds_5,ds_6,ds_7,ds_8,C_1");
  CHECK(!fs::exists(cfg.dataset_dir() / "prim1.csv"));
  const NominalSkill skill = io::read_skill(cfg.model_dir());
  std::size_t expected_rows = 0;
  for (const auto& d : load_corpus(cfg.corpus_dir(), cfg.velocities)) {
    expected_rows += d.orientation[1].size() + d.orientation[2].size();
  }
  CHECK(prim2.rows() + prim3.rows() == expected_rows);
  for (std::size_t i = 0; i < prim2.rows(); ++i) {
    if (prim2.setting[i] == 0.0) CHECK(std::abs(prim2.c(static_cast<Eigen::Index>(i), 0)) < 1e-6);
  }

  cmd_train(cfg);
  const fs::path model_file = cfg.feedback_dir() / "pmnn-100" / "prim2.json";
  CHECK(fs::exists(model_file));
  CHECK(fs::exists(cfg.feedback_dir() / "pmnn-100" / "prim2_curve.csv"));

  SUBCASE("training is reproducible to the byte") {
    const std::string first = io::read_text(model_file);
    cmd_train(cfg);
    CHECK(io::read_text(model_file) == first);
  }
  SUBCASE("model files round trip") {
    const FeedbackModel m = io::read_feedback_model(model_file);
    CHECK(io::feedback_model_json(io::feedback_model_from_json(io::feedback_model_json(m))) == io::feedback_model_json(m));
    const Eigen::MatrixXd a = predict_coupling(m, prim2);
    const Eigen::MatrixXd b = predict_coupling(io::read_feedback_model(model_file), prim2);
    CHECK(a == b);
  }
  SUBCASE("unroll with and without feedback") {
    cfg.coupling = false;
    cmd_unroll(cfg);
    const auto off = nlohmann::json::parse(io::read_text(cfg.unroll_dir() / "10_off" / "summary.json"));
    CHECK(off.at("final_error_deg").get<double>() == doctest::Approx(10.0).epsilon(0.02));
    cfg.coupling = true;
    cmd_unroll(cfg);
    const fs::path on = cfg.unroll_dir() / "10_on";
    for (const char* f : {"coupling.csv", "deviation.csv", "pose.csv", "orientation.csv", "tactile.csv"}) {
      CHECK(fs::exists(on / f));
    }
    std::ifstream in(on / "coupling.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header.rfind("t,primitive,p,u,C_1", 0) == 0);
    // The coupling trace starts at exactly zero.
    const auto fields = [&] {
      std::vector<std::string> out;
      std::stringstream ss(row);
      for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
      return out;
    }();
    CHECK(std::stod(fields[4]) == 0.0);
  }
  SUBCASE("dominance needs a regular hidden layer") {
    cmd_dominance(cfg);
    CHECK(fs::exists(cfg.report_dir() / "dominance_prim2.csv"));
    cfg.architectures = {ArchitectureSpec::pmnn({})};
    cfg.primitives = {2};
    cmd_train(cfg);
    CHECK_THROWS_AS(cmd_dominance(cfg), ValidationError);
  }
  SUBCASE("loo report") {
    cfg.primitives = {2};
    cfg.train.max_steps = 20;
    const CommandOutput out = cmd_loo(cfg);
    for (const char* col : {"Training", "Validation", "Testing", "Generalization"}) {
      CHECK(out.text.find(col) != std::string::npos);
    }
    const auto j = nlohmann::json::parse(out.json);
    CHECK(j.is_array());
    CHECK(fs::exists(cfg.report_dir() / "loo.json"));
  }
}

TEST_CASE("command preconditions") {
  TempDir dir("preconditions");
  PipelineConfig cfg = tiny_config(dir.path);
  CHECK_THROWS_AS(cmd_learn_nominal(cfg), DataError);
  CHECK_THROWS_AS(cmd_extract_coupling(cfg), DataError);

  SUBCASE("a non-corpus directory is never cleared") {
    fs::create_directories(cfg.corpus_dir());
    io::write_text(cfg.corpus_dir() / "notes.txt", "keep me");
    cfg.force = true;
    CHECK_THROWS_AS(cmd_gen_data(cfg), DataError);
    CHECK(fs::exists(cfg.corpus_dir() / "notes.txt"));
  }
  SUBCASE("missing corrected settings") {
    cfg.simulator.settings = {0.0};
    cmd_gen_data(cfg);
    cmd_learn_nominal(cfg);
    CHECK_THROWS_AS(cmd_extract_coupling(cfg), DataError);
  }
}

TEST_CASE("file formats") {
  TempDir dir("formats");
  SUBCASE("dataset csv") {
    CouplingDataset d;
    d.demo_id = {0, 1};
    d.setting = {2.5, 10.0};
    d.p = Eigen::Vector2d(1.0, 0.1);
    d.u = Eigen::Vector2d(0.0, -0.3);
    d.ds = Eigen::MatrixXd::Random(2, 3);
    d.c = Eigen::MatrixXd::Random(2, 1);
    io::write_dataset_csv(dir.path / "d.csv", d);
    const CouplingDataset r = io::read_dataset_csv(dir.path / "d.csv");
    CHECK(r.demo_id == d.demo_id);
    CHECK(r.setting == d.setting);
    CHECK(r.ds == d.ds);
    CHECK(r.c == d.c);
    CHECK(r.u == d.u);
  }
  SUBCASE("malformed inputs") {
    io::write_text(dir.path / "bad.csv", "demo_id,setting,p,u,C_1\n0,0,1,0,x\n");
    CHECK_THROWS_AS(io::read_dataset_csv(dir.path / "bad.csv"), DataError);
    io::write_text(dir.path / "bad.json", "{");
    CHECK_THROWS_AS(io::read_feedback_model(dir.path / "bad.json"), DataError);
    CHECK_THROWS_AS(io::read_text(dir.path / "missing.txt"), DataError);
  }
  SUBCASE("simulator config accepts partial documents") {
    const SimulatorConfig c = io::simulator_config_from_json(R"({"channels": 5, "settings": [0, 3]})");
    CHECK(c.channels == 5);
    CHECK(c.settings == std::vector<double>{0.0, 3.0});
    CHECK(c.demos_per_setting == SimulatorConfig{}.demos_per_setting);
    CHECK_THROWS_AS(io::simulator_config_from_json(R"({"channels": 0})"), ValidationError);
  }
  CHECK(io::setting_dir_name(7.5) == "7.5");
  CHECK(io::setting_dir_name(10.0) == "10");
}
