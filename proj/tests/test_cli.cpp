#include <doctest.h>

#include <fstream>

#include "radap/cli/stages.hpp"

using namespace radap;

namespace {

std::filesystem::path write_config(const nlohmann::json& j, const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "radap_cli_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("default config is valid") {
  const auto path = write_config(cli::default_config_json(), "default.json");
  CHECK(cli::validate_config(path).empty());
  const cli::RunConfig cfg = cli::parse_config(path);
  CHECK(cfg.seed == 7);
  CHECK(cfg.evaluate.masks.size() == 5);
}

TEST_CASE("unknown keys are named") {
  nlohmann::json j = cli::default_config_json();
  j["train_fr"]["learning_rate_typo"] = 0.5;
  const auto path = write_config(j, "unknown.json");
  const auto problems = cli::validate_config(path);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("learning_rate_typo") != std::string::npos);
}

TEST_CASE("inverted area range is rejected") {
  nlohmann::json j = cli::default_config_json();
  j["mask"]["area"] = {0.5, 0.3};
  const auto path = write_config(j, "area.json");
  const auto problems = cli::validate_config(path);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("area_range") != std::string::npos);
}

TEST_CASE("negative EBCE beta is rejected with a message") {
  nlohmann::json j = cli::default_config_json();
  j["train_segmenter"]["beta"] = -1.0;
  const auto path = write_config(j, "beta.json");
  const auto problems = cli::validate_config(path);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("beta") != std::string::npos);
}

TEST_CASE("parse errors carry a location") {
  const auto dir = std::filesystem::temp_directory_path() / "radap_cli_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "broken.json";
  std::ofstream(path) << "{ \"seed\": 3, ";
  const auto problems = cli::validate_config(path);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("byte") != std::string::npos);
}

TEST_CASE("missing seed is rejected") {
  nlohmann::json j = cli::default_config_json();
  j.erase("seed");
  const auto path = write_config(j, "noseed.json");
  CHECK_FALSE(cli::validate_config(path).empty());
}

TEST_CASE("stage names parse; unknown stage rejected") {
  CHECK(cli::stage_from_name("train-fr") == cli::Stage::train_fr);
  CHECK(cli::stage_from_name("gen-fpatch") == cli::Stage::gen_fpatch);
  CHECK_THROWS_AS(cli::stage_from_name("wat"), ValidationError);
}

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code_for(ValidationError("x")) == 2);
  CHECK(cli::exit_code_for(ConfigError("x")) == 2);
  CHECK(cli::exit_code_for(ParameterError("x")) == 2);
  CHECK(cli::exit_code_for(DependencyError("x")) == 3);
  CHECK(cli::exit_code_for(IoError("x")) == 4);
  CHECK(cli::exit_code_for(std::runtime_error("x")) == 4);
}

TEST_CASE("stages demand upstream artifacts in order") {
  nlohmann::json j = cli::default_config_json();
  const auto root = std::filesystem::temp_directory_path() / "radap_cli_stage_test";
  std::filesystem::remove_all(root);
  j["artifact_dir"] = (root / "artifacts").string();
  const cli::RunConfig cfg = cli::parse_config_json(j);

  CHECK_THROWS_AS(cli::run_stage(cli::Stage::train_segmenter, cfg), DependencyError);
  CHECK_THROWS_AS(cli::run_stage(cli::Stage::gen_fpatch, cfg), DependencyError);
  CHECK_THROWS_AS(cli::run_stage(cli::Stage::evaluate, cfg), DependencyError);
  CHECK_THROWS_AS(cli::run_stage(cli::Stage::plot, cfg), DependencyError);
}

TEST_CASE("micro pipeline: all stages run in order") {
  nlohmann::json j = cli::default_config_json();
  const auto root = std::filesystem::temp_directory_path() / "radap_cli_pipeline_test";
  std::filesystem::remove_all(root);
  j["artifact_dir"] = (root / "artifacts").string();
  j["seed"] = 3;
  j["dataset"] = {{"kind", "procedural"}, {"height", 16},          {"width", 16},
                  {"identities", 3},      {"images_per_identity", 6}, {"train_fraction", 0.67}};
  j["mask"]["height"] = 16;
  j["mask"]["width"] = 16;
  j["train_fr"]["epochs"] = 2;
  j["train_fr"]["batch_size"] = 6;
  j["train_fr"]["widths"] = {4, 6};
  j["gen_fpatch"]["count"] = 6;
  j["gen_fpatch"]["t_max"] = 3;
  j["train_segmenter"]["epochs"] = 2;
  j["train_segmenter"]["widths"] = {4, 6, 8};
  j["attack"]["steps"] = 3;
  j["evaluate"] = {{"defenses", {"undefended", "ours-"}},
                   {"masks", {"sticker"}},
                   {"attacks", {"clean"}},
                   {"images_per_cell", 3},
                   {"steps", 2}};
  const cli::RunConfig cfg = cli::parse_config_json(j);

  cli::StageOverrides ov;
  ov.threads = 2;
  cli::run_stage(cli::Stage::mask, cfg, ov);
  cli::run_stage(cli::Stage::train_fr, cfg, ov);
  cli::run_stage(cli::Stage::gen_fpatch, cfg, ov);
  cli::run_stage(cli::Stage::train_segmenter, cfg, ov);
  cli::run_stage(cli::Stage::attack, cfg, ov);
  cli::run_stage(cli::Stage::defend, cfg, ov);
  cli::run_stage(cli::Stage::evaluate, cfg, ov);
  cli::run_stage(cli::Stage::plot, cfg, ov);

  const auto artifacts = root / "artifacts";
  CHECK(std::filesystem::exists(artifacts / "mask" / "mask_000.pgm"));
  CHECK(std::filesystem::exists(artifacts / "train-fr" / "model.ckpt"));
  CHECK(std::filesystem::exists(artifacts / "train-fr" / "manifest.json"));
  CHECK(std::filesystem::exists(artifacts / "gen-fpatch" / "samples" / "manifest.json"));
  CHECK(std::filesystem::exists(artifacts / "train-segmenter" / "segmenter.ckpt"));
  CHECK(std::filesystem::exists(artifacts / "attack" / "attacked.ppm"));
  CHECK(std::filesystem::exists(artifacts / "defend" / "report.json"));
  CHECK(std::filesystem::exists(artifacts / "evaluate" / "report.jsonl"));
  CHECK(std::filesystem::exists(artifacts / "evaluate" / "summary.txt"));

  // manifests embed the config snapshot
  std::ifstream mf(artifacts / "train-fr" / "manifest.json");
  const nlohmann::json manifest = nlohmann::json::parse(mf);
  CHECK(manifest.at("stage") == "train-fr");
  CHECK(manifest.at("config").at("seed") == 3);
}
