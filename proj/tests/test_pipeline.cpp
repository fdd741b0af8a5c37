#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scvae/checkpoint.hpp"
#include "scvae/pipeline.hpp"

using namespace scvae;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "scvae_pipeline_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

VariantConfig tiny(Variant v = Variant::Cvae) {
  VariantConfig cfg;
  cfg.variant = v;
  cfg.hidden = 16;
  cfg.latent = 4;
  cfg.alpha = v == Variant::SocialCvae ? 0.3 : 0.0;
  cfg.lanelet_points = 4;
  return cfg;
}

TrainConfig smoke_tcfg() {
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 4;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("gen-data: idempotent file output plus certificate") {
  TempDir dir;
  const std::string out = dir / "merge.jsonl";
  auto r1 = run_gen_data(Template::Merge, 6, 7, out);
  CHECK(r1.count == 6);
  CHECK(r1.certificate.mean_fde_shift > 0.5);
  const std::string bytes = read_file(out);
  CHECK(read_dataset(out).size() == 6);

  auto r2 = run_gen_data(Template::Merge, 6, 7, out);
  CHECK(read_file(out) == bytes);
  CHECK(r2.certificate.mean_fde_shift == r1.certificate.mean_fde_shift);

  CHECK_THROWS_AS(run_gen_data(Template::Merge, 0, 7, out), std::invalid_argument);
  CHECK(!fs::exists(out + ".tmp"));  // atomic writes leave no droppings
}

TEST_CASE("train runs seeded trials and reruns byte-identically") {
  TempDir dir;
  const std::string data = dir / "data.jsonl";
  run_gen_data(Template::Merge, 6, 3, data);

  auto report = run_train(data, tiny(), smoke_tcfg(), 2, dir / "run");
  REQUIRE(report.final_checkpoints.size() == 2);
  for (int t = 0; t < 2; ++t) {
    const std::string stem = (dir / "run") + "/trial" + std::to_string(t);
    CHECK(fs::exists(stem + ".final.ckpt"));
    CHECK(fs::exists(stem + ".best.ckpt"));
    CHECK(fs::exists(stem + ".loss.tsv"));
  }
  // Different trials start from different seeds.
  CHECK(read_file(report.final_checkpoints[0]) !=
        read_file(report.final_checkpoints[1]));

  const std::string bytes = read_file(report.final_checkpoints[0]);
  run_train(data, tiny(), smoke_tcfg(), 2, dir / "run");
  CHECK(read_file(report.final_checkpoints[0]) == bytes);

  Model loaded = load_checkpoint(report.final_checkpoints[0]);
  CHECK(loaded.config().hidden == 16);

  CHECK_THROWS_AS(run_train(data, tiny(), smoke_tcfg(), 0, dir / "run"),
                  std::invalid_argument);
}

TEST_CASE("evaluate writes metrics, summaries, and AR curves deterministically") {
  TempDir dir;
  const std::string data = dir / "data.jsonl";
  run_gen_data(Template::Merge, 5, 11, data);
  auto trained = run_train(data, tiny(), smoke_tcfg(), 2, dir / "run");

  auto report = run_evaluate(data, trained.final_checkpoints, {1, 6}, 9, dir / "eval");
  REQUIRE(report.rows.size() == 2);
  REQUIRE(report.summaries.size() == 1);  // one (variant, aggregator) group
  CHECK(fs::exists(dir / "eval/metrics.tsv"));
  CHECK(fs::exists(dir / "eval/summary_cvae_entmax.tsv"));
  CHECK(fs::exists(dir / "eval/ar_delta_cvae_entmax.tsv"));

  const std::string bytes = read_file(dir / "eval/metrics.tsv");
  run_evaluate(data, trained.final_checkpoints, {1, 6}, 9, dir / "eval");
  CHECK(read_file(dir / "eval/metrics.tsv") == bytes);

  CHECK_THROWS_AS(run_evaluate(data, trained.final_checkpoints, {3}, 9, dir / "eval"),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_evaluate(data, trained.final_checkpoints, {}, 9, dir / "eval"),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_evaluate(data, {}, {1}, 9, dir / "eval"), std::invalid_argument);
  CHECK_THROWS_AS(run_evaluate(data, {dir / "missing.ckpt"}, {1}, 9, dir / "eval"),
                  std::runtime_error);
}

TEST_CASE("evaluate rejects horizon mismatches inside the dataset") {
  TempDir dir;
  auto cfg = default_config(Template::Merge);
  cfg.min_agents = cfg.max_agents = 2;
  auto scenes = generate(cfg, 2, 4);
  scenes[1].agents[scenes[1].agent_pos(scenes[1].target)].future.pop_back();
  const std::string data = dir / "bad.jsonl";
  write_dataset(data, scenes);

  Model model(tiny(), 2);
  const std::string ckpt = dir / "m.ckpt";
  save_checkpoint(ckpt, model);
  try {
    run_evaluate(data, {ckpt}, {1}, 0, dir / "eval");
    FAIL("expected a horizon mismatch rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("horizon") != std::string::npos);
  }
}

TEST_CASE("diagnose writes the per-scene table and validates metric names") {
  TempDir dir;
  const std::string data = dir / "data.jsonl";
  run_gen_data(Template::Merge, 3, 6, data);
  Model model(tiny(), 8);
  const std::string ckpt = dir / "m.ckpt";
  save_checkpoint(ckpt, model);

  const std::string out = dir / "diag.tsv";
  run_diagnose(data, ckpt, {"ar", "taug", "looade"}, out);
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "scene\tar_pct\ttau_g\tloo_ade");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);

  CHECK_THROWS_AS(run_diagnose(data, ckpt, {"fde"}, out), std::invalid_argument);
  CHECK_THROWS_AS(run_diagnose(data, ckpt, {}, out), std::invalid_argument);
}

TEST_CASE("diagnose refuses the agent ratio under max aggregation") {
  TempDir dir;
  const std::string data = dir / "data.jsonl";
  run_gen_data(Template::Merge, 2, 6, data);
  auto cfg = tiny();
  cfg.aggregator = Aggregator::Max;
  Model model(cfg, 8);
  const std::string ckpt = dir / "max.ckpt";
  save_checkpoint(ckpt, model);

  try {
    run_diagnose(data, ckpt, {"ar"}, dir / "diag.tsv");
    FAIL("expected an explicit refusal");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("max aggregation") != std::string::npos);
  }
  // The other diagnostics remain available.
  run_diagnose(data, ckpt, {"taug", "looade"}, dir / "diag.tsv");
  CHECK(fs::exists(dir / "diag.tsv"));
}
