#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "scvae/world.hpp"

using namespace scvae;

namespace {

std::string serialize_all(const std::vector<Scene>& scenes) {
  std::string out;
  for (const auto& s : scenes) out += scene_to_json(s) + "\n";
  return out;
}

std::vector<std::vector<double>> pairwise_distances(const Scene& s) {
  std::vector<Point> last;
  for (const auto& a : s.agents) last.push_back(a.history.back());
  std::vector<std::vector<double>> d(last.size(), std::vector<double>(last.size()));
  for (std::size_t i = 0; i < last.size(); ++i)
    for (std::size_t j = 0; j < last.size(); ++j)
      d[i][j] = std::hypot(last[i][0] - last[j][0], last[i][1] - last[j][1]);
  return d;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/scvae_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("generation is bit-identical per (template, count, seed)") {
  for (auto t : {Template::Merge, Template::Intersection, Template::OpenField}) {
    auto cfg = default_config(t);
    auto a = generate(cfg, 5, 42);
    auto b = generate(cfg, 5, 42);
    CHECK(serialize_all(a) == serialize_all(b));
    auto c = generate(cfg, 5, 43);
    CHECK(serialize_all(a) != serialize_all(c));
  }
}

TEST_CASE("scene dimensions follow the template config") {
  auto cfg = default_config(Template::Merge);
  for (const auto& s : generate(cfg, 10, 7)) {
    CHECK(s.dt == 0.1);
    CHECK(!s.lanes.empty());
    CHECK(!s.pedestrian_mode);
    CHECK(s.agents.size() >= 2);
    CHECK(s.agents.size() <= 4);
    for (const auto& a : s.agents) {
      CHECK(a.history.size() == 10);
      CHECK(a.future.size() == 30);
    }
  }
  auto ped = default_config(Template::OpenField);
  for (const auto& s : generate(ped, 5, 7)) {
    CHECK(s.dt == 0.4);
    CHECK(s.lanes.empty());
    CHECK(s.pedestrian_mode);
    for (const auto& a : s.agents) {
      CHECK(a.history.size() == 8);
      CHECK(a.future.size() == 12);
    }
  }
}

TEST_CASE("masking the leader's history shifts follower futures (merge)") {
  auto cert = interactivity_certificate(default_config(Template::Merge), 50, 11);
  CHECK(cert.pairs > 0);
  CHECK(cert.mean_fde_shift > 0.5);
}

TEST_CASE("masking the crosser's history shifts yielder futures (intersection)") {
  auto cert = interactivity_certificate(default_config(Template::Intersection), 50, 11);
  CHECK(cert.pairs > 0);
  CHECK(cert.mean_fde_shift > 0.5);
}

TEST_CASE("open-field agents are independent: certificate exactly zero") {
  auto cert = interactivity_certificate(default_config(Template::OpenField), 50, 11);
  CHECK(cert.mean_fde_shift == 0.0);
}

TEST_CASE("driving normalization puts the target at the origin with zero heading") {
  auto scenes = generate(default_config(Template::Merge), 5, 3);
  for (const auto& s : scenes) {
    Scene n = normalize(s, s.target);
    const auto& tgt = n.agent(s.target);
    CHECK(std::abs(tgt.history.back()[0]) < 1e-9);
    CHECK(std::abs(tgt.history.back()[1]) < 1e-9);
    // The smoothed heading of the normalized history is zero.
    std::vector<double> psi;
    for (std::size_t t = 1; t < tgt.history.size(); ++t)
      psi.push_back(std::atan2(tgt.history[t][1] - tgt.history[t - 1][1],
                               tgt.history[t][0] - tgt.history[t - 1][0]));
    CHECK(std::abs(smooth_heading(psi)) < 1e-9);
    CHECK(n.frame.applied);
  }
}

TEST_CASE("normalize then denormalize reproduces the original scene") {
  for (auto t : {Template::Merge, Template::Intersection, Template::OpenField}) {
    auto scenes = generate(default_config(t), 3, 5);
    for (const auto& s : scenes) {
      Scene back = denormalize(normalize(s, s.target));
      REQUIRE(back.agents.size() == s.agents.size());
      for (std::size_t i = 0; i < s.agents.size(); ++i) {
        for (std::size_t k = 0; k < s.agents[i].history.size(); ++k) {
          CHECK(std::abs(back.agents[i].history[k][0] - s.agents[i].history[k][0]) < 1e-9);
          CHECK(std::abs(back.agents[i].history[k][1] - s.agents[i].history[k][1]) < 1e-9);
        }
        for (std::size_t k = 0; k < s.agents[i].future.size(); ++k) {
          CHECK(std::abs(back.agents[i].future[k][0] - s.agents[i].future[k][0]) < 1e-9);
          CHECK(std::abs(back.agents[i].future[k][1] - s.agents[i].future[k][1]) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("pedestrian normalization centers the mean last observed position") {
  auto scenes = generate(default_config(Template::OpenField), 5, 9);
  for (const auto& s : scenes) {
    Scene n = normalize(s, s.target);
    double mx = 0, my = 0;
    for (const auto& a : n.agents) {
      mx += a.history.back()[0];
      my += a.history.back()[1];
    }
    CHECK(std::abs(mx / double(n.agents.size())) < 1e-9);
    CHECK(std::abs(my / double(n.agents.size())) < 1e-9);
    CHECK(n.frame.rot == 0.0);  // no rotation in pedestrian mode
  }
}

TEST_CASE("normalize rejects missing targets and double application") {
  auto s = generate(default_config(Template::Merge), 1, 1)[0];
  CHECK_THROWS_AS(normalize(s, 999), std::invalid_argument);
  Scene n = normalize(s, s.target);
  CHECK_THROWS_AS(normalize(n, s.target), std::invalid_argument);
  CHECK_THROWS_AS(denormalize(s), std::invalid_argument);
}

TEST_CASE("rotation augmentation: identity at zero, isometry otherwise") {
  auto s = normalize(generate(default_config(Template::OpenField), 1, 13)[0], 0);
  CHECK(scene_to_json(rotate_scene(s, 0.0)) == scene_to_json(s));

  auto d0 = pairwise_distances(s);
  auto r1 = augment_rotate(s, 100);
  auto r2 = augment_rotate(s, 200);
  CHECK(scene_to_json(r1) != scene_to_json(r2));  // different angles
  for (const auto* r : {&r1, &r2}) {
    auto d = pairwise_distances(*r);
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = 0; j < d.size(); ++j)
        CHECK(std::abs(d[i][j] - d0[i][j]) < 1e-9);
  }

  // The adjusted frame keeps denormalization exact.
  Scene back = denormalize(r1);
  const auto& orig = denormalize(s);
  for (std::size_t i = 0; i < orig.agents.size(); ++i)
    for (std::size_t k = 0; k < orig.agents[i].history.size(); ++k)
      CHECK(std::abs(back.agents[i].history[k][0] - orig.agents[i].history[k][0]) < 1e-9);
}

TEST_CASE("dataset round trip") {
  TempFile f("roundtrip.jsonl");
  auto scenes = generate(default_config(Template::Merge), 4, 21);
  write_dataset(f.path, scenes);
  auto back = read_dataset(f.path);
  CHECK(serialize_all(back) == serialize_all(scenes));
}

TEST_CASE("empty dataset round trips through a valid header") {
  TempFile f("empty.jsonl");
  write_dataset(f.path, {});
  CHECK(read_dataset(f.path).empty());
}

TEST_CASE("truncated dataset errors with the line number") {
  TempFile f("trunc.jsonl");
  auto scenes = generate(default_config(Template::Merge), 3, 22);
  write_dataset(f.path, scenes);
  // Drop the last line.
  std::ifstream in(f.path);
  std::string all, line;
  int kept = 0;
  while (std::getline(in, line) && kept < 3) {
    all += line + "\n";
    ++kept;
  }
  in.close();
  std::ofstream(f.path) << all;
  try {
    read_dataset(f.path);
    FAIL("expected a truncation error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("malformed record errors name line and field") {
  TempFile f("malformed.jsonl");
  std::ofstream(f.path)
      << R"({"format":"scene-dataset","version":1,"count":1})" << "\n"
      << R"({"id":0,"dt":0.1,"target":0,"pedestrian":false,)"
         R"("frame":{"tx":0,"ty":0,"rot":0,"applied":false},)"
         R"("agents":[{"id":0,"history":[[0,0]],"future":[[1,0]]}],"lanes":null})"
      << "\n";
  try {
    read_dataset(f.path);
    FAIL("expected a field error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("history") != std::string::npos);
  }
}

TEST_CASE("invalid configs are rejected") {
  auto cfg = default_config(Template::Merge);
  cfg.reaction_delay = 0;
  CHECK_THROWS_AS(generate(cfg, 1, 0), std::invalid_argument);
  cfg = default_config(Template::Merge);
  cfg.t_p = 0;
  CHECK_THROWS_AS(generate(cfg, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate(default_config(Template::Merge), 0, 0),
                  std::invalid_argument);
}
