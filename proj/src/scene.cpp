#include "scvae/scene.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace scvae {

const AgentTrack& Scene::agent(std::size_t agent_id) const {
  return agents[agent_pos(agent_id)];
}

std::size_t Scene::agent_pos(std::size_t agent_id) const {
  for (std::size_t i = 0; i < agents.size(); ++i)
    if (agents[i].id == agent_id) return i;
  throw std::invalid_argument("scene " + std::to_string(id) + " has no agent " +
                              std::to_string(agent_id));
}

namespace {

Point rotate(const Point& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p[0] - s * p[1], s * p[0] + c * p[1]};
}

// Applies p -> R(angle) * (p - t) to every coordinate in the scene.
Scene transform_scene(const Scene& in, const Point& t, double angle) {
  Scene out = in;
  auto map_pt = [&](Point& p) { p = rotate({p[0] - t[0], p[1] - t[1]}, angle); };
  for (auto& a : out.agents) {
    for (auto& p : a.history) map_pt(p);
    for (auto& p : a.future) map_pt(p);
  }
  if (!out.lanes.empty()) {
    std::vector<LaneSegment> segs = out.lanes.segments();
    for (auto& s : segs) {
      for (auto& p : s.centerline) map_pt(p);
      for (auto& p : s.left) map_pt(p);
      for (auto& p : s.right) map_pt(p);
    }
    out.lanes = LaneGraph(std::move(segs));
  }
  return out;
}

double target_heading(const AgentTrack& a) {
  std::vector<double> psi;
  for (std::size_t t = 1; t < a.history.size(); ++t) {
    const double dx = a.history[t][0] - a.history[t - 1][0];
    const double dy = a.history[t][1] - a.history[t - 1][1];
    if (std::hypot(dx, dy) < 1e-12) {
      if (!psi.empty()) psi.push_back(psi.back());  // hold through standstill
      continue;
    }
    psi.push_back(std::atan2(dy, dx));
  }
  return psi.empty() ? 0.0 : smooth_heading(psi);
}

}  // namespace

Scene normalize(const Scene& scene, std::size_t target_id) {
  if (scene.frame.applied)
    throw std::invalid_argument("scene " + std::to_string(scene.id) +
                                " is already normalized");
  const AgentTrack& tgt = scene.agent(target_id);
  if (tgt.history.size() < 2)
    throw std::invalid_argument("normalize: target needs at least 2 observed frames");

  Point origin;
  double heading = 0.0;
  if (scene.pedestrian_mode) {
    origin = {0.0, 0.0};
    for (const auto& a : scene.agents) {
      origin[0] += a.history.back()[0];
      origin[1] += a.history.back()[1];
    }
    origin[0] /= double(scene.agents.size());
    origin[1] /= double(scene.agents.size());
  } else {
    origin = tgt.history.back();
    heading = target_heading(tgt);
  }

  Scene out = transform_scene(scene, origin, -heading);
  out.target = target_id;
  out.frame = {origin[0], origin[1], heading, true};
  return out;
}

Scene denormalize(const Scene& scene) {
  if (!scene.frame.applied)
    throw std::invalid_argument("scene " + std::to_string(scene.id) +
                                " carries no normalization frame");
  // Invert p' = R(-rot)(p - t): first rotate back, then translate.
  Scene rotated = transform_scene(scene, {0.0, 0.0}, scene.frame.rot);
  Scene out = transform_scene(rotated, {-scene.frame.tx, -scene.frame.ty}, 0.0);
  out.frame = {};
  return out;
}

Scene rotate_scene(const Scene& scene, double angle) {
  Scene out = transform_scene(scene, {0.0, 0.0}, angle);
  out.frame.rot -= angle;  // keep denormalization exact
  return out;
}

Scene augment_rotate(const Scene& scene, std::uint64_t seed) {
  Rng rng(seed);
  return rotate_scene(scene, rng.uniform(0.0, 2.0 * M_PI));
}

// ---- serialization ----------------------------------------------------------

namespace {

nlohmann::json track_json(const std::vector<Point>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p[0], p[1]});
  return arr;
}

std::vector<Point> track_from(const nlohmann::json& arr) {
  std::vector<Point> pts;
  for (const auto& p : arr) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

nlohmann::json scene_json(const Scene& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["dt"] = s.dt;
  j["target"] = s.target;
  j["pedestrian"] = s.pedestrian_mode;
  j["frame"] = {{"tx", s.frame.tx},
                {"ty", s.frame.ty},
                {"rot", s.frame.rot},
                {"applied", s.frame.applied}};
  j["agents"] = nlohmann::json::array();
  for (const auto& a : s.agents)
    j["agents"].push_back({{"id", a.id},
                           {"history", track_json(a.history)},
                           {"future", track_json(a.future)}});
  j["lanes"] = s.lanes.empty() ? nlohmann::json() : nlohmann::json::parse(s.lanes.to_json());
  return j;
}

Scene scene_from(const nlohmann::json& j) {
  Scene s;
  s.id = j.at("id").get<std::size_t>();
  s.dt = j.at("dt").get<double>();
  s.target = j.at("target").get<std::size_t>();
  s.pedestrian_mode = j.at("pedestrian").get<bool>();
  const auto& f = j.at("frame");
  s.frame = {f.at("tx").get<double>(), f.at("ty").get<double>(),
             f.at("rot").get<double>(), f.at("applied").get<bool>()};
  for (const auto& ja : j.at("agents")) {
    AgentTrack a;
    a.id = ja.at("id").get<std::size_t>();
    a.history = track_from(ja.at("history"));
    a.future = track_from(ja.at("future"));
    if (a.history.size() < 2)
      throw std::invalid_argument("field 'history': needs at least 2 points");
    if (a.future.empty())
      throw std::invalid_argument("field 'future': needs at least 1 point");
    s.agents.push_back(std::move(a));
  }
  if (!j.at("lanes").is_null()) s.lanes = LaneGraph::from_json(j.at("lanes").dump());
  return s;
}

}  // namespace

std::string scene_to_json(const Scene& scene) { return scene_json(scene).dump(); }

Scene scene_from_json(const std::string& text) {
  return scene_from(nlohmann::json::parse(text));
}

void write_dataset(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  nlohmann::json header;
  header["format"] = "scene-dataset";
  header["version"] = 1;
  header["count"] = scenes.size();
  out << header.dump() << '\n';
  for (const auto& s : scenes) out << scene_json(s).dump() << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<Scene> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + " line 1: missing dataset header");
  std::size_t count = 0;
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("format") != "scene-dataset" || header.at("version") != 1)
      throw std::runtime_error("unsupported format/version");
    count = header.at("count").get<std::size_t>();
  } catch (const std::exception& e) {
    throw std::runtime_error(path + " line 1: bad header: " + e.what());
  }
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error(path + " line " + std::to_string(i + 2) +
                               ": truncated dataset (expected " +
                               std::to_string(count) + " scenes)");
    try {
      scenes.push_back(scene_from(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + " line " + std::to_string(i + 2) + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace scvae
