#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scvae/map.hpp"
#include "scvae/rng.hpp"

namespace scvae {

struct AgentTrack {
  std::size_t id = 0;
  std::vector<Point> history;  // T_h observed points
  std::vector<Point> future;   // T_p ground-truth points
};

// World-frame pose of a scene's local frame: local -> world is a rotation by
// `rot` followed by a translation by (tx, ty).
struct FrameTransform {
  double tx = 0.0;
  double ty = 0.0;
  double rot = 0.0;
  bool applied = false;
};

struct Scene {
  std::size_t id = 0;
  double dt = 0.1;
  std::size_t target = 0;  // agent id
  bool pedestrian_mode = false;
  std::vector<AgentTrack> agents;
  LaneGraph lanes;  // empty when the template has no map
  FrameTransform frame;

  const AgentTrack& agent(std::size_t agent_id) const;
  std::size_t agent_pos(std::size_t agent_id) const;  // index into agents
};

// Target-centric normalization for driving scenes: the target's last observed
// point moves to the origin and its smoothed heading to zero. Pedestrian
// scenes are translated to the mean last-observed position without rotation.
// The inverse transform is stored in the scene's frame metadata.
Scene normalize(const Scene& scene, std::size_t target_id);
Scene denormalize(const Scene& scene);

// Rotation about the frame origin; augment_rotate draws the angle uniformly
// from [0, 2*pi) (pedestrian-mode augmentation).
Scene rotate_scene(const Scene& scene, double angle);
Scene augment_rotate(const Scene& scene, std::uint64_t seed);

// Line-delimited JSON dataset with a versioned header record.
void write_dataset(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_dataset(const std::string& path);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

}  // namespace scvae
