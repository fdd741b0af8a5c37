#include "scvae/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scvae {

const char* to_string(Template t) {
  switch (t) {
    case Template::Merge: return "merge";
    case Template::Intersection: return "intersection";
    case Template::OpenField: return "open-field";
  }
  return "?";
}

Template template_from_string(const std::string& s) {
  if (s == "merge") return Template::Merge;
  if (s == "intersection") return Template::Intersection;
  if (s == "open-field") return Template::OpenField;
  throw std::invalid_argument("unknown template '" + s + "'");
}

void ScenarioConfig::validate() const {
  if (t_h < 2 || t_p < 1)
    throw std::invalid_argument("scenario needs t_h >= 2 and t_p >= 1");
  if (min_agents < 1 || min_agents > max_agents)
    throw std::invalid_argument("scenario needs 1 <= min_agents <= max_agents");
  if (tmpl != Template::OpenField && (reaction_delay < 1 || min_agents < 2))
    throw std::invalid_argument(
        "interactive templates need reaction_delay >= 1 and >= 2 agents");
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
}

ScenarioConfig default_config(Template t) {
  ScenarioConfig cfg;
  cfg.tmpl = t;
  switch (t) {
    case Template::Merge:
      cfg.min_agents = 2;
      cfg.max_agents = 4;
      break;
    case Template::Intersection:
      cfg.min_agents = 2;
      cfg.max_agents = 3;
      break;
    case Template::OpenField:
      // Pedestrian-style timing: 3.2 s observed / 4.8 s predicted.
      cfg.min_agents = 2;
      cfg.max_agents = 5;
      cfg.t_h = 8;
      cfg.t_p = 12;
      cfg.dt = 0.4;
      break;
  }
  return cfg;
}

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Everything sampled for one scene, so trajectories are pure functions of the
// plan and the masking oracle can re-run them with edited inputs.
struct ScenePlan {
  std::size_t n = 0;
  std::vector<double> v0;                     // initial speed per agent
  std::vector<double> s0;                     // initial arc position per agent
  std::vector<double> gap0;                   // desired gap behind the leader
  std::vector<std::vector<double>> noise;     // accel noise per agent per frame
  std::size_t brake_at = 0;                   // leader slowdown event
  std::size_t brake_dur = 0;
  double brake_a = 0.0;
  double merge_offset = 0.0;                  // lateral start of the ramp agent
  long cross_jitter = 0;                      // shifts the conflict-clearing frame
  // open-field motion
  std::vector<Point> of_start;
  std::vector<double> of_speed, of_heading, of_turn;
};

ScenePlan sample_plan(const ScenarioConfig& cfg, Rng& rng) {
  ScenePlan p;
  p.n = cfg.min_agents + rng.next_u64() % (cfg.max_agents - cfg.min_agents + 1);
  const std::size_t T = cfg.t_h + cfg.t_p;
  for (std::size_t i = 0; i < p.n; ++i) {
    p.v0.push_back(rng.uniform(8.0, 12.0));
    p.gap0.push_back(rng.uniform(9.0, 13.0));
    std::vector<double> nz(T, 0.0);
    for (double& v : nz) v = rng.normal() * cfg.noise_scale;
    p.noise.push_back(nz);
    p.of_start.push_back({rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)});
    p.of_speed.push_back(rng.uniform(0.6, 1.8));
    p.of_heading.push_back(rng.uniform(0.0, 2.0 * M_PI));
    p.of_turn.push_back(rng.uniform(-0.08, 0.08));
  }
  p.s0.push_back(0.0);
  for (std::size_t i = 1; i < p.n; ++i)
    p.s0.push_back(p.s0[i - 1] - p.gap0[i] - rng.uniform(0.0, 3.0));
  p.brake_at = 2 + rng.next_u64() % (cfg.t_h + cfg.t_p / 2);
  p.brake_dur = 4 + rng.next_u64() % 5;
  p.brake_a = rng.uniform(-3.5, -1.5);
  p.merge_offset = rng.uniform(3.0, 4.0);
  p.cross_jitter = long(rng.next_u64() % 6) - 2;
  return p;
}

// Free-driving profile with one slowdown/recovery event.
std::vector<double> lead_arc(const ScenarioConfig& cfg, const ScenePlan& p,
                             std::size_t agent) {
  const std::size_t T = cfg.t_h + cfg.t_p;
  std::vector<double> s(T);
  double v = p.v0[agent], x = p.s0[agent];
  s[0] = x;
  for (std::size_t t = 1; t < T; ++t) {
    double a = p.noise[agent][t];
    if (t >= p.brake_at && t < p.brake_at + p.brake_dur) a += p.brake_a;
    else if (t >= p.brake_at + p.brake_dur && t < p.brake_at + 2 * p.brake_dur)
      a -= p.brake_a;
    v = clamp(v + cfg.dt * a, 0.0, 25.0);
    x += cfg.dt * v;
    s[t] = x;
  }
  return s;
}

// Delayed car following: the acceleration at frame t reads the leader's arc
// position `reaction_delay` frames in the past, so the leader's observed
// history shapes the follower's future.
void follower_arc(const ScenarioConfig& cfg, const ScenePlan& p, std::size_t agent,
                  const std::vector<double>& leader, std::size_t start,
                  std::vector<double>& s, std::vector<double>& v) {
  const std::size_t T = cfg.t_h + cfg.t_p;
  s.resize(T);
  v.resize(T);
  if (start == 1) {
    s[0] = p.s0[agent];
    v[0] = p.v0[agent];
  }
  for (std::size_t t = std::max<std::size_t>(start, 1); t < T; ++t) {
    const std::size_t tl = t - 1 >= cfg.reaction_delay ? t - 1 - cfg.reaction_delay : 0;
    const double gap = leader[tl] - s[t - 1];
    const double vlead = tl == 0 ? v[t - 1]
                                 : (leader[tl] - leader[tl - 1]) / cfg.dt;
    double a = cfg.follow_gain * 0.3 * (gap - p.gap0[agent]) +
               cfg.speed_gain * (vlead - v[t - 1]) + p.noise[agent][t];
    a = clamp(a, -6.0, 4.0);
    v[t] = clamp(v[t - 1] + cfg.dt * a, 0.0, 25.0);
    s[t] = s[t - 1] + cfg.dt * v[t];
  }
}

std::vector<Point> embed_merge(const ScenePlan& p, std::size_t agent,
                               const std::vector<double>& s) {
  // Agent 1 joins from the ramp; its lateral offset decays toward the lane.
  std::vector<Point> pts(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    double y = 0.0;
    if (agent == 1) y = p.merge_offset * std::exp(-0.12 * double(t));
    pts[t] = {s[t], y};
  }
  return pts;
}

LaneGraph merge_map() {
  auto lane = [](std::size_t id, Point a, Point b) {
    LaneSegment s;
    s.id = id;
    s.centerline = {a, b};
    s.left = {{a[0], a[1] + 2.0}, {b[0], b[1] + 2.0}};
    s.right = {{a[0], a[1] - 2.0}, {b[0], b[1] - 2.0}};
    return s;
  };
  auto m1 = lane(0, {-80.0, 0.0}, {40.0, 0.0});
  auto m2 = lane(1, {40.0, 0.0}, {200.0, 0.0});
  auto ramp = lane(2, {-80.0, 3.5}, {40.0, 3.5});
  m1.successors.push_back(1);
  m2.predecessors.push_back(0);
  ramp.successors.push_back(1);
  m2.predecessors.push_back(2);
  m1.adjacent.push_back(2);
  ramp.adjacent.push_back(0);
  return LaneGraph({m1, m2, ramp});
}

LaneGraph intersection_map() {
  auto lane = [](std::size_t id, Point a, Point b, bool vertical) {
    LaneSegment s;
    s.id = id;
    s.centerline = {a, b};
    const double off = 2.0;
    if (vertical) {
      s.left = {{a[0] - off, a[1]}, {b[0] - off, b[1]}};
      s.right = {{a[0] + off, a[1]}, {b[0] + off, b[1]}};
    } else {
      s.left = {{a[0], a[1] + off}, {b[0], b[1] + off}};
      s.right = {{a[0], a[1] - off}, {b[0], b[1] - off}};
    }
    return s;
  };
  auto a1 = lane(0, {-120.0, 0.0}, {0.0, 0.0}, false);
  auto a2 = lane(1, {0.0, 0.0}, {120.0, 0.0}, false);
  auto b1 = lane(2, {0.0, -120.0}, {0.0, 0.0}, true);
  auto b2 = lane(3, {0.0, 0.0}, {0.0, 120.0}, true);
  a1.successors.push_back(1);
  a2.predecessors.push_back(0);
  b1.successors.push_back(3);
  b2.predecessors.push_back(2);
  return LaneGraph({a1, a2, b1, b2});
}

// Arc value at which the crosser clears the conflict point. The clearing is
// timed near the end of the observation window so the yielder's future hinges
// on the crosser's observed history.
double conflict_clearance(const ScenarioConfig& cfg, const ScenePlan& p,
                          const std::vector<double>& crosser) {
  long tc = long(cfg.t_h) - long(cfg.reaction_delay) + p.cross_jitter;
  tc = std::clamp(tc, 1L, long(crosser.size()) - 1);
  return crosser[std::size_t(tc)];
}

// The crossing agent's arc feeds the yielding agent's speed target: until the
// (delayed) crosser has cleared the conflict point, the yielder creeps.
void yielder_arc(const ScenarioConfig& cfg, const ScenePlan& p, std::size_t agent,
                 const std::vector<double>& crosser, double crosser_clear,
                 std::size_t start, std::vector<double>& s, std::vector<double>& v) {
  const std::size_t T = cfg.t_h + cfg.t_p;
  s.resize(T);
  v.resize(T);
  if (start == 1) {
    s[0] = p.s0[agent];
    v[0] = p.v0[agent] * 0.6;
  }
  for (std::size_t t = std::max<std::size_t>(start, 1); t < T; ++t) {
    const std::size_t tl = t - 1 >= cfg.reaction_delay ? t - 1 - cfg.reaction_delay : 0;
    const double cleared = crosser[tl] - crosser_clear;  // >0 once past conflict
    const double gate = 1.0 / (1.0 + std::exp(-0.8 * cleared));
    const double v_des = 1.0 + 10.0 * gate;
    double a = cfg.speed_gain * 1.5 * (v_des - v[t - 1]) + p.noise[agent][t];
    a = clamp(a, -6.0, 4.0);
    v[t] = clamp(v[t - 1] + cfg.dt * a, 0.0, 25.0);
    s[t] = s[t - 1] + cfg.dt * v[t];
  }
}

void split_track(const std::vector<Point>& pts, std::size_t t_h, AgentTrack& a) {
  a.history.assign(pts.begin(), pts.begin() + long(t_h));
  a.future.assign(pts.begin() + long(t_h), pts.end());
}

Scene build_merge(const ScenarioConfig& cfg, const ScenePlan& p, std::size_t id) {
  Scene scene;
  scene.id = id;
  scene.dt = cfg.dt;
  scene.lanes = merge_map();
  std::vector<std::vector<double>> arcs(p.n);
  arcs[0] = lead_arc(cfg, p, 0);
  std::vector<double> vtmp;
  for (std::size_t i = 1; i < p.n; ++i) follower_arc(cfg, p, i, arcs[i - 1], 1, arcs[i], vtmp);
  for (std::size_t i = 0; i < p.n; ++i) {
    AgentTrack a;
    a.id = i;
    split_track(embed_merge(p, i, arcs[i]), cfg.t_h, a);
    scene.agents.push_back(std::move(a));
  }
  scene.target = p.n - 1;  // the most constrained follower
  return scene;
}

Scene build_intersection(const ScenarioConfig& cfg, const ScenePlan& p, std::size_t id) {
  Scene scene;
  scene.id = id;
  scene.dt = cfg.dt;
  scene.lanes = intersection_map();
  const std::size_t T = cfg.t_h + cfg.t_p;
  // Agent 0 crosses along +x through the conflict point at the origin.
  auto crosser = lead_arc(cfg, p, 0);
  const double clear = conflict_clearance(cfg, p, crosser);
  AgentTrack a0;
  a0.id = 0;
  std::vector<Point> pts(T);
  for (std::size_t t = 0; t < T; ++t) pts[t] = {crosser[t] - clear, 0.0};
  split_track(pts, cfg.t_h, a0);
  scene.agents.push_back(std::move(a0));

  std::vector<double> s, v;
  for (std::size_t i = 1; i < p.n; ++i) {
    yielder_arc(cfg, p, i, crosser, clear, 1, s, v);
    AgentTrack a;
    a.id = i;
    std::vector<Point> bp(T);
    for (std::size_t t = 0; t < T; ++t)
      bp[t] = {0.0, s[t] - s[0] - 18.0 - 8.0 * double(i - 1)};
    split_track(bp, cfg.t_h, a);
    scene.agents.push_back(std::move(a));
  }
  scene.target = 1;
  return scene;
}

Scene build_open_field(const ScenarioConfig& cfg, const ScenePlan& p, std::size_t id) {
  Scene scene;
  scene.id = id;
  scene.dt = cfg.dt;
  scene.pedestrian_mode = true;
  const std::size_t T = cfg.t_h + cfg.t_p;
  for (std::size_t i = 0; i < p.n; ++i) {
    std::vector<Point> pts(T);
    double x = p.of_start[i][0], y = p.of_start[i][1], h = p.of_heading[i];
    pts[0] = {x, y};
    for (std::size_t t = 1; t < T; ++t) {
      h += p.of_turn[i] + p.noise[i][t] * 0.2;
      x += cfg.dt * p.of_speed[i] * std::cos(h);
      y += cfg.dt * p.of_speed[i] * std::sin(h);
      pts[t] = {x, y};
    }
    AgentTrack a;
    a.id = i;
    split_track(pts, cfg.t_h, a);
    scene.agents.push_back(std::move(a));
  }
  scene.target = 0;
  return scene;
}

}  // namespace

std::vector<Scene> generate(const ScenarioConfig& cfg, std::size_t count,
                            std::uint64_t seed) {
  cfg.validate();
  if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng(Rng::mix(seed, k));
    ScenePlan plan = sample_plan(cfg, rng);
    switch (cfg.tmpl) {
      case Template::Merge: scenes.push_back(build_merge(cfg, plan, k)); break;
      case Template::Intersection:
        scenes.push_back(build_intersection(cfg, plan, k));
        break;
      case Template::OpenField:
        scenes.push_back(build_open_field(cfg, plan, k));
        break;
    }
  }
  return scenes;
}

InteractivityCertificate interactivity_certificate(const ScenarioConfig& cfg,
                                                   std::size_t count,
                                                   std::uint64_t seed) {
  cfg.validate();
  InteractivityCertificate cert;
  const std::size_t T = cfg.t_h + cfg.t_p;
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng(Rng::mix(seed, k));
    ScenePlan plan = sample_plan(cfg, rng);
    if (cfg.tmpl == Template::OpenField) {
      // Agents never read each other; masking shifts nothing by construction.
      cert.pairs += plan.n > 1 ? plan.n - 1 : 0;
      continue;
    }
    if (cfg.tmpl == Template::Merge) {
      std::vector<std::vector<double>> arcs(plan.n);
      std::vector<std::vector<double>> vels(plan.n);
      arcs[0] = lead_arc(cfg, plan, 0);
      for (std::size_t i = 1; i < plan.n; ++i)
        follower_arc(cfg, plan, i, arcs[i - 1], 1, arcs[i], vels[i]);
      for (std::size_t i = 1; i < plan.n; ++i) {
        std::vector<double> masked_leader = arcs[i - 1];
        for (std::size_t t = 0; t < cfg.t_h; ++t) masked_leader[t] = 0.0;
        std::vector<double> s = arcs[i], v = vels[i];
        follower_arc(cfg, plan, i, masked_leader, cfg.t_h, s, v);
        total += std::abs(s[T - 1] - arcs[i][T - 1]);
        ++cert.pairs;
      }
    } else {
      auto crosser = lead_arc(cfg, plan, 0);
      const double clear = conflict_clearance(cfg, plan, crosser);
      std::vector<double> s, v;
      for (std::size_t i = 1; i < plan.n; ++i) {
        yielder_arc(cfg, plan, i, crosser, clear, 1, s, v);
        std::vector<double> masked = crosser;
        for (std::size_t t = 0; t < cfg.t_h; ++t) masked[t] = 0.0;
        std::vector<double> ms = s, mv = v;
        yielder_arc(cfg, plan, i, masked, clear, cfg.t_h, ms, mv);
        total += std::abs(ms[T - 1] - s[T - 1]);
        ++cert.pairs;
      }
    }
  }
  cert.mean_fde_shift = cert.pairs ? total / double(cert.pairs) : 0.0;
  return cert;
}

}  // namespace scvae
