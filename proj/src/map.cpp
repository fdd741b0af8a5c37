#include "scvae/map.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace scvae {

double polyline_length(const std::vector<Point>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    len += std::hypot(pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]);
  return len;
}

LaneGraph::LaneGraph(std::vector<LaneSegment> segments) : segments_(std::move(segments)) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (!index_.emplace(segments_[i].id, i).second)
      throw std::invalid_argument("duplicate segment id " + std::to_string(segments_[i].id));
  }
  bbox_.reserve(segments_.size());
  for (const auto& s : segments_) {
    std::array<double, 4> b = {std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity()};
    auto grow = [&](const std::vector<Point>& pts) {
      for (const auto& p : pts) {
        b[0] = std::min(b[0], p[0]);
        b[1] = std::min(b[1], p[1]);
        b[2] = std::max(b[2], p[0]);
        b[3] = std::max(b[3], p[1]);
      }
    };
    grow(s.centerline);
    grow(s.left);
    grow(s.right);
    bbox_.push_back(b);
  }
  validate();
}

const LaneSegment& LaneGraph::segment(std::size_t id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw std::out_of_range("no segment with id " + std::to_string(id));
  return segments_[it->second];
}

void LaneGraph::validate() const {
  auto has = [&](const std::vector<std::size_t>& v, std::size_t id) {
    return std::find(v.begin(), v.end(), id) != v.end();
  };
  for (const auto& s : segments_) {
    if (polyline_length(s.centerline) <= 0.0)
      throw std::invalid_argument("segment " + std::to_string(s.id) +
                                  " has non-positive centerline length");
    for (std::size_t a : s.adjacent)
      if (!has(segment(a).adjacent, s.id))
        throw std::invalid_argument("adjacency not symmetric between " +
                                    std::to_string(s.id) + " and " + std::to_string(a));
    for (std::size_t p : s.predecessors)
      if (!has(segment(p).successors, s.id))
        throw std::invalid_argument("segment " + std::to_string(p) +
                                    " is a predecessor of " + std::to_string(s.id) +
                                    " but lacks the successor link");
    for (std::size_t n : s.successors)
      if (!has(segment(n).predecessors, s.id))
        throw std::invalid_argument("segment " + std::to_string(n) +
                                    " is a successor of " + std::to_string(s.id) +
                                    " but lacks the predecessor link");
  }
}

namespace {

bool point_in_polygon(const Point& x, const std::vector<Point>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const bool straddles = (poly[i][1] > x[1]) != (poly[j][1] > x[1]);
    if (straddles) {
      const double t = (x[1] - poly[i][1]) / (poly[j][1] - poly[i][1]);
      if (x[0] < poly[i][0] + t * (poly[j][0] - poly[i][0])) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

std::vector<std::size_t> LaneGraph::segments_containing(const Point& x) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (s.left.size() < 2 || s.right.size() < 2) continue;
    if (x[0] < bbox_[i][0] || x[0] > bbox_[i][2] || x[1] < bbox_[i][1] ||
        x[1] > bbox_[i][3])
      continue;
    std::vector<Point> poly = s.left;
    poly.insert(poly.end(), s.right.rbegin(), s.right.rend());
    if (point_in_polygon(x, poly)) out.push_back(s.id);
  }
  return out;
}

std::vector<std::size_t> LaneGraph::segments_in_box(const Point& x, double r) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& b = bbox_[i];
    if (b[0] <= x[0] + r && b[2] >= x[0] - r && b[1] <= x[1] + r && b[3] >= x[1] - r)
      out.push_back(segments_[i].id);
  }
  return out;
}

std::map<std::size_t, double> roi_graph_search(const Point& x, const RoiConfig& cfg,
                                               const LaneGraph& map) {
  if (!(cfg.d_init > 0.0) || cfg.d_init > cfg.d_max)
    throw std::invalid_argument("roi config requires 0 < d_init <= d_max");
  std::map<std::size_t, double> roi;
  if (map.empty()) return roi;

  auto seeds = map.segments_containing(x);
  double r = cfg.d_init;
  while (seeds.empty() && r < cfg.d_max) {
    seeds = map.segments_in_box(x, r);
    r *= 2.0;
  }

  struct Node {
    std::size_t seg;
    double length;
    double distance;
  };
  std::deque<Node> pool;
  for (std::size_t id : seeds)
    pool.push_back({id, polyline_length(map.segment(id).centerline), 0.0});

  while (!pool.empty()) {
    Node node = pool.front();
    pool.pop_front();
    auto it = roi.find(node.seg);
    const bool first = it == roi.end();
    // "absent or >=" keeps the last equal-distance node, matching the spec'd
    // update rule; children are only re-expanded on a strict improvement so
    // adjacency cycles terminate.
    const bool improves = first || it->second > node.distance;
    if (first)
      roi.emplace(node.seg, node.distance);
    else if (it->second >= node.distance)
      it->second = node.distance;
    if (!improves) continue;

    const auto& seg = map.segment(node.seg);
    for (std::size_t child : seg.adjacent)
      pool.push_back({child, polyline_length(map.segment(child).centerline),
                      node.distance});
    std::vector<std::size_t> children = seg.predecessors;
    children.insert(children.end(), seg.successors.begin(), seg.successors.end());
    for (std::size_t child : children) {
      const double length = polyline_length(map.segment(child).centerline);
      const double distance = 0.5 * (length + node.length) + node.distance;
      if (distance <= cfg.d_max) pool.push_back({child, length, distance});
    }
  }
  return roi;
}

double smooth_heading(const std::vector<double>& headings, double lambda) {
  if (headings.empty())
    throw std::invalid_argument("smooth_heading: empty heading sequence");
  if (!(lambda > 0.0) || !(lambda < 1.0))
    throw std::invalid_argument("smooth_heading: lambda must lie in (0, 1)");
  const std::size_t T = headings.size() - 1;
  double sx = 0.0, sy = 0.0;
  for (std::size_t t = 0; t < headings.size(); ++t) {
    const double w = std::pow(lambda, double(T - t));
    sx += w * std::cos(headings[t]);
    sy += w * std::sin(headings[t]);
  }
  return std::atan2(sy, sx);
}

// ---- serialization ----------------------------------------------------------

namespace {

nlohmann::json points_json(const std::vector<Point>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p[0], p[1]});
  return arr;
}

std::vector<Point> points_from(const nlohmann::json& arr) {
  std::vector<Point> pts;
  for (const auto& p : arr) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

}  // namespace

std::string LaneGraph::to_json() const {
  nlohmann::json j;
  j["format"] = "lane-graph";
  j["version"] = 1;
  j["segments"] = nlohmann::json::array();
  for (const auto& s : segments_) {
    nlohmann::json js;
    js["id"] = s.id;
    js["centerline"] = points_json(s.centerline);
    js["left"] = points_json(s.left);
    js["right"] = points_json(s.right);
    js["discrete"] = s.discrete;
    js["adjacent"] = s.adjacent;
    js["predecessors"] = s.predecessors;
    js["successors"] = s.successors;
    j["segments"].push_back(js);
  }
  return j.dump(2);
}

LaneGraph LaneGraph::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "lane-graph")
    throw std::invalid_argument("not a lane-graph document");
  std::vector<LaneSegment> segs;
  for (const auto& js : j.at("segments")) {
    LaneSegment s;
    s.id = js.at("id").get<std::size_t>();
    s.centerline = points_from(js.at("centerline"));
    s.left = points_from(js.at("left"));
    s.right = points_from(js.at("right"));
    s.discrete = js.value("discrete", false);
    s.adjacent = js.at("adjacent").get<std::vector<std::size_t>>();
    s.predecessors = js.at("predecessors").get<std::vector<std::size_t>>();
    s.successors = js.at("successors").get<std::vector<std::size_t>>();
    segs.push_back(std::move(s));
  }
  return LaneGraph(std::move(segs));
}

}  // namespace scvae
