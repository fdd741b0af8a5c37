#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace scvae {

using Point = std::array<double, 2>;

struct LaneSegment {
  std::size_t id = 0;
  std::vector<Point> centerline;
  std::vector<Point> left;
  std::vector<Point> right;
  bool discrete = false;  // e.g. crosswalk-style segments
  std::vector<std::size_t> adjacent;
  std::vector<std::size_t> predecessors;
  std::vector<std::size_t> successors;
};

double polyline_length(const std::vector<Point>& pts);

// Drivable road segments with adjacency (side-by-side), predecessor and
// successor (along-the-road) relations.
class LaneGraph {
 public:
  LaneGraph() = default;
  explicit LaneGraph(std::vector<LaneSegment> segments);

  const std::vector<LaneSegment>& segments() const { return segments_; }
  const LaneSegment& segment(std::size_t id) const;
  bool empty() const { return segments_.empty(); }

  // Symmetric adjacency, pred/succ consistency, positive centerline length.
  void validate() const;

  // Segments whose boundary polygon contains the point (even-odd rule over
  // left boundary + reversed right boundary).
  std::vector<std::size_t> segments_containing(const Point& x) const;

  // Segments whose bounding box intersects the square of half-size r at x.
  std::vector<std::size_t> segments_in_box(const Point& x, double r) const;

  std::string to_json() const;
  static LaneGraph from_json(const std::string& text);

 private:
  std::vector<LaneSegment> segments_;
  std::map<std::size_t, std::size_t> index_;           // id -> position
  std::vector<std::array<double, 4>> bbox_;            // xmin ymin xmax ymax
};

struct RoiConfig {
  double d_max = 0.0;
  double d_init = 0.0;  // must satisfy 0 < d_init <= d_max
};

// Region-of-interest graph search. Seeds with the segments containing x
// (falling back to an expanding bounding-box probe), then walks the lane
// graph FIFO-style: adjacent segments inherit the distance unchanged,
// predecessor/successor hops add the average of the two centerline lengths,
// and anything beyond d_max is dropped. Returns the minimal distance per
// reachable segment.
std::map<std::size_t, double> roi_graph_search(const Point& x, const RoiConfig& cfg,
                                               const LaneGraph& map);

// Normalized exponentially-weighted heading estimate over psi_0..psi_T with
// forgetting factor lambda; angles are averaged via their unit vectors so
// wrap-around is respected.
double smooth_heading(const std::vector<double>& headings, double lambda = 0.9);

}  // namespace scvae
