#include "scvae/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace scvae {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("absent");
}

std::vector<Point> to_points(const Tensor& flat) {
  std::vector<Point> pts(flat.size() / 2);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {flat[2 * i], flat[2 * i + 1]};
  return pts;
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  for (double x : xs) out.mean += x;
  out.mean /= double(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / double(xs.size() - 1));
  }
  return out;
}

}  // namespace

double ade(const std::vector<Point>& a, const std::vector<Point>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("ade: tracks must share a non-zero horizon");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += std::hypot(a[i][0] - b[i][0], a[i][1] - b[i][1]);
  return s / double(a.size());
}

double fde(const std::vector<Point>& a, const std::vector<Point>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("fde: tracks must share a non-zero horizon");
  return std::hypot(a.back()[0] - b.back()[0], a.back()[1] - b.back()[1]);
}

std::vector<double> delta_grid() {
  std::vector<double> grid{0.0};
  const double lo = std::log(1e-3), hi = std::log(1.0);
  for (int i = 0; i < 50; ++i)
    grid.push_back(std::exp(lo + (hi - lo) * double(i) / 49.0));
  return grid;
}

namespace {

// Selects the agent->target records the agent ratio is defined over.
std::vector<double> neighbor_weights(const AttentionReport& report,
                                     std::size_t target_id) {
  if (report.mode == Aggregator::Max)
    throw std::invalid_argument(
        "agent ratio reads attention weights; max aggregation has none");
  std::vector<double> w;
  for (const auto& r : report.records)
    if (r.target == target_id && r.source_kind == NodeKind::Agent &&
        r.source != target_id)
      w.push_back(r.weight);
  return w;
}

}  // namespace

std::optional<double> agent_ratio(const AttentionReport& report,
                                  std::size_t target_id) {
  auto w = neighbor_weights(report, target_id);
  if (w.empty()) return std::nullopt;  // single-agent scene
  std::size_t nonzero = 0;
  for (double x : w)
    if (x != 0.0) ++nonzero;  // entmax zeros are exact; no tolerance
  return 100.0 * double(nonzero) / double(w.size());
}

std::optional<std::vector<std::pair<double, double>>> agent_ratio_thresholded(
    const AttentionReport& report, std::size_t target_id,
    const std::vector<double>& grid) {
  auto w = neighbor_weights(report, target_id);
  if (w.empty()) return std::nullopt;
  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.size());
  for (double d : grid) {
    if (d < 0.0)
      throw std::invalid_argument("agent_ratio_thresholded: negative delta");
    std::size_t hit = 0;
    for (double x : w)
      if (x >= d) ++hit;
    curve.emplace_back(d, 100.0 * double(hit) / double(w.size()));
  }
  return curve;
}

std::optional<double> gradient_importance(const Model::MeanPrediction& pred) {
  const auto& hist = pred.encoded.history;
  const std::size_t n = hist.size();
  if (n < 2) return std::nullopt;
  const std::size_t t_h = hist.begin()->second.size() / 2;

  double total = 0.0;
  const std::size_t last = pred.track.size() - 2;
  for (std::size_t coord : {last, last + 1}) {
    backward(slice(pred.track, coord, coord + 1));
    for (const auto& [id, leaf] : hist) {
      if (id == pred.encoded.target) continue;
      for (double g : leaf.grad()) total += std::abs(g);
    }
    for (const auto& [id, leaf] : hist) {
      Tensor t = leaf;  // shared handle; zero_grad mutates the node
      t.zero_grad();
    }
  }
  return total / (2.0 * double(n - 1) * double(t_h));
}

std::optional<double> gradient_importance(const Model& model, const Scene& scene) {
  return gradient_importance(model.predict_mean(scene));
}

std::optional<double> leave_one_out_ade(const Model& model, const Scene& scene) {
  if (scene.agents.size() < 2) return std::nullopt;
  Scene norm = scene.frame.applied ? scene : normalize(scene, scene.target);
  auto base = to_points(model.predict_mean(norm).track);
  double s = 0.0;
  for (const auto& a : norm.agents) {
    if (a.id == norm.target) continue;
    s += ade(base, to_points(model.predict_mean(norm, a.id).track));
  }
  return s / double(norm.agents.size() - 1);
}

MinAdeFde min_ade_fde(const std::vector<std::vector<Point>>& samples,
                      const std::vector<Point>& truth) {
  if (samples.empty()) throw std::invalid_argument("min_ade_fde: no samples");
  MinAdeFde out;
  out.min_fde = fde(samples[0], truth);
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const double f = fde(samples[k], truth);
    if (f < out.min_fde) {
      out.min_fde = f;
      out.argmin = k;
    }
  }
  out.min_ade = ade(samples[out.argmin], truth);
  return out;
}

std::string MetricsRow::tsv_header() {
  return "trial\tvariant\taggregator\tar_pct\tmin_ade_k1\tmin_fde_k1"
         "\tmin_ade_k6\tmin_fde_k6\ttau_g\tloo_ade";
}

std::string MetricsRow::to_tsv_line() const {
  std::string out = std::to_string(trial);
  out += '\t';
  out += to_string(variant);
  out += '\t';
  out += to_string(aggregator);
  for (const auto& s : {fmt_opt(ar), fmt(min_ade1), fmt(min_fde1), fmt(min_ade6),
                        fmt(min_fde6), fmt_opt(tau_g), fmt_opt(loo_ade)}) {
    out += '\t';
    out += s;
  }
  return out;
}

void MetricsRow::validate() const {
  if (ar && (*ar < 0.0 || *ar > 100.0))
    throw std::invalid_argument("metrics row: AR outside [0, 100]");
  for (std::size_t i = 1; i < ar_delta.size(); ++i)
    if (ar_delta[i].second > ar_delta[i - 1].second + 1e-12)
      throw std::invalid_argument("metrics row: AR_delta increases with delta");
  if (min_ade1 < 0 || min_fde1 < 0 || min_ade6 < 0 || min_fde6 < 0)
    throw std::invalid_argument("metrics row: negative displacement error");
}

MetricsRow evaluate_dataset(const Model& model, const std::vector<Scene>& scenes,
                            std::size_t trial, std::uint64_t seed) {
  if (scenes.empty()) throw std::invalid_argument("evaluate_dataset: no scenes");
  MetricsRow row;
  row.trial = trial;
  row.variant = model.config().variant;
  row.aggregator = model.config().aggregator;

  const auto grid = delta_grid();
  double ar_sum = 0.0;
  std::size_t ar_n = 0;
  std::vector<double> curve_sum(grid.size(), 0.0);
  double tau_sum = 0.0, loo_sum = 0.0;
  std::size_t tau_n = 0, loo_n = 0;
  double a1 = 0.0, f1 = 0.0, a6 = 0.0, f6 = 0.0;

  for (std::size_t k = 0; k < scenes.size(); ++k) {
    const Scene norm = scenes[k].frame.applied
                           ? scenes[k]
                           : normalize(scenes[k], scenes[k].target);
    auto pred = model.predict_mean(norm);

    if (row.aggregator != Aggregator::Max) {
      if (auto v = agent_ratio(pred.encoded.report, norm.target)) {
        ar_sum += *v;
        if (auto c = agent_ratio_thresholded(pred.encoded.report, norm.target, grid))
          for (std::size_t i = 0; i < grid.size(); ++i) curve_sum[i] += (*c)[i].second;
        ++ar_n;
      }
    }
    if (auto t = gradient_importance(pred)) {
      tau_sum += *t;
      ++tau_n;
    }
    if (norm.agents.size() >= 2) {
      auto base = to_points(pred.track);
      double s = 0.0;
      for (const auto& a : norm.agents) {
        if (a.id == norm.target) continue;
        s += ade(base, to_points(model.predict_mean(norm, a.id).track));
      }
      loo_sum += s / double(norm.agents.size() - 1);
      ++loo_n;
    }

    Rng rng(Rng::mix(seed, k));
    auto samples = model.sample_trajectories(norm, 6, rng);
    const auto& truth = norm.agent(norm.target).future;
    auto m1 = min_ade_fde({samples[0]}, truth);  // mean track only
    auto m6 = min_ade_fde(samples, truth);
    a1 += m1.min_ade;
    f1 += m1.min_fde;
    a6 += m6.min_ade;
    f6 += m6.min_fde;
  }

  const double inv = 1.0 / double(scenes.size());
  row.min_ade1 = a1 * inv;
  row.min_fde1 = f1 * inv;
  row.min_ade6 = a6 * inv;
  row.min_fde6 = f6 * inv;
  if (ar_n > 0) {
    row.ar = ar_sum / double(ar_n);
    row.ar_delta.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      row.ar_delta.emplace_back(grid[i], curve_sum[i] / double(ar_n));
  }
  if (tau_n > 0) row.tau_g = tau_sum / double(tau_n);
  if (loo_n > 0) row.loo_ade = loo_sum / double(loo_n);
  row.validate();
  return row;
}

TrialSummary aggregate_trials(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate_trials: no rows");
  TrialSummary out;
  out.trials = rows.size();
  out.single_trial = rows.size() == 1;

  auto collect = [&](auto getter) {
    std::vector<double> xs;
    for (const auto& r : rows)
      if (auto v = getter(r)) xs.push_back(*v);
    return xs;
  };
  auto required = [&](auto getter) {
    std::vector<double> xs;
    for (const auto& r : rows) xs.push_back(getter(r));
    return mean_std(xs);
  };

  if (auto xs = collect([](const MetricsRow& r) { return r.ar; }); !xs.empty())
    out.ar = mean_std(xs);
  out.min_ade1 = required([](const MetricsRow& r) { return r.min_ade1; });
  out.min_fde1 = required([](const MetricsRow& r) { return r.min_fde1; });
  out.min_ade6 = required([](const MetricsRow& r) { return r.min_ade6; });
  out.min_fde6 = required([](const MetricsRow& r) { return r.min_fde6; });
  if (auto xs = collect([](const MetricsRow& r) { return r.tau_g; }); !xs.empty())
    out.tau_g = mean_std(xs);
  if (auto xs = collect([](const MetricsRow& r) { return r.loo_ade; }); !xs.empty())
    out.loo_ade = mean_std(xs);

  // The AR_delta curve aggregates point-wise over rows that carry it.
  const MetricsRow* with_curve = nullptr;
  for (const auto& r : rows)
    if (!r.ar_delta.empty()) {
      with_curve = &r;
      break;
    }
  if (with_curve) {
    const std::size_t g = with_curve->ar_delta.size();
    for (std::size_t i = 0; i < g; ++i) {
      std::vector<double> xs;
      for (const auto& r : rows) {
        if (r.ar_delta.empty()) continue;
        if (r.ar_delta.size() != g || r.ar_delta[i].first != with_curve->ar_delta[i].first)
          throw std::invalid_argument("aggregate_trials: mismatched delta grids");
        xs.push_back(r.ar_delta[i].second);
      }
      out.ar_delta.emplace_back(with_curve->ar_delta[i].first, mean_std(xs));
    }
  }
  return out;
}

std::string TrialSummary::to_tsv() const {
  std::string out = "metric\tmean\tstd\n";
  auto line = [&](const char* name, const MeanStd& m) {
    out += name;
    out += '\t';
    out += fmt(m.mean);
    out += '\t';
    out += fmt(m.std);
    out += '\n';
  };
  if (ar) line("ar_pct", *ar);
  line("min_ade_k1", min_ade1);
  line("min_fde_k1", min_fde1);
  line("min_ade_k6", min_ade6);
  line("min_fde_k6", min_fde6);
  if (tau_g) line("tau_g", *tau_g);
  if (loo_ade) line("loo_ade", *loo_ade);
  return out;
}

std::string ar_curve_to_tsv(const std::vector<std::pair<double, double>>& curve) {
  std::string out = "delta\tar_pct\n";
  for (const auto& [d, v] : curve) {
    out += fmt(d);
    out += '\t';
    out += fmt(v);
    out += '\n';
  }
  return out;
}

}  // namespace scvae
