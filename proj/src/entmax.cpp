#include "scvae/entmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scvae/rng.hpp"

namespace scvae {

ThresholdScan threshold_scan(std::span<const double> z) {
  const std::size_t d = z.size();
  if (d == 0) throw std::invalid_argument("threshold_scan: empty input");

  ThresholdScan scan;
  scan.sorted.assign(z.begin(), z.end());
  std::sort(scan.sorted.begin(), scan.sorted.end(), std::greater<double>());
  scan.top_mean.resize(d);
  scan.unnorm_var.resize(d);
  scan.tau.resize(d);

  double sum = 0.0, sumsq = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    sum += scan.sorted[r];
    sumsq += scan.sorted[r] * scan.sorted[r];
    const double rho = static_cast<double>(r + 1);
    const double m = sum / rho;
    const double s = sumsq - rho * m * m;  // sum of squared deviations
    scan.top_mean[r] = m;
    scan.unnorm_var[r] = s;
    scan.tau[r] = s <= 1.0 ? m - std::sqrt(std::max(0.0, 1.0 - s) / rho)
                           : std::numeric_limits<double>::infinity();
  }

  // Smallest rho whose induced threshold lies in [z_[rho+1], z_[rho]];
  // ties at the boundary resolve to the smaller support.
  scan.support = d;
  for (std::size_t r = 0; r < d; ++r) {
    if (!std::isfinite(scan.tau[r])) continue;
    const bool below_top = scan.tau[r] <= scan.sorted[r];
    const bool above_next = (r + 1 == d) || scan.tau[r] >= scan.sorted[r + 1];
    if (below_top && above_next) {
      scan.support = r + 1;
      break;
    }
  }
  scan.threshold = scan.tau[scan.support - 1];
  return scan;
}

std::vector<double> entmax15(std::span<const double> s) {
  const std::size_t d = s.size();
  if (d == 0) throw std::invalid_argument("entmax15: empty input");
  std::vector<double> z(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(s[i])) throw std::invalid_argument("entmax15: non-finite entry");
    z[i] = 0.5 * s[i];
  }
  const ThresholdScan scan = threshold_scan(z);
  std::vector<double> p(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double t = z[i] - scan.threshold;
    p[i] = t > 0.0 ? t * t : 0.0;
  }
  return p;
}

std::vector<double> entmax15_vjp(std::span<const double> s, std::span<const double> p,
                                 std::span<const double> upstream) {
  const std::size_t d = s.size();
  if (p.size() != d || upstream.size() != d)
    throw std::invalid_argument("entmax15_vjp: size mismatch");
  // dp_i/ds_j = sqrt(p_i) (delta_ij - q_j), q_j = sqrt(p_j) / sum_k sqrt(p_k),
  // restricted to the support; off-support coordinates get exactly zero.
  double denom = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    if (p[i] > 0.0) denom += std::sqrt(p[i]);
  double weighted = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    if (p[i] > 0.0) weighted += upstream[i] * std::sqrt(p[i]);
  const double avg = weighted / denom;

  std::vector<double> down(d, 0.0);
  for (std::size_t j = 0; j < d; ++j)
    if (p[j] > 0.0) down[j] = std::sqrt(p[j]) * (upstream[j] - avg);
  return down;
}

PaddedScoreBatch pad_batch(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("pad_batch: no rows");
  PaddedScoreBatch b;
  b.rows = rows.size();
  double global_min = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.empty()) throw std::invalid_argument("pad_batch: empty row");
    b.width = std::max(b.width, r.size());
    for (double v : r) global_min = std::min(global_min, v);
  }
  b.dummy = global_min - 2.0;
  b.degree.reserve(rows.size());
  b.data.assign(b.rows * b.width, b.dummy);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    b.degree.push_back(rows[j].size());
    std::copy(rows[j].begin(), rows[j].end(), b.data.begin() + j * b.width);
  }
  return b;
}

std::vector<std::vector<double>> entmax15_rows(const PaddedScoreBatch& batch) {
  std::vector<std::vector<double>> out(batch.rows);
  for (std::size_t j = 0; j < batch.rows; ++j) {
    std::span<const double> row(batch.data.data() + j * batch.width, batch.width);
    out[j] = entmax15(row);
  }
  return out;
}

std::vector<double> segmented_entmax(std::span<const double> scores,
                                     const std::vector<std::vector<std::size_t>>& segments) {
  std::vector<int> owner(scores.size(), -1);
  std::vector<std::vector<double>> rows;
  rows.reserve(segments.size());
  for (std::size_t j = 0; j < segments.size(); ++j) {
    if (segments[j].empty())
      throw std::invalid_argument("segmented_entmax: empty segment " + std::to_string(j));
    std::vector<double> row;
    row.reserve(segments[j].size());
    for (std::size_t e : segments[j]) {
      if (e >= scores.size())
        throw std::invalid_argument("segmented_entmax: edge index out of range");
      if (owner[e] != -1)
        throw std::invalid_argument("segmented_entmax: edge " + std::to_string(e) +
                                    " assigned to multiple segments");
      owner[e] = static_cast<int>(j);
      row.push_back(scores[e]);
    }
    rows.push_back(std::move(row));
  }
  for (std::size_t e = 0; e < scores.size(); ++e)
    if (owner[e] == -1)
      throw std::invalid_argument("segmented_entmax: edge " + std::to_string(e) +
                                  " belongs to no segment");

  const PaddedScoreBatch batch = pad_batch(rows);
  const auto probs = entmax15_rows(batch);
  std::vector<double> weights(scores.size(), 0.0);
  for (std::size_t j = 0; j < segments.size(); ++j) {
    for (std::size_t i = 0; i < segments[j].size(); ++i)
      weights[segments[j][i]] = probs[j][i];
    for (std::size_t i = segments[j].size(); i < batch.width; ++i) {
      if (probs[j][i] != 0.0)
        throw std::logic_error("segmented_entmax: padded slot received nonzero mass");
    }
  }
  return weights;
}

Tensor entmax15_t(const Tensor& s) {
  std::vector<double> p = entmax15(s.values());
  return Tensor::from_op(s.shape(), std::move(p), {s}, [](detail::Node& o) {
    if (!o.parents[0]->requires_grad) return;
    const auto down = entmax15_vjp(o.parents[0]->value, o.value, o.grad);
    double* g = o.parents[0]->grad.data();
    for (std::size_t i = 0; i < down.size(); ++i) g[i] += down[i];
  });
}

Tensor segmented_entmax_t(const Tensor& scores,
                          const std::vector<std::vector<std::size_t>>& segments) {
  std::vector<double> w = segmented_entmax(scores.values(), segments);
  return Tensor::from_op(scores.shape(), std::move(w), {scores},
                         [segments](detail::Node& o) {
    if (!o.parents[0]->requires_grad) return;
    const auto& sv = o.parents[0]->value;
    double* g = o.parents[0]->grad.data();
    for (const auto& seg : segments) {
      std::vector<double> s(seg.size()), p(seg.size()), up(seg.size());
      for (std::size_t i = 0; i < seg.size(); ++i) {
        s[i] = sv[seg[i]];
        p[i] = o.value[seg[i]];
        up[i] = o.grad[seg[i]];
      }
      const auto down = entmax15_vjp(s, p, up);
      for (std::size_t i = 0; i < seg.size(); ++i) g[seg[i]] += down[i];
    }
  });
}

namespace {

// Shrinks a vector towards its mean until entmax15 has full support.
std::vector<double> force_full_support(std::vector<double> s) {
  for (int iter = 0; iter < 80; ++iter) {
    const auto p = entmax15(s);
    if (*std::min_element(p.begin(), p.end()) > 0.0) return s;
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(s.size());
    for (double& v : s) v = m + 0.5 * (v - m);
  }
  return s;
}

}  // namespace

Prop2Report verify_prop2(int statement, std::size_t trials, std::size_t max_d,
                         std::uint64_t seed) {
  if (statement != 1 && statement != 2)
    throw std::invalid_argument("verify_prop2: statement must be 1 or 2");
  if (max_d < 2) throw std::invalid_argument("verify_prop2: max_d must be >= 2");

  Prop2Report report;
  report.statement = statement;
  Rng rng(seed);
  const double kTol = 1e-9;

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t d = 1 + rng.next_u64() % max_d;
    std::vector<double> s(d);
    for (double& v : s) v = rng.uniform(-3.0, 3.0);

    const bool boundary_probe = (t % 4 == 0);
    double appended = 0.0;
    bool expect_zero = true;

    if (statement == 1) {
      const double smin = *std::min_element(s.begin(), s.end());
      appended = boundary_probe ? smin - 2.0 : smin - 2.0 - rng.uniform(0.0, 3.0);
    } else {
      s = force_full_support(std::move(s));
      std::vector<double> z(d);
      for (std::size_t i = 0; i < d; ++i) z[i] = 0.5 * s[i];
      const double tau_d = threshold_scan(z).tau[d - 1];
      if (boundary_probe) {
        appended = 2.0 * tau_d;
      } else if (t % 2 == 0) {
        appended = 2.0 * tau_d - rng.uniform(1e-6, 2.0);
      } else {
        appended = 2.0 * tau_d + rng.uniform(1e-6, 1.0);
        expect_zero = false;
      }
    }

    const auto p = entmax15(s);
    std::vector<double> s_aug = s;
    s_aug.push_back(appended);
    const auto p_aug = entmax15(s_aug);

    bool ok = true;
    double disc = 0.0;
    if (expect_zero) {
      // Original coordinates unchanged, appended coordinate exactly zero.
      for (std::size_t i = 0; i < d; ++i)
        disc = std::max(disc, std::abs(p_aug[i] - p[i]));
      disc = std::max(disc, std::abs(p_aug[d]));
      ok = disc <= kTol;
    } else {
      ok = p_aug[d] > 0.0;
      disc = p_aug[d] > 0.0 ? 0.0 : 1.0;
    }
    report.max_discrepancy = std::max(report.max_discrepancy, disc);
    if (!ok) ++report.violations;
    ++report.trials;
  }
  return report;
}

}  // namespace scvae
