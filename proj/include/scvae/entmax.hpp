#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scvae/tensor.hpp"

namespace scvae {

// Prefix statistics over the sorted coordinates of a vector z: top-rho mean,
// unnormalized variance, and the induced threshold
//   tau(rho) = M(rho) - sqrt((1 - S(rho)) / rho)   if S(rho) <= 1, else +inf.
// For z = s/2 the selected support size gives the exact 1.5-entmax threshold.
struct ThresholdScan {
  std::vector<double> sorted;    // z descending
  std::vector<double> top_mean;  // M(rho), rho = 1..d at index rho-1
  std::vector<double> unnorm_var;
  std::vector<double> tau;
  std::size_t support = 0;       // rho*
  double threshold = 0.0;        // tau(rho*)
};

ThresholdScan threshold_scan(std::span<const double> z);

// Exact 1.5-entmax: p = [s/2 - tau]_+^2 with sum(p) = 1.
std::vector<double> entmax15(std::span<const double> s);

// Vector-Jacobian product of entmax15 at s (with p = entmax15(s)).
// At support-boundary points the smaller-support one-sided derivative is
// used: a coordinate sitting exactly at the threshold has zero probability
// and receives zero gradient.
std::vector<double> entmax15_vjp(std::span<const double> s, std::span<const double> p,
                                 std::span<const double> upstream);

// Rows of varying degree padded to a common width with a dummy value of
// (global minimum entry) - 2, which provably receives zero probability.
struct PaddedScoreBatch {
  std::size_t rows = 0;
  std::size_t width = 0;                // d* = max_j d_j
  std::vector<std::size_t> degree;      // true degree per row
  std::vector<double> data;             // row-major rows x width
  double dummy = 0.0;
};

PaddedScoreBatch pad_batch(const std::vector<std::vector<double>>& rows);

// Row-wise entmax15 over the padded matrix (the batched production path).
std::vector<std::vector<double>> entmax15_rows(const PaddedScoreBatch& batch);

// G-entmax: per-edge scores normalized within each target segment via the
// padded batch route. `segments` lists the edge indices of each segment;
// every edge must appear in exactly one segment.
std::vector<double> segmented_entmax(std::span<const double> scores,
                                     const std::vector<std::vector<std::size_t>>& segments);

// Differentiable wrappers recorded on the tape.
Tensor entmax15_t(const Tensor& s);
Tensor segmented_entmax_t(const Tensor& scores,
                          const std::vector<std::vector<std::size_t>>& segments);

// Randomized verification of both statements of the padding proposition,
// including probes at the equality boundary s'_{d+1} = 2 * tau_{s/2}(d).
struct Prop2Report {
  int statement = 0;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_discrepancy = 0.0;
  bool passed() const { return violations == 0; }
};

Prop2Report verify_prop2(int statement, std::size_t trials, std::size_t max_d,
                         std::uint64_t seed);

}  // namespace scvae
