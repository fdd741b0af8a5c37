#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scvae/model.hpp"

namespace scvae {

// Average / final displacement error between two equal-length tracks.
double ade(const std::vector<Point>& a, const std::vector<Point>& b);
double fde(const std::vector<Point>& a, const std::vector<Point>& b);

// Threshold grid for the AR_delta curve: {0} plus 50 log-spaced points
// in [1e-3, 1].
std::vector<double> delta_grid();

// Agent ratio: percentage of agent->target attention weights (self-edge and
// lanelet edges excluded) that are strictly non-zero. Returns nullopt for
// single-agent scenes (no neighbor edges). Throws for max-aggregation
// reports, whose "weights" are win-fraction diagnostics, not attention.
std::optional<double> agent_ratio(const AttentionReport& report,
                                  std::size_t target_id);

// Thresholded agent ratio over a delta grid, using ">= delta" per point.
// Note the deliberate mismatch at delta = 0: every weight satisfies ">= 0",
// so AR_0 is 100% even when the strict agent ratio is lower.
std::optional<std::vector<std::pair<double, double>>> agent_ratio_thresholded(
    const AttentionReport& report, std::size_t target_id,
    const std::vector<double>& grid);

// Gradient importance tau_g: entry-wise 1-norm of the Jacobian of the final
// predicted state (2 coordinates) with respect to every other agent's
// observed track, averaged as total / (2 * (n-1) * T_h). Decoded at the
// latent mean. Returns nullopt for single-agent scenes. Leaves parameter
// gradients accumulated; training code must zero_grad() before reuse.
std::optional<double> gradient_importance(const Model::MeanPrediction& pred);
std::optional<double> gradient_importance(const Model& model, const Scene& scene);

// Leave-one-out ADE: average displacement between the unmasked mean
// prediction and the mean prediction with each non-target agent removed
// from the context graph. Returns nullopt for single-agent scenes.
std::optional<double> leave_one_out_ade(const Model& model, const Scene& scene);

struct MinAdeFde {
  double min_ade = 0.0;
  double min_fde = 0.0;
  std::size_t argmin = 0;  // sample index with the minimum FDE
};

// minFDE = smallest final-point error over the samples; minADE = ADE of that
// same sample (not the smallest ADE). FDE ties go to the lowest index.
MinAdeFde min_ade_fde(const std::vector<std::vector<Point>>& samples,
                      const std::vector<Point>& truth);

struct MetricsRow {
  std::size_t trial = 0;
  Variant variant = Variant::SocialCvae;
  Aggregator aggregator = Aggregator::Entmax;
  std::optional<double> ar;  // percent
  std::vector<std::pair<double, double>> ar_delta;  // (delta, percent)
  double min_ade1 = 0.0, min_fde1 = 0.0;
  double min_ade6 = 0.0, min_fde6 = 0.0;
  std::optional<double> tau_g;
  std::optional<double> loo_ade;

  static std::string tsv_header();
  std::string to_tsv_line() const;  // excludes the AR_delta curve
  void validate() const;            // throws when an invariant is broken
};

// Dataset-level evaluation: per-scene metrics averaged over the set (scenes
// where a metric is undefined are skipped for that metric). Sampling noise
// for minADE/minFDE at K = 6 is drawn from Rng(Rng::mix(seed, scene index)),
// so the row is a pure function of (model, scenes, trial, seed).
MetricsRow evaluate_dataset(const Model& model, const std::vector<Scene>& scenes,
                            std::size_t trial, std::uint64_t seed);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std, (n-1) denominator
};

struct TrialSummary {
  std::size_t trials = 0;
  bool single_trial = false;  // std is 0 by convention, flagged
  std::optional<MeanStd> ar;
  MeanStd min_ade1, min_fde1, min_ade6, min_fde6;
  std::optional<MeanStd> tau_g;
  std::optional<MeanStd> loo_ade;
  std::vector<std::pair<double, MeanStd>> ar_delta;  // per grid point

  std::string to_tsv() const;
};

// Mean and sample standard deviation per metric over trial rows. Optional
// metrics aggregate only the rows where they are present.
TrialSummary aggregate_trials(const std::vector<MetricsRow>& rows);

// (delta, value) pairs, one line per grid point, for external plotting.
std::string ar_curve_to_tsv(const std::vector<std::pair<double, double>>& curve);

}  // namespace scvae
