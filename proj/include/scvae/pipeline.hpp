#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scvae/metrics.hpp"
#include "scvae/trainer.hpp"
#include "scvae/world.hpp"

namespace scvae {

// Library implementations of the CLI subcommands. Every function writes its
// outputs atomically (write-then-rename) and is deterministic given the same
// inputs, so a rerun with identical flags reproduces identical bytes.

struct GenDataReport {
  std::size_t count = 0;
  InteractivityCertificate certificate;
};
GenDataReport run_gen_data(Template tmpl, std::size_t count, std::uint64_t seed,
                           const std::string& out_path);

// Runs `trials` seeded trainings (trial seed = Rng::mix(seed, trial)) and
// writes trial<t>.final.ckpt, trial<t>.best.ckpt, and trial<t>.loss.tsv into
// `out_dir`. A batch size of 0 selects the mode default (40 driving / 20
// pedestrian), and a latent size of 0 likewise (16 driving / 32 pedestrian).
struct TrainRunReport {
  std::vector<std::string> final_checkpoints;
  std::vector<std::string> best_checkpoints;
  std::vector<std::size_t> best_epochs;
};
TrainRunReport run_train(const std::string& data_path, VariantConfig vcfg,
                         TrainConfig tcfg, std::size_t trials,
                         const std::string& out_dir);

// Evaluates each checkpoint over the dataset and writes metrics.tsv (one row
// per checkpoint) plus, per (variant, aggregator) group, summary_*.tsv and
// ar_delta_*.tsv. `ks` must be a non-empty subset of {1, 6} (the prediction
// counts the metrics are defined over).
struct EvaluateReport {
  std::vector<MetricsRow> rows;
  std::vector<TrialSummary> summaries;  // one per (variant, aggregator) group
};
EvaluateReport run_evaluate(const std::string& data_path,
                            const std::vector<std::string>& checkpoint_paths,
                            const std::vector<int>& ks, std::uint64_t seed,
                            const std::string& out_dir);

// Writes the per-scene collapse-diagnostic table for the requested metric
// names (subset of {"ar", "taug", "looade"}). Requesting "ar" against a
// max-aggregation checkpoint is refused.
void run_diagnose(const std::string& data_path, const std::string& checkpoint_path,
                  const std::vector<std::string>& metric_names,
                  const std::string& out_path);

}  // namespace scvae
