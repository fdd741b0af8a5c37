#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scvae/model.hpp"

namespace scvae {

enum class BetaSchedule { Constant, Cyclical };

const char* to_string(BetaSchedule s);
BetaSchedule beta_schedule_from_string(const std::string& s);

// Cyclical annealing: beta_max * min(1, (epoch mod 25) / 12.5) — a linear
// ramp over the first half of each 25-epoch cycle, flat over the second.
double beta_at(std::size_t epoch, BetaSchedule schedule, double beta_max);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 40;  // 20 for pedestrian datasets
  double lr = 1e-3;
  BetaSchedule schedule = BetaSchedule::Constant;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Adam with bias correction over every tensor of a ParamStore. step() reads
// the accumulated gradients and updates the parameter values in place; the
// caller owns zeroing gradients between batches.
class Adam {
 public:
  explicit Adam(ParamStore& params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double beta = 0.0;
  double train_total = 0.0;
  double train_recon = 0.0;
  double train_kl = 0.0;
  double train_aux = 0.0;  // 0 when the variant has no auxiliary term
  double val_total = 0.0;  // scored at beta_max for cross-epoch comparability
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::string final_checkpoint;  // checkpoint_to_string bytes
  std::string best_checkpoint;   // lowest validation loss

  std::string log_to_tsv() const;
};

// Deterministic per (scenes, configs, seed): the seed drives initialization,
// the train/validation split, per-epoch shuffling, and reparameterization
// noise. Throws std::runtime_error naming epoch and batch on non-finite loss.
TrainResult train(const std::vector<Scene>& scenes, const VariantConfig& vcfg,
                  const TrainConfig& tcfg);

// Seed-stable 90/10 partition used by train(); exposed for evaluation runs.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
SplitIndices split_dataset(std::size_t count, double validation_fraction,
                           std::uint64_t seed);

}  // namespace scvae
