#include "scvae/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "scvae/checkpoint.hpp"

namespace scvae {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
}

}  // namespace

const char* to_string(BetaSchedule s) {
  return s == BetaSchedule::Constant ? "constant" : "cyclical";
}

BetaSchedule beta_schedule_from_string(const std::string& s) {
  if (s == "constant") return BetaSchedule::Constant;
  if (s == "cyclical") return BetaSchedule::Cyclical;
  throw std::invalid_argument("unknown beta schedule '" + s + "'");
}

double beta_at(std::size_t epoch, BetaSchedule schedule, double beta_max) {
  if (schedule == BetaSchedule::Constant) return beta_max;
  const double phase = double(epoch % 25) / 12.5;
  return beta_max * std::min(1.0, phase);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0)
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
}

Adam::Adam(ParamStore& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params.items()) {
    (void)name;
    params_.push_back(t);
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    const auto& grad = params_[p].grad();
    auto& value = params_[p].mutable_values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g;
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g * g;
      value[i] -= lr_ * (m_[p][i] / c1) / (std::sqrt(v_[p][i] / c2) + eps_);
    }
  }
}

SplitIndices split_dataset(std::size_t count, double validation_fraction,
                           std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(Rng::mix(seed, 0x5b1f7));
  shuffle_indices(idx, rng);
  const std::size_t n_val = std::size_t(std::llround(double(count) * validation_fraction));
  SplitIndices out;
  out.validation.assign(idx.begin(), idx.begin() + n_val);
  out.train.assign(idx.begin() + n_val, idx.end());
  return out;
}

std::string TrainResult::log_to_tsv() const {
  std::string out =
      "epoch\tbeta\ttrain_total\ttrain_recon\ttrain_kl\ttrain_aux\tval_total\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch);
    for (double v : {e.beta, e.train_total, e.train_recon, e.train_kl, e.train_aux,
                     e.val_total}) {
      out += '\t';
      out += fmt(v);
    }
    out += '\n';
  }
  return out;
}

TrainResult train(const std::vector<Scene>& scenes, const VariantConfig& vcfg,
                  const TrainConfig& tcfg) {
  vcfg.validate();
  tcfg.validate();
  if (scenes.empty()) throw std::invalid_argument("train: empty dataset");

  Model model(vcfg, Rng::mix(tcfg.seed, 1));
  Adam adam(model.params(), tcfg.lr);

  auto split = split_dataset(scenes.size(), tcfg.validation_fraction, tcfg.seed);
  const auto& val = split.validation;

  TrainResult result;
  double best_val = 0.0;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double beta = beta_at(epoch, tcfg.schedule, vcfg.beta);
    model.set_beta(beta);

    Rng shuffle_rng(Rng::mix(tcfg.seed, 1000 + epoch));
    Rng noise_rng(Rng::mix(tcfg.seed, 2000 + epoch));
    std::vector<std::size_t> order = split.train;
    shuffle_indices(order, shuffle_rng);

    EpochLog entry;
    entry.epoch = epoch;
    entry.beta = beta;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += tcfg.batch_size) {
      const std::size_t end = std::min(begin + tcfg.batch_size, order.size());
      const double inv = 1.0 / double(end - begin);
      model.params().zero_grad();
      // Leaf grads accumulate across backward calls, so running backward per
      // scene (each scaled by 1/batch) matches a summed batch graph while
      // keeping only one scene's tape alive at a time.
      double total = 0.0, recon = 0.0, kl = 0.0, aux = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        auto parts = model.loss(scenes[order[k]], noise_rng);
        backward(scale(parts.total, inv));
        total += parts.total.item() * inv;
        recon += parts.reconstruction.item() * inv;
        kl += parts.kl.item() * inv;
        if (parts.aux.defined()) aux += parts.aux.item() * inv;
      }
      if (!std::isfinite(total))
        throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batches));
      adam.step();

      entry.train_total += total;
      entry.train_recon += recon;
      entry.train_kl += kl;
      entry.train_aux += aux;
      ++batches;
    }
    entry.train_total /= double(batches);
    entry.train_recon /= double(batches);
    entry.train_kl /= double(batches);
    entry.train_aux /= double(batches);

    // Validation at beta_max so epochs are comparable under annealing. A run
    // without a validation split falls back to the epoch's training loss so
    // best-checkpoint selection stays defined.
    if (!val.empty()) {
      model.set_beta(vcfg.beta);
      Rng val_rng(Rng::mix(tcfg.seed, 3000 + epoch));
      double val_total = 0.0;
      for (std::size_t k : val) val_total += model.loss(scenes[k], val_rng).total_value();
      entry.val_total = val_total / double(val.size());
      model.params().zero_grad();
    } else {
      entry.val_total = entry.train_total;
    }

    if (result.log.empty() || entry.val_total < best_val) {
      best_val = entry.val_total;
      result.best_epoch = epoch;
      result.best_checkpoint = checkpoint_to_string(model);
    }
    result.log.push_back(entry);
  }

  model.set_beta(vcfg.beta);
  result.final_checkpoint = checkpoint_to_string(model);
  return result;
}

}  // namespace scvae
