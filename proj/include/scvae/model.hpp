#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scvae/graph.hpp"
#include "scvae/nn.hpp"
#include "scvae/scene.hpp"

namespace scvae {

enum class Variant { Vae, Cvae, SocialCvae };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct VariantConfig {
  Variant variant = Variant::SocialCvae;
  std::size_t hidden = 64;
  std::size_t latent = 16;  // 16 for driving configs, 32 for pedestrian
  double beta = 0.03;
  double alpha = 0.3;  // auxiliary weight, > 0 only for SocialCvae
  Aggregator aggregator = Aggregator::Entmax;
  double decoder_variance = 1.0;  // fixed; only rescales the MSE term
  std::size_t lanelet_points = 8;    // B
  std::size_t lanelet_features = 4;  // F: x, y, boundary type, discrete flag

  void validate() const;
};

struct DiagGaussian {
  Tensor mean;
  Tensor logvar;
};

// KL(q || p) for diagonal Gaussians, averaged over latent dimensions.
Tensor kl_divergence(const DiagGaussian& q, const DiagGaussian& p);

// z = mean + exp(logvar / 2) * eps with a frozen noise draw.
Tensor reparam_sample(const DiagGaussian& d, const std::vector<double>& eps);

// One model variant: shared context encoder (theta), posterior (psi), decoder
// (phi), conditional prior (eta, CVAE/SocialCvae) and auxiliary decoder
// (zeta, SocialCvae only). Parameter names carry these prefixes so the
// optimizer and checkpoints see one flat list.
class Model {
 public:
  Model(VariantConfig cfg, std::uint64_t seed);

  const VariantConfig& config() const { return cfg_; }
  // Cyclical annealing updates the KL weight between epochs.
  void set_beta(double beta);
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Encoded {
    ContextGraph graph;
    AttentionReport report;
    std::map<std::size_t, Tensor> context;  // agent id -> T_i
    std::map<std::size_t, Tensor> history;  // agent id -> grad-enabled leaf (2*T_h)
    std::vector<std::size_t> predicted;     // agent ids the loss covers
    std::size_t target = 0;
  };

  // Builds the interaction graph (normalizing the scene first if needed),
  // runs sparse-GAMP once, and returns per-agent context embeddings.
  // `masked` removes that agent from the scene before encoding (looADE).
  Encoded encode(const Scene& scene,
                 std::optional<std::size_t> masked = std::nullopt,
                 std::size_t scene_id = 0) const;

  DiagGaussian posterior(const Tensor& context, const Tensor& future_flat) const;
  // Conditional prior p_eta under CVAE/SocialCvae; N(0, I) under VAE is
  // available via standard_prior(). Calling this under VAE throws.
  DiagGaussian conditional_prior(const Tensor& context) const;
  DiagGaussian prior(const Tensor& context) const;  // variant-aware dispatch
  DiagGaussian standard_prior() const;

  // Autonomous GRU rollout emitting per-step displacements accumulated from
  // `origin` (the agent's last observed point). Returns a flat (2*t_p) track.
  Tensor decode(const Tensor& context, const Tensor& z, std::size_t t_p,
                const Point& origin) const;
  // SocialCvae's separate decoder (parameters zeta); throws otherwise.
  Tensor aux_decode(const Tensor& context, const Tensor& z, std::size_t t_p,
                    const Point& origin) const;

  struct LossParts {
    Tensor total;
    Tensor reconstruction;
    Tensor kl;
    Tensor aux;  // undefined tensor unless SocialCvae
    double total_value() const { return total.item(); }
  };
  // loss = MSE(recon) + beta * KL(q || prior) + alpha * MSE(aux), averaged
  // over predicted agents; `rng` supplies the frozen reparameterization noise.
  // `out_enc` optionally exposes the encoding (gradient-flow audits).
  LossParts loss(const Scene& scene, Rng& rng, Encoded* out_enc = nullptr) const;

  // K predicted tracks for the target agent: the prior-mean track plus K-1
  // random prior draws (K = 1 gives just the mean track).
  std::vector<std::vector<Point>> sample_trajectories(const Scene& scene,
                                                      std::size_t K, Rng& rng) const;

  // Mean-latent prediction with the tape kept alive for Jacobian probes.
  struct MeanPrediction {
    Encoded encoded;
    Tensor track;  // flat 2*t_p, target agent
  };
  MeanPrediction predict_mean(const Scene& scene,
                              std::optional<std::size_t> masked = std::nullopt) const;

 private:
  Tensor rollout(const GruCell& gru, const Linear& init, const Linear& head,
                 const Tensor& context, const Tensor& z, std::size_t t_p,
                 const Point& origin) const;

  VariantConfig cfg_;
  ParamStore params_;
  GruCell hist_gru_, lane_gru_, future_gru_, dec_gru_, aux_gru_;
  SparseGamp gamp_;
  Linear post_head_, prior_head_, dec_init_, dec_head_, aux_init_, aux_head_;
};

// Flattens a track into the interleaved (x0, y0, x1, y1, ...) layout used by
// the encoders, as a grad-enabled leaf.
Tensor track_leaf(const std::vector<Point>& pts, bool requires_grad = false);

}  // namespace scvae
