#pragma once

#include <array>
#include <string>
#include <vector>

#include "scvae/rng.hpp"
#include "scvae/tensor.hpp"

namespace scvae {

// Ordered, named collection of trainable leaf tensors. Names are prefixed by
// parameter group (theta/, psi/, phi/, eta/, zeta/) so checkpoints and the
// optimizer see a stable flat list.
class ParamStore {
 public:
  // Weight matrices: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  Tensor create(const std::string& name, std::vector<std::size_t> shape, Rng& rng);
  Tensor create_const(const std::string& name, std::vector<std::size_t> shape, double v);

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  Tensor find(const std::string& name) const;
  bool contains(const std::string& name) const;
  void zero_grad();
  std::size_t total_values() const;

 private:
  Tensor insert(const std::string& name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> items_;
};

struct Linear {
  Tensor weight;  // (out, in)
  Tensor bias;    // (out)

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, std::size_t out, std::size_t in,
         Rng& rng);
  Tensor operator()(const Tensor& x) const;
  std::size_t in_dim() const { return weight.cols(); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, std::size_t dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }
};

// One-layer MLP: layer-normalized affine map. With all parameters zero the
// output equals the layer-norm bias pattern, independent of the input.
struct OneLayerMlp {
  Linear lin;
  LayerNorm ln;

  OneLayerMlp() = default;
  OneLayerMlp(ParamStore& ps, const std::string& name, std::size_t out, std::size_t in,
              Rng& rng);
  Tensor operator()(const Tensor& x) const { return ln(lin(x)); }
};

// Standard GRU cell, hidden size fixed at construction.
//   r = sigmoid(W_r x + U_r h + b_r)
//   u = sigmoid(W_u x + U_u h + b_u)
//   c = tanh(W_c x + U_c (r . h) + b_c)
//   h' = u . h + (1 - u) . c
struct GruCell {
  Linear in_r, in_u, in_c;   // input-to-hidden (bias carries b_*)
  Linear rec_r, rec_u, rec_c;  // hidden-to-hidden, bias zero-initialized

  GruCell() = default;
  GruCell(ParamStore& ps, const std::string& name, std::size_t hidden, std::size_t input,
          Rng& rng);
  Tensor step(const Tensor& h, const Tensor& x) const;
  std::size_t hidden_dim() const { return in_r.weight.rows(); }
  std::size_t input_dim() const { return in_r.weight.cols(); }
};

// Encodes a 2-D point sequence into the GRU's final hidden state. Inputs per
// step are the displacement from the previous point plus the absolute first
// point of the track (input dim 4).
Tensor encode_track(const GruCell& gru, const std::vector<std::array<double, 2>>& points);

// Same encoder over a flat (2T) tensor of interleaved x,y coordinates, so
// gradients can flow back into the track points themselves.
Tensor encode_track_t(const GruCell& gru, const Tensor& flat_points);

// Encodes a lanelet from its two boundaries (B points x F features each) via
// a GRU over the per-index concatenation (input dim 2F).
Tensor encode_lanelet(const GruCell& gru,
                      const std::vector<std::vector<double>>& left,
                      const std::vector<std::vector<double>>& right);

// Tensor-input variant; left/right are flat (B*F) tensors.
Tensor encode_lanelet_t(const GruCell& gru, const Tensor& left, const Tensor& right,
                        std::size_t points, std::size_t features);

}  // namespace scvae
