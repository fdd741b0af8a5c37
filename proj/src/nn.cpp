#include "scvae/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace scvae {

Tensor ParamStore::insert(const std::string& name, Tensor t) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  items_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::create(const std::string& name, std::vector<std::size_t> shape,
                          Rng& rng) {
  const std::size_t fan_in = shape.empty() ? 1 : shape.back();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return insert(name, Tensor::leaf(std::move(shape), std::move(v), true));
}

Tensor ParamStore::create_const(const std::string& name, std::vector<std::size_t> shape,
                                double value) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return insert(name, Tensor::leaf(std::move(shape), std::vector<double>(n, value), true));
}

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& [k, t] : items_)
    if (k == name) return t;
  throw std::invalid_argument("ParamStore: unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& [k, t] : items_)
    if (k == name) return true;
  return false;
}

void ParamStore::zero_grad() {
  for (auto& [k, t] : items_) t.zero_grad();
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [k, t] : items_) n += t.size();
  return n;
}

Linear::Linear(ParamStore& ps, const std::string& name, std::size_t out, std::size_t in,
               Rng& rng)
    : weight(ps.create(name + ".w", {out, in}, rng)),
      bias(ps.create_const(name + ".b", {out}, 0.0)) {}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.shape().size() != 1 || x.size() != weight.cols())
    throw std::invalid_argument("Linear: input size " + std::to_string(x.size()) +
                                " does not match weight cols " +
                                std::to_string(weight.cols()));
  return add(matmul(weight, x), bias);
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, std::size_t dim)
    : gain(ps.create_const(name + ".g", {dim}, 1.0)),
      bias(ps.create_const(name + ".bias", {dim}, 0.0)) {}

OneLayerMlp::OneLayerMlp(ParamStore& ps, const std::string& name, std::size_t out,
                         std::size_t in, Rng& rng)
    : lin(ps, name, out, in, rng), ln(ps, name + ".ln", out) {}

GruCell::GruCell(ParamStore& ps, const std::string& name, std::size_t hidden,
                 std::size_t input, Rng& rng)
    : in_r(ps, name + ".ir", hidden, input, rng),
      in_u(ps, name + ".iu", hidden, input, rng),
      in_c(ps, name + ".ic", hidden, input, rng),
      rec_r(ps, name + ".rr", hidden, hidden, rng),
      rec_u(ps, name + ".ru", hidden, hidden, rng),
      rec_c(ps, name + ".rc", hidden, hidden, rng) {}

Tensor GruCell::step(const Tensor& h, const Tensor& x) const {
  if (h.size() != hidden_dim())
    throw std::invalid_argument("GruCell: hidden size mismatch");
  Tensor r = sigmoid(add(in_r(x), rec_r(h)));
  Tensor u = sigmoid(add(in_u(x), rec_u(h)));
  Tensor c = tanh_(add(in_c(x), rec_c(mul(r, h))));
  return add(mul(u, h), mul(rsub_scalar(1.0, u), c));
}

Tensor encode_track_t(const GruCell& gru, const Tensor& flat_points) {
  if (flat_points.size() == 0 || flat_points.size() % 2 != 0)
    throw std::invalid_argument("encode_track: need a non-empty (2T) coordinate tensor");
  const std::size_t steps = flat_points.size() / 2;
  Tensor h = Tensor::zeros({gru.hidden_dim()});
  Tensor first = slice(flat_points, 0, 2);
  Tensor zero2 = Tensor::zeros({2});
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor disp = t == 0 ? zero2
                         : sub(slice(flat_points, 2 * t, 2 * t + 2),
                               slice(flat_points, 2 * (t - 1), 2 * t));
    h = gru.step(h, concat({disp, first}));
  }
  return h;
}

Tensor encode_track(const GruCell& gru, const std::vector<std::array<double, 2>>& points) {
  if (points.empty()) throw std::invalid_argument("encode_track: empty sequence");
  std::vector<double> flat;
  flat.reserve(points.size() * 2);
  for (const auto& p : points) {
    flat.push_back(p[0]);
    flat.push_back(p[1]);
  }
  return encode_track_t(gru, Tensor::vector(std::move(flat)));
}

Tensor encode_lanelet_t(const GruCell& gru, const Tensor& left, const Tensor& right,
                        std::size_t points, std::size_t features) {
  if (left.size() != points * features || right.size() != points * features)
    throw std::invalid_argument("encode_lanelet: boundary sizes do not match B x F");
  if (2 * features != gru.input_dim())
    throw std::invalid_argument("encode_lanelet: feature width mismatch");
  Tensor h = Tensor::zeros({gru.hidden_dim()});
  for (std::size_t t = 0; t < points; ++t) {
    Tensor feat = concat({slice(left, t * features, (t + 1) * features),
                          slice(right, t * features, (t + 1) * features)});
    h = gru.step(h, feat);
  }
  return h;
}

Tensor encode_lanelet(const GruCell& gru,
                      const std::vector<std::vector<double>>& left,
                      const std::vector<std::vector<double>>& right) {
  if (left.size() != right.size())
    throw std::invalid_argument("encode_lanelet: boundary point counts differ (" +
                                std::to_string(left.size()) + " vs " +
                                std::to_string(right.size()) + ")");
  if (left.empty()) throw std::invalid_argument("encode_lanelet: empty boundaries");
  const std::size_t features = left.front().size();
  auto flatten = [&](const std::vector<std::vector<double>>& b) {
    std::vector<double> flat;
    flat.reserve(b.size() * features);
    for (const auto& row : b) {
      if (row.size() != features)
        throw std::invalid_argument("encode_lanelet: ragged boundary features");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return Tensor::vector(std::move(flat));
  };
  return encode_lanelet_t(gru, flatten(left), flatten(right), left.size(), features);
}

}  // namespace scvae
