#include "scvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scvae {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Vae: return "vae";
    case Variant::Cvae: return "cvae";
    case Variant::SocialCvae: return "social-cvae";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "vae") return Variant::Vae;
  if (s == "cvae") return Variant::Cvae;
  if (s == "social-cvae") return Variant::SocialCvae;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

void VariantConfig::validate() const {
  if (hidden == 0 || latent == 0)
    throw std::invalid_argument("hidden and latent dims must be positive");
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (variant != Variant::SocialCvae && alpha != 0.0)
    throw std::invalid_argument("alpha > 0 is only meaningful for social-cvae");
  if (decoder_variance <= 0.0)
    throw std::invalid_argument("decoder variance must be positive");
  if (lanelet_points < 2 || lanelet_features < 2)
    throw std::invalid_argument("lanelet sampling needs >= 2 points and features");
}

Tensor kl_divergence(const DiagGaussian& q, const DiagGaussian& p) {
  // 0.5 * [ (lv_p - lv_q) + (var_q + (mu_q - mu_p)^2) / var_p - 1 ], averaged
  // over latent dimensions.
  Tensor diff = sub(q.mean, p.mean);
  Tensor ratio = mul(add(exp_(q.logvar), square(diff)), exp_(neg(p.logvar)));
  Tensor per_dim = add_scalar(add(sub(p.logvar, q.logvar), ratio), -1.0);
  return scale(mean(per_dim), 0.5);
}

Tensor reparam_sample(const DiagGaussian& d, const std::vector<double>& eps) {
  if (eps.size() != d.mean.size())
    throw std::invalid_argument("reparam_sample: noise dim " +
                                std::to_string(eps.size()) + " vs latent dim " +
                                std::to_string(d.mean.size()));
  Tensor sigma = exp_(scale(d.logvar, 0.5));
  return add(d.mean, mul(sigma, Tensor::vector(eps)));
}

Tensor track_leaf(const std::vector<Point>& pts, bool requires_grad) {
  std::vector<double> flat;
  flat.reserve(pts.size() * 2);
  for (const auto& p : pts) {
    flat.push_back(p[0]);
    flat.push_back(p[1]);
  }
  const std::size_t n = flat.size();
  return Tensor::leaf({n}, std::move(flat), requires_grad);
}

namespace {

constexpr std::size_t kEdgeDim = 5;  // rel dx, dy, heading, source-kind one-hot

double last_heading(const std::vector<Point>& pts) {
  for (std::size_t t = pts.size(); t-- > 1;) {
    const double dx = pts[t][0] - pts[t - 1][0];
    const double dy = pts[t][1] - pts[t - 1][1];
    if (std::hypot(dx, dy) > 1e-12) return std::atan2(dy, dx);
  }
  return 0.0;
}

std::vector<Point> resample_polyline(const std::vector<Point>& pts, std::size_t n) {
  if (pts.size() < 2) throw std::invalid_argument("resample: need >= 2 points");
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    cum[i] = cum[i - 1] + std::hypot(pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]);
  const double total = cum.back();
  std::vector<Point> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = total * double(k) / double(n - 1);
    std::size_t i = 1;
    while (i + 1 < pts.size() && cum[i] < s) ++i;
    const double seg = cum[i] - cum[i - 1];
    const double t = seg > 0.0 ? (s - cum[i - 1]) / seg : 0.0;
    out[k] = {pts[i - 1][0] + t * (pts[i][0] - pts[i - 1][0]),
              pts[i - 1][1] + t * (pts[i][1] - pts[i - 1][1])};
  }
  return out;
}

}  // namespace

Model::Model(VariantConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t H = cfg_.hidden, L = cfg_.latent;
  // Construction order is fixed: it defines the checkpoint/optimizer layout.
  hist_gru_ = GruCell(params_, "theta/hist_gru", H, 4, rng);
  lane_gru_ = GruCell(params_, "theta/lane_gru", H, 2 * cfg_.lanelet_features, rng);
  gamp_ = SparseGamp(params_, "theta/gamp", H, kEdgeDim, rng);
  future_gru_ = GruCell(params_, "psi/future_gru", H, 4, rng);
  post_head_ = Linear(params_, "psi/head", 2 * L, 2 * H, rng);
  dec_init_ = Linear(params_, "phi/init", H, H + L, rng);
  dec_gru_ = GruCell(params_, "phi/gru", H, 2, rng);
  dec_head_ = Linear(params_, "phi/head", 2, H, rng);
  if (cfg_.variant != Variant::Vae)
    prior_head_ = Linear(params_, "eta/head", 2 * L, H, rng);
  if (cfg_.variant == Variant::SocialCvae) {
    aux_init_ = Linear(params_, "zeta/init", H, H + L, rng);
    aux_gru_ = GruCell(params_, "zeta/gru", H, 2, rng);
    aux_head_ = Linear(params_, "zeta/head", 2, H, rng);
  }
}

Model::Encoded Model::encode(const Scene& scene, std::optional<std::size_t> masked,
                             std::size_t scene_id) const {
  Scene norm = scene.frame.applied ? scene : normalize(scene, scene.target);
  if (masked && *masked == norm.target)
    throw std::invalid_argument("cannot mask the target agent");

  Encoded enc;
  enc.target = norm.target;

  // Edge-feature geometry stays on the tape for agents so tau_g sees the
  // full Jacobian (position and heading paths included).
  struct NodeGeom {
    Tensor pos;      // size 2
    Tensor heading;  // size 1
  };
  std::map<std::size_t, NodeGeom> geom;
  std::vector<GraphNode> nodes;
  std::size_t max_agent_id = 0;

  for (const auto& a : norm.agents) {
    if (masked && a.id == *masked) continue;
    max_agent_id = std::max(max_agent_id, a.id);
    Tensor hist = track_leaf(a.history, /*requires_grad=*/true);
    enc.history.emplace(a.id, hist);
    nodes.push_back({a.id, NodeKind::Agent, encode_track_t(hist_gru_, hist)});

    const std::size_t T = a.history.size();
    Tensor heading = Tensor::vector({0.0});
    for (std::size_t t = T; t-- > 1;) {
      const double dx = a.history[t][0] - a.history[t - 1][0];
      const double dy = a.history[t][1] - a.history[t - 1][1];
      if (std::hypot(dx, dy) > 1e-12) {
        Tensor disp = sub(slice(hist, 2 * t, 2 * t + 2),
                          slice(hist, 2 * t - 2, 2 * t));
        heading = atan2_(slice(disp, 1, 2), slice(disp, 0, 1));
        break;
      }
    }
    geom[a.id] = {slice(hist, 2 * T - 2, 2 * T), heading};
  }

  if (!norm.lanes.empty()) {
    const auto& tgt = norm.agent(norm.target);
    double pathlen = 0.0;
    for (std::size_t t = 1; t < tgt.history.size(); ++t)
      pathlen += std::hypot(tgt.history[t][0] - tgt.history[t - 1][0],
                            tgt.history[t][1] - tgt.history[t - 1][1]);
    RoiConfig roi_cfg{std::max(15.0, 3.0 * pathlen), 0.0};
    roi_cfg.d_init = std::min(5.0, roi_cfg.d_max);
    auto roi = roi_graph_search(tgt.history.back(), roi_cfg, norm.lanes);
    std::size_t next_id = max_agent_id + 1;
    const std::size_t B = cfg_.lanelet_points, F = cfg_.lanelet_features;
    for (const auto& [seg_id, dist] : roi) {
      (void)dist;
      const LaneSegment& seg = norm.lanes.segment(seg_id);
      auto boundary = [&](const std::vector<Point>& pts) {
        auto rs = resample_polyline(pts, B);
        std::vector<double> flat;
        flat.reserve(B * F);
        for (const auto& p : rs) {
          flat.push_back(p[0]);
          flat.push_back(p[1]);
          for (std::size_t f = 2; f < F; ++f)
            flat.push_back(f == 3 && seg.discrete ? 1.0 : 0.0);
        }
        return Tensor::vector(std::move(flat));
      };
      Tensor emb = encode_lanelet_t(lane_gru_, boundary(seg.left), boundary(seg.right),
                                    B, F);
      nodes.push_back({next_id, NodeKind::Lanelet, emb});
      auto mid = resample_polyline(seg.centerline, 3);
      geom[next_id] = {Tensor::vector({mid[1][0], mid[1][1]}),
                       Tensor::vector({last_heading(seg.centerline)})};
      ++next_id;
    }
  }

  auto feature = [&](const GraphNode& src, const GraphNode& dst) {
    const auto& gs = geom.at(src.id);
    const auto& gd = geom.at(dst.id);
    return concat({sub(gs.pos, gd.pos),
                   wrap_angle(sub(gs.heading, gd.heading)),
                   Tensor::vector({src.kind == NodeKind::Agent ? 1.0 : 0.0,
                                   src.kind == NodeKind::Lanelet ? 1.0 : 0.0})});
  };
  enc.graph = make_context_graph(std::move(nodes), feature);

  auto out = gamp_(enc.graph, cfg_.aggregator, scene_id);
  enc.report = std::move(out.report);
  for (std::size_t a = 0; a < out.agent_nodes.size(); ++a)
    enc.context.emplace(enc.graph.nodes[out.agent_nodes[a]].id, out.context[a]);

  if (norm.pedestrian_mode) {
    for (const auto& a : norm.agents)
      if (!masked || a.id != *masked) enc.predicted.push_back(a.id);
  } else {
    enc.predicted.push_back(norm.target);
  }
  return enc;
}

DiagGaussian Model::posterior(const Tensor& context, const Tensor& future_flat) const {
  Tensor emb = encode_track_t(future_gru_, future_flat);
  Tensor out = post_head_(concat({context, emb}));
  const std::size_t L = cfg_.latent;
  return {slice(out, 0, L), slice(out, L, 2 * L)};
}

DiagGaussian Model::conditional_prior(const Tensor& context) const {
  if (cfg_.variant == Variant::Vae)
    throw std::logic_error("the VAE variant has no conditional prior");
  Tensor out = prior_head_(context);
  const std::size_t L = cfg_.latent;
  return {slice(out, 0, L), slice(out, L, 2 * L)};
}

DiagGaussian Model::standard_prior() const {
  return {Tensor::zeros({cfg_.latent}), Tensor::zeros({cfg_.latent})};
}

DiagGaussian Model::prior(const Tensor& context) const {
  return cfg_.variant == Variant::Vae ? standard_prior() : conditional_prior(context);
}

Tensor Model::rollout(const GruCell& gru, const Linear& init, const Linear& head,
                      const Tensor& context, const Tensor& z, std::size_t t_p,
                      const Point& origin) const {
  if (t_p == 0) throw std::invalid_argument("decode: horizon must be >= 1");
  Tensor h = tanh_(init(concat({context, z})));
  Tensor disp = Tensor::zeros({2});
  Tensor pos = Tensor::vector({origin[0], origin[1]});
  std::vector<Tensor> out;
  out.reserve(t_p);
  for (std::size_t t = 0; t < t_p; ++t) {
    h = gru.step(h, disp);
    disp = head(h);
    pos = add(pos, disp);
    out.push_back(pos);
  }
  return concat(out);
}

Tensor Model::decode(const Tensor& context, const Tensor& z, std::size_t t_p,
                     const Point& origin) const {
  return rollout(dec_gru_, dec_init_, dec_head_, context, z, t_p, origin);
}

Tensor Model::aux_decode(const Tensor& context, const Tensor& z, std::size_t t_p,
                         const Point& origin) const {
  if (cfg_.variant != Variant::SocialCvae)
    throw std::logic_error("only social-cvae carries the auxiliary decoder");
  return rollout(aux_gru_, aux_init_, aux_head_, context, z, t_p, origin);
}

void Model::set_beta(double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  cfg_.beta = beta;
}

Model::LossParts Model::loss(const Scene& scene, Rng& rng, Encoded* out_enc) const {
  Scene norm = scene.frame.applied ? scene : normalize(scene, scene.target);
  Encoded enc = encode(norm);
  if (enc.predicted.empty()) throw std::invalid_argument("no agents to predict");

  Tensor recon, kl, aux;
  for (std::size_t id : enc.predicted) {
    const auto& agent = norm.agent(id);
    const Tensor& T = enc.context.at(id);
    Tensor fut = track_leaf(agent.future);
    DiagGaussian q = posterior(T, fut);
    DiagGaussian pz = prior(T);

    std::vector<double> eps(cfg_.latent);
    for (double& e : eps) e = rng.normal();
    Tensor z = reparam_sample(q, eps);
    Tensor yhat = decode(T, z, agent.future.size(), agent.history.back());
    Tensor r = scale(mean(square(sub(yhat, fut))), 1.0 / cfg_.decoder_variance);
    recon = recon.defined() ? add(recon, r) : r;

    Tensor k = kl_divergence(q, pz);
    kl = kl.defined() ? add(kl, k) : k;

    if (cfg_.variant == Variant::SocialCvae && cfg_.alpha != 0.0) {
      std::vector<double> eps2(cfg_.latent);
      for (double& e : eps2) e = rng.normal();
      Tensor z2 = reparam_sample(pz, eps2);  // always drawn from p_eta
      Tensor yaux = aux_decode(T, z2, agent.future.size(), agent.history.back());
      Tensor a = scale(mean(square(sub(yaux, fut))), 1.0 / cfg_.decoder_variance);
      aux = aux.defined() ? add(aux, a) : a;
    }
  }
  const double inv_n = 1.0 / double(enc.predicted.size());
  LossParts parts;
  parts.reconstruction = scale(recon, inv_n);
  parts.kl = scale(kl, inv_n);
  parts.total = add(parts.reconstruction, scale(parts.kl, cfg_.beta));
  if (aux.defined()) {
    parts.aux = scale(aux, inv_n);
    parts.total = add(parts.total, scale(parts.aux, cfg_.alpha));
  }
  if (out_enc) *out_enc = std::move(enc);
  return parts;
}

std::vector<std::vector<Point>> Model::sample_trajectories(const Scene& scene,
                                                           std::size_t K,
                                                           Rng& rng) const {
  if (K < 1) throw std::invalid_argument("sample_trajectories: K must be >= 1");
  Scene norm = scene.frame.applied ? scene : normalize(scene, scene.target);
  Encoded enc = encode(norm);
  const auto& agent = norm.agent(norm.target);
  const Tensor& T = enc.context.at(norm.target);
  DiagGaussian pz = prior(T);

  auto to_points = [](const Tensor& flat) {
    std::vector<Point> pts(flat.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {flat[2 * i], flat[2 * i + 1]};
    return pts;
  };

  std::vector<std::vector<Point>> tracks;
  tracks.reserve(K);
  tracks.push_back(
      to_points(decode(T, pz.mean, agent.future.size(), agent.history.back())));
  for (std::size_t k = 1; k < K; ++k) {
    std::vector<double> eps(cfg_.latent);
    for (double& e : eps) e = rng.normal();
    Tensor z = reparam_sample(pz, eps);
    tracks.push_back(to_points(decode(T, z, agent.future.size(), agent.history.back())));
  }
  return tracks;
}

Model::MeanPrediction Model::predict_mean(const Scene& scene,
                                          std::optional<std::size_t> masked) const {
  Scene norm = scene.frame.applied ? scene : normalize(scene, scene.target);
  MeanPrediction out;
  out.encoded = encode(norm, masked);
  const auto& agent = norm.agent(norm.target);
  const Tensor& T = out.encoded.context.at(norm.target);
  DiagGaussian pz = prior(T);
  out.track = decode(T, pz.mean, agent.future.size(), agent.history.back());
  return out;
}

}  // namespace scvae
