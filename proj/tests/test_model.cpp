#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scvae/gradcheck.hpp"
#include "scvae/model.hpp"
#include "scvae/world.hpp"

using namespace scvae;

namespace {

VariantConfig tiny(Variant v, Aggregator agg = Aggregator::Entmax) {
  VariantConfig cfg;
  cfg.variant = v;
  cfg.hidden = 16;
  cfg.latent = 4;
  cfg.lanelet_points = 4;
  cfg.alpha = v == Variant::SocialCvae ? 0.3 : 0.0;
  cfg.aggregator = agg;
  return cfg;
}

Scene merge_scene(std::uint64_t seed = 3) {
  return generate(default_config(Template::Merge), 1, seed)[0];
}

Scene ped_scene(std::uint64_t seed = 3) {
  return generate(default_config(Template::OpenField), 1, seed)[0];
}

double sum_abs_grad(const ParamStore& ps, const std::string& prefix) {
  double total = 0.0;
  for (const auto& [name, t] : ps.items())
    if (name.starts_with(prefix))
      for (double g : t.grad()) total += std::abs(g);
  return total;
}

}  // namespace

TEST_CASE("config invariants") {
  CHECK_NOTHROW(tiny(Variant::SocialCvae).validate());
  auto bad = tiny(Variant::Cvae);
  bad.alpha = 0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  auto neg = tiny(Variant::SocialCvae);
  neg.beta = -0.1;
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}

TEST_CASE("parameter groups exist per variant") {
  Model vae(tiny(Variant::Vae), 1);
  Model cvae(tiny(Variant::Cvae), 1);
  Model soc(tiny(Variant::SocialCvae), 1);
  auto has_prefix = [](const ParamStore& ps, const std::string& p) {
    for (const auto& [name, t] : ps.items())
      if (name.starts_with(p)) return true;
    return false;
  };
  for (const Model* m : {&vae, &cvae, &soc}) {
    CHECK(has_prefix(m->params(), "theta/"));
    CHECK(has_prefix(m->params(), "psi/"));
    CHECK(has_prefix(m->params(), "phi/"));
  }
  CHECK(!has_prefix(vae.params(), "eta/"));
  CHECK(has_prefix(cvae.params(), "eta/"));
  CHECK(has_prefix(soc.params(), "eta/"));
  CHECK(!has_prefix(vae.params(), "zeta/"));
  CHECK(!has_prefix(cvae.params(), "zeta/"));
  CHECK(has_prefix(soc.params(), "zeta/"));
}

TEST_CASE("encoding covers agents and lanelets; masking removes a node") {
  Model m(tiny(Variant::SocialCvae), 7);
  auto scene = merge_scene();
  auto enc = m.encode(scene);
  CHECK(enc.context.size() == scene.agents.size());
  bool lanelet_edges = false;
  for (const auto& r : enc.report.records)
    lanelet_edges |= r.source_kind == NodeKind::Lanelet;
  CHECK(lanelet_edges);

  // Mask a non-target agent: its node and history disappear.
  std::size_t other = scene.agents[0].id == scene.target ? scene.agents[1].id
                                                         : scene.agents[0].id;
  auto masked = m.encode(scene, other);
  CHECK(masked.context.count(other) == 0);
  CHECK(masked.history.count(other) == 0);
  CHECK_THROWS_AS(m.encode(scene, scene.target), std::invalid_argument);
}

TEST_CASE("posterior factorizes: other agents' futures don't touch agent i") {
  Model m(tiny(Variant::Cvae), 11);
  auto scene = ped_scene();
  REQUIRE(scene.agents.size() >= 2);
  Scene n = normalize(scene, scene.target);
  auto enc = m.encode(n);
  const auto& a0 = n.agents[0];
  DiagGaussian q1 = m.posterior(enc.context.at(a0.id), track_leaf(a0.future));

  // Perturb every other agent's future; T_i depends only on histories.
  Scene mod = n;
  for (std::size_t i = 1; i < mod.agents.size(); ++i)
    for (auto& p : mod.agents[i].future) p[0] += 100.0;
  auto enc2 = m.encode(mod);
  DiagGaussian q2 = m.posterior(enc2.context.at(a0.id), track_leaf(a0.future));
  CHECK(q1.mean.values() == q2.mean.values());
  CHECK(q1.logvar.values() == q2.logvar.values());
}

TEST_CASE("zero-weight posterior head gives a standard-normal parameterization") {
  Model m(tiny(Variant::Cvae), 13);
  for (const auto& [name, t] : m.params().items()) {
    if (!name.starts_with("psi/head")) continue;
    Tensor h = t;
    std::fill(h.mutable_values().begin(), h.mutable_values().end(), 0.0);
  }
  auto scene = merge_scene();
  Scene n = normalize(scene, scene.target);
  auto enc = m.encode(n);
  auto q = m.posterior(enc.context.at(n.target), track_leaf(n.agent(n.target).future));
  for (double v : q.mean.values()) CHECK(v == 0.0);
  for (double v : q.logvar.values()) CHECK(v == 0.0);
}

TEST_CASE("posterior gradients pass finite differences") {
  Model m(tiny(Variant::Cvae), 17);
  Rng rng(5);
  std::vector<double> ctx(16), fut(12), probe(8);
  for (double& v : ctx) v = rng.uniform(-1, 1);
  for (double& v : fut) v = rng.uniform(-1, 1);
  for (double& v : probe) v = rng.uniform(-1, 1);
  Tensor context = Tensor::vector(ctx);
  auto f = [&](const Tensor& x) {
    auto q = m.posterior(context, x);
    return sum(mul(concat({q.mean, q.logvar}), Tensor::vector(probe)));
  };
  CHECK(finite_diff_check(f, Tensor::vector(fut)).max_rel_error < 1e-5);

  Tensor future = Tensor::vector(fut);
  auto g = [&](const Tensor& x) {
    auto q = m.posterior(x, future);
    return sum(mul(concat({q.mean, q.logvar}), Tensor::vector(probe)));
  };
  CHECK(finite_diff_check(g, context).max_rel_error < 1e-5);
}

TEST_CASE("conditional prior: VAE refuses, identical contexts agree") {
  Model vae(tiny(Variant::Vae), 19);
  Tensor T = Tensor::vector(std::vector<double>(16, 0.3));
  CHECK_THROWS_AS(vae.conditional_prior(T), std::logic_error);
  auto std_prior = vae.prior(T);
  for (double v : std_prior.mean.values()) CHECK(v == 0.0);
  for (double v : std_prior.logvar.values()) CHECK(v == 0.0);

  Model cvae(tiny(Variant::Cvae), 19);
  auto p1 = cvae.conditional_prior(T);
  auto p2 = cvae.conditional_prior(T);
  CHECK(p1.mean.values() == p2.mean.values());
  CHECK(p1.logvar.values() == p2.logvar.values());
}

TEST_CASE("KL is zero when posterior and prior parameters coincide") {
  Tensor mu = Tensor::vector({0.2, -0.4, 1.0});
  Tensor lv = Tensor::vector({0.1, -0.3, 0.0});
  auto kl = kl_divergence({mu, lv}, {mu, lv});
  CHECK(kl.item() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("analytic KL matches a Monte-Carlo estimate within 1%") {
  DiagGaussian q{Tensor::vector({0.5, -0.8, 0.1}), Tensor::vector({0.2, -0.5, 0.7})};
  DiagGaussian p{Tensor::vector({-0.3, 0.2, 0.4}), Tensor::vector({-0.1, 0.3, 0.0})};
  const double analytic = kl_divergence(q, p).item();

  Rng rng(123456);
  const std::size_t N = 1000000, L = 3;
  double acc = 0.0;
  for (std::size_t s = 0; s < N; ++s) {
    for (std::size_t i = 0; i < L; ++i) {
      const double sq = std::exp(0.5 * q.logvar[i]);
      const double z = q.mean[i] + sq * rng.normal();
      const double lq = -0.5 * (q.logvar[i] + (z - q.mean[i]) * (z - q.mean[i]) /
                                                  std::exp(q.logvar[i]));
      const double lp = -0.5 * (p.logvar[i] + (z - p.mean[i]) * (z - p.mean[i]) /
                                                  std::exp(p.logvar[i]));
      acc += lq - lp;
    }
  }
  const double mc = acc / double(N) / double(L);
  CHECK(std::abs(mc - analytic) / std::abs(analytic) < 0.01);
}

TEST_CASE("reparameterization gradient wrt log-variance is exact") {
  Rng rng(31);
  std::vector<double> eps(4), mu(4), lv(4);
  for (double& v : eps) v = rng.normal();
  for (double& v : mu) v = rng.uniform(-1, 1);
  for (double& v : lv) v = rng.uniform(-1, 1);
  Tensor mean = Tensor::vector(mu);
  auto f = [&](const Tensor& x) {
    return sum(square(reparam_sample({mean, x}, eps)));
  };
  auto res = finite_diff_check(f, Tensor::vector(lv));
  CHECK(res.max_rel_error < 1e-5);

  // Against the hand-derived value: d||z||^2/dlv_i = z_i * eps_i * exp(lv_i/2).
  Tensor lvt = Tensor::leaf({4}, lv, true);
  Tensor z = reparam_sample({mean, lvt}, eps);
  backward(sum(square(z)));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(lvt.grad()[i] ==
          doctest::Approx(z[i] * eps[i] * std::exp(0.5 * lv[i])).epsilon(1e-10));
}

TEST_CASE("decoder: zero weights hold the origin, outputs deterministic") {
  Model m(tiny(Variant::Cvae), 23);
  Tensor T = Tensor::vector(std::vector<double>(16, 0.2));
  Tensor z = Tensor::vector(std::vector<double>(4, -0.1));
  Tensor t1 = m.decode(T, z, 6, {2.0, -1.0});
  Tensor t2 = m.decode(T, z, 6, {2.0, -1.0});
  CHECK(t1.values() == t2.values());
  CHECK_THROWS_AS(m.decode(T, z, 0, {0, 0}), std::invalid_argument);

  for (const auto& [name, t] : m.params().items()) {
    if (!name.starts_with("phi/")) continue;
    Tensor h = t;
    std::fill(h.mutable_values().begin(), h.mutable_values().end(), 0.0);
  }
  Tensor flat = m.decode(T, z, 5, {2.0, -1.0});
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(flat[2 * i] == 2.0);
    CHECK(flat[2 * i + 1] == -1.0);
  }
}

TEST_CASE("decoder gradient flows through the latent") {
  Model m(tiny(Variant::Cvae), 29);
  Rng rng(7);
  std::vector<double> ctx(16), zv(4);
  for (double& v : ctx) v = rng.uniform(-1, 1);
  for (double& v : zv) v = rng.uniform(-1, 1);
  Tensor T = Tensor::vector(ctx);
  auto f = [&](const Tensor& z) { return mean(square(m.decode(T, z, 4, {0, 0}))); };
  auto res = finite_diff_check(f, Tensor::vector(zv));
  CHECK(res.max_rel_error < 1e-5);
  CHECK(res.coordinates_checked > 0);
}

TEST_CASE("auxiliary decoder is separate and variant-gated") {
  Model cvae(tiny(Variant::Cvae), 37);
  Tensor T = Tensor::vector(std::vector<double>(16, 0.1));
  Tensor z = Tensor::vector(std::vector<double>(4, 0.1));
  CHECK_THROWS_AS(cvae.aux_decode(T, z, 3, {0, 0}), std::logic_error);

  Model soc(tiny(Variant::SocialCvae), 37);
  Tensor before = soc.decode(T, z, 3, {0, 0});
  for (const auto& [name, t] : soc.params().items()) {
    if (!name.starts_with("zeta/")) continue;
    Tensor h = t;
    for (double& v : h.mutable_values()) v += 0.5;
  }
  Tensor after = soc.decode(T, z, 3, {0, 0});
  CHECK(before.values() == after.values());  // phi untouched by zeta updates
}

TEST_CASE("aux loss gradient reaches theta and eta but not phi or psi") {
  Model m(tiny(Variant::SocialCvae), 41);
  Rng rng(1);
  auto parts = m.loss(merge_scene(), rng);
  REQUIRE(parts.aux.defined());
  m.params().zero_grad();
  backward(parts.aux);
  CHECK(sum_abs_grad(m.params(), "theta/") > 0.0);
  CHECK(sum_abs_grad(m.params(), "eta/") > 0.0);
  CHECK(sum_abs_grad(m.params(), "zeta/") > 0.0);
  CHECK(sum_abs_grad(m.params(), "phi/") == 0.0);
  CHECK(sum_abs_grad(m.params(), "psi/") == 0.0);
}

TEST_CASE("loss decomposes into its reported components") {
  for (auto v : {Variant::Vae, Variant::Cvae, Variant::SocialCvae}) {
    Model m(tiny(v), 43);
    Rng rng(2);
    auto parts = m.loss(merge_scene(), rng);
    double expect = parts.reconstruction.item() + m.config().beta * parts.kl.item();
    if (parts.aux.defined()) expect += m.config().alpha * parts.aux.item();
    CHECK(std::abs(parts.total.item() - expect) < 1e-12);
    CHECK(parts.kl.item() >= -1e-12);
  }
}

TEST_CASE("social-cvae with alpha = 0 reproduces the CVAE loss exactly") {
  auto cfg_soc = tiny(Variant::SocialCvae);
  cfg_soc.alpha = 0.0;
  Model soc(cfg_soc, 47);
  Model cvae(tiny(Variant::Cvae), 47);  // same init stream until zeta
  auto scene = merge_scene();
  Rng r1(9), r2(9);
  auto a = soc.loss(scene, r1);
  auto b = cvae.loss(scene, r2);
  CHECK(a.total.item() == b.total.item());
  CHECK(!a.aux.defined());
}

TEST_CASE("VAE objective: alpha 0 and standard-normal prior") {
  Model m(tiny(Variant::Vae), 53);
  Rng rng(3);
  auto parts = m.loss(merge_scene(), rng);
  CHECK(!parts.aux.defined());
  // KL here is against N(0, I): with a zeroed posterior head it vanishes.
  for (const auto& [name, t] : m.params().items()) {
    if (!name.starts_with("psi/head")) continue;
    Tensor h = t;
    std::fill(h.mutable_values().begin(), h.mutable_values().end(), 0.0);
  }
  Rng rng2(3);
  auto parts2 = m.loss(merge_scene(), rng2);
  CHECK(parts2.kl.item() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("full loss gradients agree with finite differences") {
  Model m(tiny(Variant::SocialCvae), 59);
  auto scene = merge_scene();
  auto loss_value = [&]() {
    Rng rng(77);  // frozen noise
    return m.loss(scene, rng).total.item();
  };
  m.params().zero_grad();
  {
    Rng rng(77);
    backward(m.loss(scene, rng).total);
  }
  Rng pick(101);
  int checked = 0;
  for (const auto& [name, t] : m.params().items()) {
    if (t.size() == 0) continue;
    const std::size_t i = pick.next_u64() % t.size();
    const double analytic = t.grad()[i];
    Tensor h = t;
    const double x0 = h.mutable_values()[i];
    const double step = 1e-5;
    auto central_at = [&](double s) {
      h.mutable_values()[i] = x0 + s;
      const double fp = loss_value();
      h.mutable_values()[i] = x0 - s;
      const double fm = loss_value();
      h.mutable_values()[i] = x0;
      return (fp - fm) / (2 * s);
    };
    const double c1 = central_at(step), c2 = central_at(2 * step);
    if (std::abs(analytic) < 1e-10 && std::abs(c1) < 1e-10) continue;
    // Entmax support boundaries are kinks; when the two step sizes disagree
    // the point is non-smooth and finite differences are not a valid oracle.
    if (std::abs(c1 - c2) / (std::abs(c1) + std::abs(c2) + 1e-12) > 1e-4) continue;
    const double rel = std::abs(analytic - c1) / (std::abs(analytic) + std::abs(c1));
    CHECK(rel < 1e-3);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("sampling: K = 1 is the deterministic mean track") {
  Model m(tiny(Variant::Cvae), 61);
  auto scene = merge_scene();
  Rng r1(1), r2(2);
  auto a = m.sample_trajectories(scene, 1, r1);
  auto b = m.sample_trajectories(scene, 1, r2);
  REQUIRE(a.size() == 1);
  CHECK(a[0] == b[0]);  // no rng consumed for the mean track
  CHECK_THROWS_AS(m.sample_trajectories(scene, 0, r1), std::invalid_argument);
}

TEST_CASE("sampling: K = 6 reproducible per seed, endpoints spread") {
  Model m(tiny(Variant::SocialCvae), 67);
  auto scene = merge_scene();
  Rng r1(5), r2(5);
  auto a = m.sample_trajectories(scene, 6, r1);
  auto b = m.sample_trajectories(scene, 6, r2);
  CHECK(a == b);
  REQUIRE(a.size() == 6);

  Rng r3(6);
  auto many = m.sample_trajectories(scene, 50, r3);
  double mx = 0, my = 0;
  for (const auto& tr : many) {
    mx += tr.back()[0];
    my += tr.back()[1];
  }
  mx /= 50.0;
  my /= 50.0;
  double var = 0;
  for (const auto& tr : many)
    var += (tr.back()[0] - mx) * (tr.back()[0] - mx) +
           (tr.back()[1] - my) * (tr.back()[1] - my);
  CHECK(var > 0.0);
}

TEST_CASE("predict_mean keeps the tape alive for history Jacobians") {
  Model m(tiny(Variant::SocialCvae), 71);
  auto scene = merge_scene();
  auto pred = m.predict_mean(scene);
  const std::size_t T_p = scene.agent(scene.target).future.size();
  REQUIRE(pred.track.size() == 2 * T_p);
  // Final-point coordinate gradients reach some neighbor's history.
  backward(slice(pred.track, 2 * T_p - 2, 2 * T_p - 1));
  double total = 0.0;
  for (const auto& [id, hist] : pred.encoded.history) {
    if (id == scene.target) continue;
    for (double g : hist.grad()) total += std::abs(g);
  }
  CHECK(total > 0.0);
}
