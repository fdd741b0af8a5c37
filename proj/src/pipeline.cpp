#include "scvae/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "scvae/checkpoint.hpp"

namespace scvae {

namespace {

void atomic_write_dataset(const std::string& path, const std::vector<Scene>& scenes) {
  const std::string tmp = path + ".tmp";
  write_dataset(tmp, scenes);
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename '" + tmp + "' -> '" + path + "' failed");
}

std::string group_tag(Variant v, Aggregator a) {
  return std::string(to_string(v)) + "_" + to_string(a);
}

}  // namespace

GenDataReport run_gen_data(Template tmpl, std::size_t count, std::uint64_t seed,
                           const std::string& out_path) {
  if (count == 0) throw std::invalid_argument("gen-data: count must be >= 1");
  const ScenarioConfig cfg = default_config(tmpl);
  auto scenes = generate(cfg, count, seed);
  atomic_write_dataset(out_path, scenes);
  GenDataReport report;
  report.count = scenes.size();
  report.certificate = interactivity_certificate(cfg, std::min<std::size_t>(count, 50), seed);
  return report;
}

TrainRunReport run_train(const std::string& data_path, VariantConfig vcfg,
                         TrainConfig tcfg, std::size_t trials,
                         const std::string& out_dir) {
  if (trials == 0) throw std::invalid_argument("train: trials must be >= 1");
  auto scenes = read_dataset(data_path);
  if (scenes.empty()) throw std::invalid_argument("train: dataset is empty");
  if (tcfg.batch_size == 0)
    tcfg.batch_size = scenes.front().pedestrian_mode ? 20 : 40;
  if (vcfg.latent == 0) vcfg.latent = scenes.front().pedestrian_mode ? 32 : 16;
  std::filesystem::create_directories(out_dir);

  const std::uint64_t base_seed = tcfg.seed;
  TrainRunReport report;
  for (std::size_t t = 0; t < trials; ++t) {
    tcfg.seed = Rng::mix(base_seed, t);
    TrainResult result = train(scenes, vcfg, tcfg);
    const std::string stem = out_dir + "/trial" + std::to_string(t);
    atomic_write_file(stem + ".final.ckpt", result.final_checkpoint);
    atomic_write_file(stem + ".best.ckpt", result.best_checkpoint);
    atomic_write_file(stem + ".loss.tsv", result.log_to_tsv());
    report.final_checkpoints.push_back(stem + ".final.ckpt");
    report.best_checkpoints.push_back(stem + ".best.ckpt");
    report.best_epochs.push_back(result.best_epoch);
  }
  return report;
}

EvaluateReport run_evaluate(const std::string& data_path,
                            const std::vector<std::string>& checkpoint_paths,
                            const std::vector<int>& ks, std::uint64_t seed,
                            const std::string& out_dir) {
  if (checkpoint_paths.empty())
    throw std::invalid_argument("evaluate: no checkpoints given");
  if (ks.empty()) throw std::invalid_argument("evaluate: empty K list");
  for (int k : ks)
    if (k != 1 && k != 6)
      throw std::invalid_argument("evaluate: K must be 1 or 6, got " +
                                  std::to_string(k));

  auto scenes = read_dataset(data_path);
  if (scenes.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  const std::size_t t_h = scenes.front().agents.front().history.size();
  const std::size_t t_p = scenes.front().agent(scenes.front().target).future.size();
  for (const auto& s : scenes)
    for (const auto& a : s.agents)
      if (a.history.size() != t_h ||
          (a.id == s.target && a.future.size() != t_p))
        throw std::invalid_argument("evaluate: scene " + std::to_string(s.id) +
                                    " has a mismatched horizon");
  std::filesystem::create_directories(out_dir);

  EvaluateReport report;
  std::string metrics_tsv = MetricsRow::tsv_header() + "\n";
  for (std::size_t i = 0; i < checkpoint_paths.size(); ++i) {
    Model model = load_checkpoint(checkpoint_paths[i]);
    MetricsRow row = evaluate_dataset(model, scenes, i, Rng::mix(seed, i));
    metrics_tsv += row.to_tsv_line() + "\n";
    report.rows.push_back(std::move(row));
  }
  atomic_write_file(out_dir + "/metrics.tsv", metrics_tsv);

  // Aggregate per (variant, aggregator) group, in first-seen order.
  std::vector<std::pair<std::string, std::vector<MetricsRow>>> groups;
  for (const auto& row : report.rows) {
    const std::string tag = group_tag(row.variant, row.aggregator);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == tag; });
    if (it == groups.end()) {
      groups.push_back({tag, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(row);
  }
  for (const auto& [tag, rows] : groups) {
    TrialSummary summary = aggregate_trials(rows);
    atomic_write_file(out_dir + "/summary_" + tag + ".tsv", summary.to_tsv());
    std::vector<std::pair<double, double>> curve;
    for (const auto& [delta, ms] : summary.ar_delta) curve.emplace_back(delta, ms.mean);
    if (!curve.empty())
      atomic_write_file(out_dir + "/ar_delta_" + tag + ".tsv", ar_curve_to_tsv(curve));
    report.summaries.push_back(std::move(summary));
  }
  return report;
}

void run_diagnose(const std::string& data_path, const std::string& checkpoint_path,
                  const std::vector<std::string>& metric_names,
                  const std::string& out_path) {
  if (metric_names.empty()) throw std::invalid_argument("diagnose: no metrics given");
  bool want_ar = false, want_taug = false, want_looade = false;
  for (const auto& name : metric_names) {
    if (name == "ar") want_ar = true;
    else if (name == "taug") want_taug = true;
    else if (name == "looade") want_looade = true;
    else
      throw std::invalid_argument("diagnose: unknown metric '" + name +
                                  "' (expected ar, taug, looade)");
  }

  Model model = load_checkpoint(checkpoint_path);
  if (want_ar && model.config().aggregator == Aggregator::Max)
    throw std::invalid_argument(
        "diagnose: the agent ratio reads attention weights and is undefined "
        "under max aggregation; request taug/looade instead");

  auto scenes = read_dataset(data_path);
  if (scenes.empty()) throw std::invalid_argument("diagnose: dataset is empty");

  char buf[64];
  auto fmt = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "absent";
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
  };

  std::string out = "scene";
  if (want_ar) out += "\tar_pct";
  if (want_taug) out += "\ttau_g";
  if (want_looade) out += "\tloo_ade";
  out += '\n';
  for (const auto& scene : scenes) {
    const Scene norm = scene.frame.applied ? scene : normalize(scene, scene.target);
    out += std::to_string(scene.id);
    if (want_ar || want_taug) {
      auto pred = model.predict_mean(norm);
      if (want_ar) out += '\t' + fmt(agent_ratio(pred.encoded.report, norm.target));
      if (want_taug) out += '\t' + fmt(gradient_importance(pred));
    }
    if (want_looade) out += '\t' + fmt(leave_one_out_ade(model, norm));
    out += '\n';
  }
  atomic_write_file(out_path, out);
}

}  // namespace scvae
