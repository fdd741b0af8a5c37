#include "scvae/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scvae {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("checkpoint line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string checkpoint_to_string(const Model& model) {
  const VariantConfig& cfg = model.config();
  std::string out = "scvae-checkpoint v1\n";
  out += "variant " + std::string(to_string(cfg.variant)) + "\n";
  out += "hidden " + std::to_string(cfg.hidden) + "\n";
  out += "latent " + std::to_string(cfg.latent) + "\n";
  out += "beta " + fmt(cfg.beta) + "\n";
  out += "alpha " + fmt(cfg.alpha) + "\n";
  out += "aggregator " + std::string(to_string(cfg.aggregator)) + "\n";
  out += "decoder_variance " + fmt(cfg.decoder_variance) + "\n";
  out += "lanelet_points " + std::to_string(cfg.lanelet_points) + "\n";
  out += "lanelet_features " + std::to_string(cfg.lanelet_features) + "\n";
  out += "params " + std::to_string(model.params().items().size()) + "\n";
  for (const auto& [name, t] : model.params().items()) {
    out += name;
    out += '\t';
    const auto& shape = t.shape();
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (d) out += ',';
      out += std::to_string(shape[d]);
    }
    out += '\t';
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) out += ' ';
      out += fmt(t[i]);
    }
    out += '\n';
  }
  return out;
}

Model checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) fail(line_no + 1, "unexpected end of file");
    ++line_no;
    return line;
  };

  if (next() != "scvae-checkpoint v1")
    fail(line_no, "expected header 'scvae-checkpoint v1'");

  VariantConfig cfg;
  std::size_t n_params = 0;
  auto header = [&](const char* key) {
    next();
    const std::string prefix = std::string(key) + " ";
    if (line.rfind(prefix, 0) != 0) fail(line_no, std::string("expected '") + key + "'");
    return line.substr(prefix.size());
  };
  cfg.variant = variant_from_string(header("variant"));
  cfg.hidden = std::stoul(header("hidden"));
  cfg.latent = std::stoul(header("latent"));
  cfg.beta = std::stod(header("beta"));
  cfg.alpha = std::stod(header("alpha"));
  cfg.aggregator = aggregator_from_string(header("aggregator"));
  cfg.decoder_variance = std::stod(header("decoder_variance"));
  cfg.lanelet_points = std::stoul(header("lanelet_points"));
  cfg.lanelet_features = std::stoul(header("lanelet_features"));
  n_params = std::stoul(header("params"));

  Model model(cfg, /*seed=*/0);
  if (model.params().items().size() != n_params)
    fail(line_no, "parameter count " + std::to_string(n_params) + " does not match " +
                      std::to_string(model.params().items().size()) +
                      " for this config");

  for (const auto& [name, t] : model.params().items()) {
    next();
    std::istringstream rec(line);
    std::string rname, rshape;
    if (!std::getline(rec, rname, '\t') || !std::getline(rec, rshape, '\t'))
      fail(line_no, "malformed record");
    if (rname != name)
      fail(line_no, "expected parameter '" + name + "', found '" + rname + "'");
    std::string want;
    for (std::size_t d = 0; d < t.shape().size(); ++d) {
      if (d) want += ',';
      want += std::to_string(t.shape()[d]);
    }
    if (rshape != want)
      fail(line_no, "parameter '" + name + "' shape " + rshape + ", expected " + want);
    Tensor handle = t;
    auto& v = handle.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!(rec >> v[i]))
        fail(line_no, "parameter '" + name + "': expected " +
                          std::to_string(v.size()) + " values, got " + std::to_string(i));
    double extra;
    if (rec >> extra) fail(line_no, "parameter '" + name + "': trailing values");
  }
  if (std::getline(in, line) && !line.empty())
    fail(line_no + 1, "trailing content after the last parameter");
  return model;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename '" + tmp + "' -> '" + path +
                             "' failed: " + std::strerror(errno));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::string& path, const Model& model) {
  atomic_write_file(path, checkpoint_to_string(model));
}

Model load_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_string(read_file(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace scvae
