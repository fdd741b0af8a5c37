#include "scvae/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "scvae/entmax.hpp"

namespace scvae {

const char* to_string(NodeKind k) {
  return k == NodeKind::Agent ? "agent" : "lanelet";
}

const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Entmax: return "entmax";
    case Aggregator::Softmax: return "softmax";
    case Aggregator::Max: return "max";
  }
  return "?";
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "entmax") return Aggregator::Entmax;
  if (s == "softmax") return Aggregator::Softmax;
  if (s == "max") return Aggregator::Max;
  throw std::invalid_argument("unknown aggregator '" + s + "'");
}

std::vector<std::size_t> ContextGraph::agent_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind == NodeKind::Agent) out.push_back(i);
  return out;
}

std::vector<std::size_t> ContextGraph::incoming(std::size_t target) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].target == target) out.push_back(e);
  return out;
}

void ContextGraph::validate() const {
  const std::size_t n = nodes.size();
  for (const auto& e : edges) {
    if (e.source >= n || e.target >= n)
      throw std::invalid_argument("edge references node out of range");
    if (nodes[e.target].kind != NodeKind::Agent)
      throw std::invalid_argument("edges must target agent nodes");
    if (!e.feature.defined())
      throw std::invalid_argument("edge feature missing");
  }
  bool has_lanelets = false;
  for (const auto& nd : nodes) has_lanelets |= nd.kind == NodeKind::Lanelet;
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i].kind != NodeKind::Agent) continue;
    bool any = false, self = false;
    std::vector<bool> from(n, false);
    for (const auto& e : edges)
      if (e.target == i) {
        any = true;
        self |= e.source == i;
        from[e.source] = true;
      }
    if (!any)
      throw std::invalid_argument("agent node " + std::to_string(nodes[i].id) +
                                  " has no incoming edge");
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const bool expected = nodes[j].kind == NodeKind::Lanelet ||
                            nodes[j].kind == NodeKind::Agent;
      if (expected && !from[j])
        throw std::invalid_argument("agent node " + std::to_string(nodes[i].id) +
                                    " is missing an edge from node " +
                                    std::to_string(nodes[j].id));
    }
    if (!has_lanelets && !self)
      throw std::invalid_argument("agent node " + std::to_string(nodes[i].id) +
                                  " lacks a self-edge in a lanelet-free graph");
    if (has_lanelets && self)
      throw std::invalid_argument("self-edges are only added when no lanelets exist");
  }
}

ContextGraph make_context_graph(
    std::vector<GraphNode> nodes,
    const std::function<Tensor(const GraphNode&, const GraphNode&)>& edge_feature) {
  ContextGraph g;
  g.nodes = std::move(nodes);
  bool has_lanelets = false;
  for (const auto& nd : g.nodes) has_lanelets |= nd.kind == NodeKind::Lanelet;
  for (std::size_t t = 0; t < g.nodes.size(); ++t) {
    if (g.nodes[t].kind != NodeKind::Agent) continue;
    for (std::size_t s = 0; s < g.nodes.size(); ++s) {
      if (s == t && has_lanelets) continue;  // self-edges only without lanelets
      g.edges.push_back({s, t, edge_feature(g.nodes[s], g.nodes[t])});
    }
  }
  g.validate();
  return g;
}

std::string AttentionReport::to_tsv() const {
  std::ostringstream os;
  os << "scene\ttarget\tsource\tsource_kind\tweight\n";
  for (const auto& r : records) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", r.weight);
    os << r.scene << '\t' << r.target << '\t' << r.source << '\t'
       << to_string(r.source_kind) << '\t' << buf << '\n';
  }
  return os.str();
}

SparseGamp::SparseGamp(ParamStore& ps, const std::string& prefix, std::size_t hidden,
                       std::size_t edge_dim, Rng& rng)
    : node_enc_(ps, prefix + ".node_enc", hidden, hidden, rng),
      edge_mlp_(ps, prefix + ".edge_mlp", hidden, 2 * hidden + edge_dim, rng),
      score_(ps, prefix + ".score", 1, hidden, rng) {}

std::size_t SparseGamp::edge_dim() const {
  return edge_mlp_.lin.weight.cols() - 2 * hidden_dim();
}

Tensor SparseGamp::edge_message(const Tensor& h_src, const Tensor& h_dst,
                                const Tensor& u) const {
  if (h_src.size() != hidden_dim() || h_dst.size() != hidden_dim())
    throw std::invalid_argument("edge_message: node embedding dim " +
                                std::to_string(h_src.size()) + "/" +
                                std::to_string(h_dst.size()) + ", expected " +
                                std::to_string(hidden_dim()));
  if (u.size() != edge_dim())
    throw std::invalid_argument("edge_message: edge feature dim " +
                                std::to_string(u.size()) + ", expected " +
                                std::to_string(edge_dim()));
  Tensor ei = node_enc_(h_src);
  Tensor ej = node_enc_(h_dst);
  return edge_mlp_(concat({ei, ej, u}));
}

Tensor SparseGamp::edge_score(const Tensor& message) const {
  return score_(message);  // shape (1)
}

SparseGamp::Output SparseGamp::operator()(const ContextGraph& g, Aggregator mode,
                                          std::size_t scene_id) const {
  g.validate();
  Output out;
  out.report.mode = mode;
  out.agent_nodes = g.agent_indices();

  std::vector<Tensor> messages(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    messages[e] = edge_message(g.nodes[g.edges[e].source].embedding,
                               g.nodes[g.edges[e].target].embedding,
                               g.edges[e].feature);

  auto record = [&](std::size_t e, double w) {
    const auto& edge = g.edges[e];
    out.report.records.push_back({scene_id, g.nodes[edge.target].id,
                                  g.nodes[edge.source].id,
                                  g.nodes[edge.source].kind, w});
  };

  if (mode == Aggregator::Max) {
    for (std::size_t t : out.agent_nodes) {
      auto in = g.incoming(t);
      Tensor agg = messages[in[0]];
      for (std::size_t k = 1; k < in.size(); ++k) agg = maximum(agg, messages[in[k]]);
      // Diagnostic "weights": fraction of coordinates each edge won. Ties are
      // awarded to the earliest edge, matching maximum()'s tie rule.
      const std::size_t dim = agg.size();
      std::vector<std::size_t> won(in.size(), 0);
      for (std::size_t c = 0; c < dim; ++c) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < in.size(); ++k)
          if (messages[in[k]][c] > messages[in[best]][c]) best = k;
        ++won[best];
      }
      for (std::size_t k = 0; k < in.size(); ++k)
        record(in[k], double(won[k]) / double(dim));
      out.context.push_back(agg);
    }
    return out;
  }

  // Entmax and softmax share the scalar score head; entmax normalizes all
  // segments at once through the padded-batch route.
  std::vector<Tensor> scores(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) scores[e] = edge_score(messages[e]);

  if (mode == Aggregator::Entmax) {
    std::vector<std::vector<std::size_t>> segments;
    for (std::size_t t : out.agent_nodes) segments.push_back(g.incoming(t));
    Tensor weights = segmented_entmax_t(concat(scores), segments);
    for (std::size_t a = 0; a < out.agent_nodes.size(); ++a) {
      const auto& in = segments[a];
      Tensor acc;
      for (std::size_t e : in) {
        Tensor term = mul_bscalar(messages[e], slice(weights, e, e + 1));
        acc = acc.defined() ? add(acc, term) : term;
        record(e, weights[e]);
      }
      out.context.push_back(acc);
    }
    return out;
  }

  for (std::size_t t : out.agent_nodes) {
    auto in = g.incoming(t);
    std::vector<Tensor> seg;
    for (std::size_t e : in) seg.push_back(scores[e]);
    Tensor w = softmax(concat(seg));
    Tensor acc;
    for (std::size_t k = 0; k < in.size(); ++k) {
      Tensor term = mul_bscalar(messages[in[k]], slice(w, k, k + 1));
      acc = acc.defined() ? add(acc, term) : term;
      record(in[k], w[k]);
    }
    out.context.push_back(acc);
  }
  return out;
}

}  // namespace scvae
