#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "scvae/nn.hpp"
#include "scvae/tensor.hpp"

namespace scvae {

enum class NodeKind { Agent, Lanelet };
enum class Aggregator { Entmax, Softmax, Max };

const char* to_string(NodeKind k);
const char* to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

struct GraphNode {
  std::size_t id = 0;
  NodeKind kind = NodeKind::Agent;
  Tensor embedding;  // hidden-dim
};

struct GraphEdge {
  std::size_t source = 0;  // node index
  std::size_t target = 0;  // node index, must be an agent
  Tensor feature;          // u_(i,j)
};

// One scene's interaction graph: agent and lanelet nodes plus directed edges
// into agents. With lanelets present every agent receives an edge from every
// lanelet and from every other agent; without lanelets agents also get a
// self-edge so single-agent scenes still have a non-empty neighborhood.
struct ContextGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  std::vector<std::size_t> agent_indices() const;
  std::vector<std::size_t> incoming(std::size_t target) const;
  // Throws std::invalid_argument when a structural invariant is broken.
  void validate() const;
};

// Builds the standard edge set over already-embedded nodes. Edge features are
// supplied by the caller keyed as (source, target).
ContextGraph make_context_graph(
    std::vector<GraphNode> nodes,
    const std::function<Tensor(const GraphNode& src, const GraphNode& dst)>& edge_feature);

struct AttentionRecord {
  std::size_t scene = 0;
  std::size_t target = 0;       // node id
  std::size_t source = 0;       // node id
  NodeKind source_kind = NodeKind::Agent;
  double weight = 0.0;
};

struct AttentionReport {
  // Under Max the "weights" are win fractions, not attention; metrics that
  // read attention weights check this tag and refuse Max reports.
  Aggregator mode = Aggregator::Entmax;
  std::vector<AttentionRecord> records;
  std::string to_tsv() const;  // header + one row per record
};

// Single-round sparse graph-attention message passing. An edge message is
// f_e([h_i, h_j, u]) built from two one-layer MLPs: the first encodes h_i and
// h_j separately, the second maps the concatenation with u to a hidden-dim
// message. A linear head scalarizes messages for the entmax/softmax weights.
class SparseGamp {
 public:
  SparseGamp() = default;
  SparseGamp(ParamStore& ps, const std::string& prefix, std::size_t hidden,
             std::size_t edge_dim, Rng& rng);

  Tensor edge_message(const Tensor& h_src, const Tensor& h_dst, const Tensor& u) const;
  Tensor edge_score(const Tensor& message) const;

  struct Output {
    std::vector<std::size_t> agent_nodes;  // node indices, graph order
    std::vector<Tensor> context;           // T_i per agent node
    AttentionReport report;
  };

  // Aggregates each agent's incoming messages. Max mode has no attention
  // weights; the report carries the fraction of coordinates each edge won,
  // as a diagnostic only.
  Output operator()(const ContextGraph& g, Aggregator mode, std::size_t scene_id = 0) const;

  std::size_t hidden_dim() const { return node_enc_.lin.weight.rows(); }
  std::size_t edge_dim() const;

 private:
  OneLayerMlp node_enc_;  // hidden -> hidden, shared for source and target
  OneLayerMlp edge_mlp_;  // (2*hidden + edge_dim) -> hidden
  Linear score_;          // hidden -> 1
};

}  // namespace scvae
