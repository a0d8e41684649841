#pragma once

#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "kge/data.hpp"

namespace kge {

// Undirected view of the edges carrying one relation, with the directed
// edge set kept alongside for hierarchy metrics. Nodes are entity ids;
// only entities touched by the relation appear.
struct RelationGraph {
  int relation = -1;
  std::unordered_map<int, std::vector<int>> adj;  // sorted unique neighbors
  std::vector<std::pair<int, int>> directed_edges;  // sorted, deduped
  std::vector<std::vector<int>> components;  // each sorted ascending
  std::size_t n_triples = 0;

  bool has_node(int v) const { return adj.count(v) != 0; }
};

RelationGraph build_relation_graph(int relation,
                                   const std::vector<Triple>& triples);

/// Collects the raw base-relation triples of every split.
std::vector<Triple> raw_triples(const Dataset& ds);

/// Shape estimate for the triangle (a, b, c): m is the middle node of a
/// canonical shortest b-c path, and the return value is
///   (d(a,m)^2 + d(b,c)^2/4 - (d(a,b)^2 + d(a,c)^2)/2) / (2 d(a,m)).
/// Zero on line graphs, positive on cycles, negative inside trees.
/// nullopt when the triple cannot be scored: nodes not distinct or not in
/// one component, d(b,c) < 2 or odd (no exact middle node), or a == m.
std::optional<double> triangle_curvature(const RelationGraph& g, int a, int b,
                                         int c);

/// Mean triangle estimate over round(samples_per_unit * w_i) random triples
/// per component, w_i proportional to the cubed component size. Rejection
/// sampling, at most 100 rejections per sample. nullopt when no component
/// yields a single scoreable triple.
std::optional<double> sampled_curvature(const RelationGraph& g,
                                        std::mt19937_64& rng,
                                        int samples_per_unit = 1000);

/// Fraction of directed edges whose reverse edge is absent. 0 for a
/// symmetric edge set, 1 for a DAG.
double krackhardt_score(const RelationGraph& g);

/// Fraction of directed edges whose reverse edge is present.
double reciprocity(const RelationGraph& g);

enum class Pattern { Symmetric, AntiSymmetric, Neither };

const char* pattern_name(Pattern p);

/// Symmetric when reciprocity >= 0.5, anti-symmetric when <= 0.05.
Pattern classify_pattern(const RelationGraph& g);

struct RelationReport {
  int relation = -1;
  std::string name;
  std::size_t n_triples = 0;
  std::optional<double> xi;
  double khs = 0.0;
  Pattern pattern = Pattern::Neither;
  double weight = 0.0;  // sum of cubed component sizes
};

struct AnalysisReport {
  std::vector<RelationReport> relations;  // one per base relation
  std::optional<double> global_xi;        // weight-averaged over defined xi
  std::size_t n_triples = 0;
};

/// Per-base-relation diagnostics over the raw triples of all splits. Each
/// relation samples from its own RNG stream derived from (seed, relation).
AnalysisReport analyze_dataset(const Dataset& ds, std::uint64_t seed,
                               int samples_per_unit = 1000);

std::string analysis_tsv(const AnalysisReport& rep);

}  // namespace kge
