#include "kge/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

namespace kge {

RelationGraph build_relation_graph(int relation,
                                   const std::vector<Triple>& triples) {
  RelationGraph g;
  g.relation = relation;
  std::set<std::pair<int, int>> directed;
  for (const Triple& tr : triples) {
    if (tr.r != relation) continue;
    ++g.n_triples;
    directed.emplace(tr.h, tr.t);
    g.adj[tr.h].push_back(tr.t);
    g.adj[tr.t].push_back(tr.h);
  }
  g.directed_edges.assign(directed.begin(), directed.end());
  for (auto& [node, nbrs] : g.adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }

  std::vector<int> nodes;
  nodes.reserve(g.adj.size());
  for (const auto& [node, nbrs] : g.adj) nodes.push_back(node);
  std::sort(nodes.begin(), nodes.end());
  std::unordered_map<int, bool> seen;
  for (int start : nodes) {
    if (seen[start]) continue;
    std::vector<int> comp;
    std::deque<int> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      comp.push_back(v);
      for (int u : g.adj.at(v)) {
        if (!seen[u]) {
          seen[u] = true;
          queue.push_back(u);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    g.components.push_back(std::move(comp));
  }
  return g;
}

std::vector<Triple> raw_triples(const Dataset& ds) {
  std::vector<Triple> out;
  for (const Triple& tr : ds.train)
    if (tr.r < ds.n_base_relations) out.push_back(tr);
  out.insert(out.end(), ds.valid.begin(), ds.valid.end());
  out.insert(out.end(), ds.test.begin(), ds.test.end());
  return out;
}

namespace {

// Distances from src to every node of its component.
std::unordered_map<int, int> bfs_distances(const RelationGraph& g, int src) {
  std::unordered_map<int, int> dist;
  dist[src] = 0;
  std::deque<int> queue{src};
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int u : g.adj.at(v)) {
      if (!dist.count(u)) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

// Middle node of the canonical shortest b-c path: walk back from c always
// taking the smallest-id neighbor one step closer to b.
int path_midpoint(const RelationGraph& g,
                  const std::unordered_map<int, int>& dist_b, int b, int c) {
  const int len = dist_b.at(c);
  std::vector<int> path{c};
  int cur = c;
  while (path.size() < static_cast<std::size_t>(len) + 1) {
    const int want = dist_b.at(cur) - 1;
    for (int u : g.adj.at(cur)) {
      auto it = dist_b.find(u);
      if (it != dist_b.end() && it->second == want) {
        cur = u;
        break;
      }
    }
    path.push_back(cur);
  }
  (void)b;  // path.back() == b by construction
  return path[path.size() - 1 - static_cast<std::size_t>(len) / 2];
}

}  // namespace

std::optional<double> triangle_curvature(const RelationGraph& g, int a, int b,
                                         int c) {
  if (a == b || a == c || b == c) return std::nullopt;
  if (!g.has_node(a) || !g.has_node(b) || !g.has_node(c)) return std::nullopt;
  const auto dist_b = bfs_distances(g, b);
  if (!dist_b.count(c) || !dist_b.count(a)) return std::nullopt;
  const int dbc = dist_b.at(c);
  if (dbc < 2 || dbc % 2 != 0) return std::nullopt;
  const int m = path_midpoint(g, dist_b, b, c);
  if (m == a) return std::nullopt;
  const auto dist_a = bfs_distances(g, a);
  const double dam = dist_a.at(m);
  const double dab = dist_a.at(b);
  const double dac = dist_a.at(c);
  return (dam * dam + dbc * dbc / 4.0 - (dab * dab + dac * dac) / 2.0) /
         (2.0 * dam);
}

std::optional<double> sampled_curvature(const RelationGraph& g,
                                        std::mt19937_64& rng,
                                        int samples_per_unit) {
  double weight_total = 0.0;
  for (const auto& comp : g.components) {
    const double n = static_cast<double>(comp.size());
    weight_total += n * n * n;
  }
  if (weight_total <= 0.0) return std::nullopt;

  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& comp : g.components) {
    const double n = static_cast<double>(comp.size());
    const long want = std::lround(samples_per_unit * n * n * n / weight_total);
    if (want == 0 || comp.size() < 4) continue;
    std::uniform_int_distribution<std::size_t> pick(0, comp.size() - 1);
    for (long s = 0; s < want; ++s) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const int a = comp[pick(rng)];
        const int b = comp[pick(rng)];
        const int c = comp[pick(rng)];
        if (const auto xi = triangle_curvature(g, a, b, c)) {
          sum += *xi;
          ++count;
          break;
        }
      }
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

double reciprocity(const RelationGraph& g) {
  if (g.directed_edges.empty())
    throw std::invalid_argument("relation graph has no edges");
  std::size_t both = 0;
  for (const auto& [h, t] : g.directed_edges) {
    if (std::binary_search(g.directed_edges.begin(), g.directed_edges.end(),
                           std::make_pair(t, h)))
      ++both;
  }
  return static_cast<double>(both) /
         static_cast<double>(g.directed_edges.size());
}

double krackhardt_score(const RelationGraph& g) { return 1.0 - reciprocity(g); }

const char* pattern_name(Pattern p) {
  switch (p) {
    case Pattern::Symmetric:
      return "symmetric";
    case Pattern::AntiSymmetric:
      return "anti-symmetric";
    default:
      return "neither";
  }
}

Pattern classify_pattern(const RelationGraph& g) {
  const double p = reciprocity(g);
  if (p >= 0.5) return Pattern::Symmetric;
  if (p <= 0.05) return Pattern::AntiSymmetric;
  return Pattern::Neither;
}

AnalysisReport analyze_dataset(const Dataset& ds, std::uint64_t seed,
                               int samples_per_unit) {
  const std::vector<Triple> triples = raw_triples(ds);
  AnalysisReport rep;
  rep.n_triples = triples.size();
  double weighted_sum = 0.0;
  double weight_sum = 0.0;
  for (int r = 0; r < ds.n_base_relations; ++r) {
    const RelationGraph g = build_relation_graph(r, triples);
    RelationReport row;
    row.relation = r;
    row.name = ds.relation_names[r];
    row.n_triples = g.n_triples;
    if (!g.directed_edges.empty()) {
      row.khs = krackhardt_score(g);
      row.pattern = classify_pattern(g);
    }
    for (const auto& comp : g.components) {
      const double n = static_cast<double>(comp.size());
      row.weight += n * n * n;
    }
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    row.xi = sampled_curvature(g, rng, samples_per_unit);
    if (row.xi) {
      weighted_sum += *row.xi * row.weight;
      weight_sum += row.weight;
    }
    rep.relations.push_back(std::move(row));
  }
  if (weight_sum > 0.0) rep.global_xi = weighted_sum / weight_sum;
  return rep;
}

std::string analysis_tsv(const AnalysisReport& rep) {
  std::ostringstream out;
  out << "relation\ttriples\txi\tkhs\tpattern\n";
  auto put_xi = [&](const std::optional<double>& xi) {
    if (xi)
      out << *xi;
    else
      out << "undefined";
  };
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const RelationReport& row : rep.relations) {
    out << row.name << '\t' << row.n_triples << '\t';
    put_xi(row.xi);
    out << '\t' << row.khs << '\t' << pattern_name(row.pattern) << '\n';
  }
  out << "GLOBAL\t" << rep.n_triples << '\t';
  put_xi(rep.global_xi);
  out << "\t-\t-\n";
  return out.str();
}

}  // namespace kge
