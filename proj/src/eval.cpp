#include "kge/eval.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

namespace kge {

namespace {

int rank_from_scores(std::span<const double> scores, int gold,
                     const std::vector<int>& filtered) {
  const double s_gold = scores[gold];
  long greater = 0, equal = 0;
  std::size_t fi = 0;
  for (int t = 0; t < static_cast<int>(scores.size()); ++t) {
    while (fi < filtered.size() && filtered[fi] < t) ++fi;
    if (t == gold) continue;
    if (fi < filtered.size() && filtered[fi] == t) continue;  // known true
    if (scores[t] > s_gold)
      ++greater;
    else if (scores[t] == s_gold)
      ++equal;
  }
  return static_cast<int>(1 + greater + equal / 2);
}

struct Query {
  int h, r, gold, base_rel;
};

}  // namespace

int filtered_rank(const ModelParams& p, const Triple& query,
                  const FilterIndex& filter) {
  Vec scores(p.n_entities);
  score_all_tails(p, query.h, query.r, scores);
  return rank_from_scores(scores, query.t, filter.lookup(query.h, query.r));
}

EvalReport evaluate(const ModelParams& p, const Dataset& ds, Split split,
                    const FilterIndex& filter, int threads) {
  const std::vector<Triple>* src = split == Split::Train ? &ds.train
                                   : split == Split::Valid ? &ds.valid
                                                           : &ds.test;
  std::vector<Query> queries;
  queries.reserve(src->size() * 2);
  for (const Triple& tr : *src) {
    queries.push_back({tr.h, tr.r, tr.t, ds.base_of(tr.r)});
    if (split != Split::Train)  // train is stored with both directions
      queries.push_back({tr.t, ds.inverse_of(tr.r), tr.h, ds.base_of(tr.r)});
  }

  std::vector<int> ranks(queries.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    Vec scores(p.n_entities);
    for (std::size_t i = lo; i < hi; ++i) {
      const Query& q = queries[i];
      score_all_tails(p, q.h, q.r, scores);
      ranks[i] = rank_from_scores(scores, q.gold, filter.lookup(q.h, q.r));
    }
  };
  const int nt = std::max(1, threads);
  if (nt == 1 || queries.size() < 2) {
    work(0, queries.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + nt - 1) / nt;
    for (int w = 0; w < nt; ++w) {
      const std::size_t lo = std::min(queries.size(), w * chunk);
      const std::size_t hi = std::min(queries.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  EvalReport report;
  auto feed = [](RelStats& st, int rank) {
    st.mrr += 1.0 / rank;
    st.h1 += rank <= 1;
    st.h3 += rank <= 3;
    st.h10 += rank <= 10;
    st.count += 1;
  };
  for (std::size_t i = 0; i < queries.size(); ++i) {
    feed(report.total, ranks[i]);
    feed(report.per_relation[queries[i].base_rel], ranks[i]);
  }
  auto close = [](RelStats& st) {
    if (st.count == 0) return;
    st.mrr /= st.count;
    st.h1 /= st.count;
    st.h3 /= st.count;
    st.h10 /= st.count;
  };
  close(report.total);
  for (auto& [r, st] : report.per_relation) close(st);
  return report;
}

namespace {

void tsv_row(std::ostream& os, const std::string& name, const RelStats& st) {
  os << name << '\t' << st.count << '\t' << st.mrr << '\t' << st.h1 << '\t'
     << st.h3 << '\t' << st.h10 << '\n';
}

}  // namespace

std::string report_tsv(const EvalReport& report, const Dataset& ds) {
  std::ostringstream os;
  os.precision(6);
  os << "relation\tqueries\tmrr\th@1\th@3\th@10\n";
  for (const auto& [r, st] : report.per_relation)
    tsv_row(os, ds.relation_names[r], st);
  tsv_row(os, "TOTAL", report.total);
  return os.str();
}

std::string report_kv(const EvalReport& report, const Dataset& ds) {
  std::ostringstream os;
  os.precision(17);
  auto emit = [&os](const std::string& prefix, const RelStats& st) {
    os << prefix << ".queries=" << st.count << '\n';
    os << prefix << ".mrr=" << st.mrr << '\n';
    os << prefix << ".h1=" << st.h1 << '\n';
    os << prefix << ".h3=" << st.h3 << '\n';
    os << prefix << ".h10=" << st.h10 << '\n';
  };
  emit("total", report.total);
  for (const auto& [r, st] : report.per_relation)
    emit("relation." + ds.relation_names[r], st);
  return os.str();
}

}  // namespace kge
