#pragma once

#include <map>
#include <string>

#include "kge/data.hpp"
#include "kge/model.hpp"

namespace kge {

enum class Split { Train, Valid, Test };

struct RelStats {
  double mrr = 0.0;
  double h1 = 0.0;
  double h3 = 0.0;
  double h10 = 0.0;
  long count = 0;
};

struct EvalReport {
  RelStats total;
  std::map<int, RelStats> per_relation;  // keyed by base relation id
};

/// Rank of the gold tail among all entities, with every other known-true
/// tail for (h, r) removed and ties resolved to the middle:
/// rank = 1 + |{better}| + floor(|{equal}|/2).
int filtered_rank(const ModelParams& p, const Triple& query,
                  const FilterIndex& filter);

/// Valid/Test: each raw triple contributes a tail query (h,r,?) and a head
/// query (t,r_inv,?), both bucketed under the base relation. Train (already
/// augmented) contributes tail queries only. Ranks are computed in parallel
/// slices when threads > 1; the report is identical for any thread count.
EvalReport evaluate(const ModelParams& p, const Dataset& ds, Split split,
                    const FilterIndex& filter, int threads = 1);

std::string report_tsv(const EvalReport& report, const Dataset& ds);
std::string report_kv(const EvalReport& report, const Dataset& ds);

}  // namespace kge
