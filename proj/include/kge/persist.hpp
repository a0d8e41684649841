#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kge/data.hpp"
#include "kge/model.hpp"
#include "kge/train.hpp"

namespace kge {

// Self-contained model snapshot: parameters, the dictionaries they were
// trained against, a config echo, and optionally optimizer state.
//
// On disk: a magic line ("kgeckpt v1"), one line of JSON (the manifest:
// shapes, dictionary names and hash, array directory), then the arrays as
// raw little-endian 64-bit floats in directory order. Offsets and lengths
// count elements, not bytes. Identical inputs serialize to identical bytes.
struct Checkpoint {
  ModelParams params;
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;  // base names then inverse names
  int n_base_relations = 0;
  std::uint64_t dict_hash = 0;
  nlohmann::json config = nlohmann::json::object();
  std::optional<OptimizerState> opt;
};

Checkpoint make_checkpoint(const ModelParams& p, const Dataset& ds,
                           nlohmann::json config = nlohmann::json::object(),
                           const OptimizerState* opt = nullptr);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);

/// Throws FormatError on bad magic, version, malformed manifest, shape
/// mismatch, or payload size mismatch (truncation and trailing garbage).
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Same, then refuses checkpoints whose dictionary hash does not match ds.
Checkpoint load_checkpoint_for(const std::filesystem::path& path,
                               const Dataset& ds);

/// Writes one line per entity (name, then the dim tangent coordinates) plus
/// a "<out>.curvatures" sidecar with one "relation<TAB>curvature" line per
/// relation. Numbers are printed round-trip exact.
void export_embeddings(const Checkpoint& ck,
                       const std::filesystem::path& out);

}  // namespace kge
