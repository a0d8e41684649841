#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "kge/common.hpp"

namespace kge {

struct Triple {
  int h = 0;
  int r = 0;
  int t = 0;
  bool operator==(const Triple&) const = default;
};

/// Suffix appended to a base relation name to form its inverse twin's name.
/// Input relation names containing it are rejected.
inline constexpr const char* kInverseMarker = "<inv>";

// Triple store backed by train.tsv / valid.tsv / test.tsv. Ids are assigned
// in first-appearance order scanning train, then valid, then test (head,
// relation, tail within a line). Every base relation r gets an inverse twin
// with id r + n_base_relations; the train split holds both (h,r,t) and
// (t,r_inv,h), valid/test stay as read.
struct Dataset {
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;  // base names then inverse names
  int n_base_relations = 0;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  bool train_augmented = false;

  int n_entities() const { return static_cast<int>(entity_names.size()); }
  int n_relations() const { return static_cast<int>(relation_names.size()); }
  int inverse_of(int r) const {
    return r < n_base_relations ? r + n_base_relations : r - n_base_relations;
  }
  int base_of(int r) const {
    return r < n_base_relations ? r : r - n_base_relations;
  }
};

Dataset load_dataset(const std::filesystem::path& dir);

/// Appends (t, r_inv, h) for every train triple. Refuses to run twice.
void augment_train(Dataset& ds);

/// All known true tails per (head, relation) query, across every split and
/// both query directions. Tail lists are sorted ascending.
class FilterIndex {
 public:
  void add(int h, int r, int t);
  void finalize();  // sort + dedupe
  const std::vector<int>& lookup(int h, int r) const;

 private:
  std::unordered_map<std::uint64_t, std::vector<int>> map_;
  static std::uint64_t key(int h, int r) {
    return (static_cast<std::uint64_t>(h) << 32) |
           static_cast<std::uint32_t>(r);
  }
};

FilterIndex build_filter_index(const Dataset& ds);

/// FNV-1a over both dictionaries; checkpoints store it and refuse to load
/// against a dataset whose dictionaries hash differently.
std::uint64_t dictionary_hash(const Dataset& ds);

/// Writes "name<TAB>id" lines for entities and relations.
void dump_dictionaries(const Dataset& ds,
                       const std::filesystem::path& entities_file,
                       const std::filesystem::path& relations_file);

}  // namespace kge
