#include "kge/data.hpp"

#include <algorithm>
#include <fstream>

namespace kge {

namespace {

struct RawTriple {
  std::string h, r, t;
};

std::vector<RawTriple> read_split(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<RawTriple> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    const auto tab3 = tab2 == std::string::npos ? tab2 : line.find('\t', tab2 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        tab3 != std::string::npos)
      throw FormatError(file.string() + ":" + std::to_string(lineno) +
                        ": expected exactly 3 tab-separated fields");
    RawTriple rt{line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                 line.substr(tab2 + 1)};
    if (rt.h.empty() || rt.r.empty() || rt.t.empty())
      throw FormatError(file.string() + ":" + std::to_string(lineno) +
                        ": empty field");
    if (rt.r.find(kInverseMarker) != std::string::npos)
      throw FormatError(file.string() + ":" + std::to_string(lineno) +
                        ": relation name contains reserved marker " +
                        std::string(kInverseMarker));
    out.push_back(std::move(rt));
  }
  return out;
}

int intern(std::unordered_map<std::string, int>& ids,
           std::vector<std::string>& names, const std::string& s) {
  auto [it, inserted] = ids.emplace(s, static_cast<int>(names.size()));
  if (inserted) names.push_back(s);
  return it->second;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  const char* files[3] = {"train.tsv", "valid.tsv", "test.tsv"};
  std::vector<RawTriple> raw[3];
  for (int i = 0; i < 3; ++i) raw[i] = read_split(dir / files[i]);

  Dataset ds;
  std::unordered_map<std::string, int> ent_ids, rel_ids;
  std::vector<Triple>* splits[3] = {&ds.train, &ds.valid, &ds.test};
  for (int i = 0; i < 3; ++i) {
    splits[i]->reserve(raw[i].size());
    for (const RawTriple& rt : raw[i]) {
      Triple tr;
      tr.h = intern(ent_ids, ds.entity_names, rt.h);
      tr.r = intern(rel_ids, ds.relation_names, rt.r);
      tr.t = intern(ent_ids, ds.entity_names, rt.t);
      splits[i]->push_back(tr);
    }
  }
  ds.n_base_relations = static_cast<int>(ds.relation_names.size());
  for (int r = 0; r < ds.n_base_relations; ++r)
    ds.relation_names.push_back(ds.relation_names[r] + "_" + kInverseMarker);
  augment_train(ds);
  return ds;
}

void augment_train(Dataset& ds) {
  if (ds.train_augmented)
    throw std::invalid_argument("train split is already augmented");
  for (const Triple& tr : ds.train)
    if (tr.r >= ds.n_base_relations)
      throw std::invalid_argument(
          "train split contains inverse relation ids; refusing to augment");
  const std::size_t n = ds.train.size();
  ds.train.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Triple tr = ds.train[i];
    ds.train.push_back({tr.t, tr.r + ds.n_base_relations, tr.h});
  }
  ds.train_augmented = true;
}

void FilterIndex::add(int h, int r, int t) { map_[key(h, r)].push_back(t); }

void FilterIndex::finalize() {
  for (auto& [k, v] : map_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

const std::vector<int>& FilterIndex::lookup(int h, int r) const {
  static const std::vector<int> empty;
  auto it = map_.find(key(h, r));
  return it == map_.end() ? empty : it->second;
}

FilterIndex build_filter_index(const Dataset& ds) {
  FilterIndex idx;
  // train is stored with both directions already
  for (const Triple& tr : ds.train) idx.add(tr.h, tr.r, tr.t);
  for (const std::vector<Triple>* split : {&ds.valid, &ds.test}) {
    for (const Triple& tr : *split) {
      idx.add(tr.h, tr.r, tr.t);
      idx.add(tr.t, ds.inverse_of(tr.r), tr.h);
    }
  }
  idx.finalize();
  return idx;
}

std::uint64_t dictionary_hash(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  feed("entities");
  for (const auto& s : ds.entity_names) feed(s);
  feed("relations");
  for (int r = 0; r < ds.n_base_relations; ++r) feed(ds.relation_names[r]);
  return h;
}

void dump_dictionaries(const Dataset& ds,
                       const std::filesystem::path& entities_file,
                       const std::filesystem::path& relations_file) {
  std::ofstream ents(entities_file);
  if (!ents) throw FormatError("cannot write " + entities_file.string());
  for (std::size_t i = 0; i < ds.entity_names.size(); ++i)
    ents << ds.entity_names[i] << '\t' << i << '\n';
  std::ofstream rels(relations_file);
  if (!rels) throw FormatError("cannot write " + relations_file.string());
  for (std::size_t i = 0; i < ds.relation_names.size(); ++i)
    rels << ds.relation_names[i] << '\t' << i << '\n';
}

}  // namespace kge
