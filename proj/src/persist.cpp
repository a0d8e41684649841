#include "kge/persist.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kge {

static_assert(std::endian::native == std::endian::little,
              "payload layout assumes a little-endian host");

namespace {

constexpr const char* kMagic = "kgeckpt v1";

using json = nlohmann::json;

struct ArrayRef {
  std::string name;
  std::vector<std::size_t> shape;
  const double* data = nullptr;       // used when writing
  std::vector<double> staging;        // owns converted data (step counts)
};

std::size_t shape_len(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

std::vector<double> steps_as_f64(const std::vector<std::int64_t>& steps) {
  std::vector<double> out(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i)
    out[i] = static_cast<double>(steps[i]);
  return out;
}

std::vector<ArrayRef> build_directory(const Checkpoint& ck) {
  const ModelParams& p = ck.params;
  const auto d = static_cast<std::size_t>(p.dim);
  const auto nv = static_cast<std::size_t>(p.n_entities);
  const auto nr = static_cast<std::size_t>(p.n_relations);
  std::vector<ArrayRef> dir;
  auto add = [&](std::string name, std::vector<std::size_t> shape,
                 const Vec& v) {
    if (shape_len(shape) != v.size())
      throw FormatError("array size mismatch for " + name);
    dir.push_back({std::move(name), std::move(shape), v.data(), {}});
  };
  add("entity_emb", {nv, d}, p.entity_emb);
  add("entity_bias", {nv}, p.entity_bias);
  add("rel_emb", {nr, d}, p.rel_emb);
  add("rot_angle", {nr, d / 2}, p.rot_angle);
  add("ref_angle", {nr, d / 2}, p.ref_angle);
  add("attn_vec", {nr, d}, p.attn_vec);
  add("raw_curv", {nr}, p.raw_curv);
  if (ck.opt) {
    auto slot = [&](const char* tag, const OptimizerState::Slot& s) {
      std::string base = std::string("opt.") + tag + ".";
      if (ck.opt->kind == OptimizerKind::Adam) {
        add(base + "m", {s.m.size()}, s.m);
        add(base + "v", {s.v.size()}, s.v);
        ArrayRef steps{base + "step", {s.step.size()}, nullptr,
                       steps_as_f64(s.step)};
        steps.data = steps.staging.data();
        dir.push_back(std::move(steps));
      } else {
        add(base + "acc", {s.acc.size()}, s.acc);
      }
    };
    slot("ent_emb", ck.opt->ent_emb);
    slot("ent_bias", ck.opt->ent_bias);
    slot("rel_emb", ck.opt->rel_emb);
    slot("rot", ck.opt->rot);
    slot("ref", ck.opt->ref);
    slot("attn", ck.opt->attn);
    slot("curv", ck.opt->curv);
  }
  return dir;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

json manifest_for(const Checkpoint& ck, const std::vector<ArrayRef>& dir) {
  json arrays = json::array();
  std::size_t off = 0;
  for (const ArrayRef& a : dir) {
    const std::size_t len = shape_len(a.shape);
    arrays.push_back({{"len", len},
                      {"name", a.name},
                      {"off", off},
                      {"shape", a.shape}});
    off += len;
  }
  return json{
      {"arrays", arrays},
      {"config", ck.config},
      {"curvature_mode", ck.params.curv_mode == CurvatureMode::Fixed
                             ? "fixed"
                             : "trainable"},
      {"dict_hash", hash_hex(ck.dict_hash)},
      {"dim", ck.params.dim},
      {"entity_names", ck.entity_names},
      {"fixed_c", ck.params.fixed_c},
      {"format_version", 1},
      {"model", kind_name(ck.params.kind)},
      {"n_base_relations", ck.n_base_relations},
      {"n_entities", ck.params.n_entities},
      {"n_relations", ck.params.n_relations},
      {"optimizer",
       ck.opt ? optimizer_name(ck.opt->kind) : "none"},
      {"relation_names", ck.relation_names},
  };
}

void take_array(const json& entry, std::size_t expect_off,
                const std::string& want_name,
                std::vector<std::size_t> want_shape, const double* payload,
                std::size_t payload_len, Vec& out) {
  if (entry.at("name").get<std::string>() != want_name)
    throw FormatError("checkpoint directory: expected array '" + want_name +
                      "', found '" + entry.at("name").get<std::string>() +
                      "'");
  const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
  if (shape != want_shape)
    throw FormatError("checkpoint array '" + want_name +
                      "' has an unexpected shape");
  const auto off = entry.at("off").get<std::size_t>();
  const auto len = entry.at("len").get<std::size_t>();
  if (off != expect_off || len != shape_len(shape) ||
      off + len > payload_len)
    throw FormatError("checkpoint directory is inconsistent at '" +
                      want_name + "'");
  out.assign(payload + off, payload + off + len);
}

}  // namespace

Checkpoint make_checkpoint(const ModelParams& p, const Dataset& ds,
                           nlohmann::json config, const OptimizerState* opt) {
  if (p.n_entities != ds.n_entities() || p.n_relations != ds.n_relations())
    throw std::invalid_argument("parameters do not match the dataset shape");
  Checkpoint ck;
  ck.params = p;
  ck.entity_names = ds.entity_names;
  ck.relation_names = ds.relation_names;
  ck.n_base_relations = ds.n_base_relations;
  ck.dict_hash = dictionary_hash(ds);
  ck.config = std::move(config);
  if (opt) ck.opt = *opt;
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::vector<ArrayRef> dir = build_directory(ck);
  std::string out = kMagic;
  out += '\n';
  out += manifest_for(ck, dir).dump();
  out += '\n';
  for (const ArrayRef& a : dir) {
    const std::size_t bytes = shape_len(a.shape) * sizeof(double);
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, a.data, bytes);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("cannot write checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint: " + path.string());
  std::string magic, manifest_line;
  if (!std::getline(f, magic) || magic != kMagic)
    throw FormatError(path.string() + " is not a checkpoint file");
  if (!std::getline(f, manifest_line))
    throw FormatError(path.string() + ": missing manifest");
  json man;
  try {
    man = json::parse(manifest_line);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }

  std::string payload((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
  try {
    if (man.at("format_version").get<int>() != 1)
      throw FormatError(path.string() + ": unsupported format version");

    Checkpoint ck;
    ModelParams& p = ck.params;
    p.kind = kind_from_name(man.at("model").get<std::string>());
    const auto cmode = man.at("curvature_mode").get<std::string>();
    if (cmode != "fixed" && cmode != "trainable")
      throw FormatError(path.string() + ": unknown curvature mode " + cmode);
    p.curv_mode =
        cmode == "fixed" ? CurvatureMode::Fixed : CurvatureMode::Trainable;
    p.fixed_c = man.at("fixed_c").get<double>();
    p.dim = man.at("dim").get<int>();
    p.n_entities = man.at("n_entities").get<int>();
    p.n_relations = man.at("n_relations").get<int>();
    ck.n_base_relations = man.at("n_base_relations").get<int>();
    ck.entity_names =
        man.at("entity_names").get<std::vector<std::string>>();
    ck.relation_names =
        man.at("relation_names").get<std::vector<std::string>>();
    ck.config = man.at("config");
    ck.dict_hash = std::stoull(man.at("dict_hash").get<std::string>(),
                               nullptr, 16);
    if (p.dim < 2 || p.dim % 2 != 0 || p.n_entities < 1 ||
        p.n_relations < 1 ||
        ck.entity_names.size() != static_cast<std::size_t>(p.n_entities) ||
        ck.relation_names.size() != static_cast<std::size_t>(p.n_relations) ||
        ck.n_base_relations * 2 != p.n_relations)
      throw FormatError(path.string() + ": inconsistent manifest shapes");

    const json& arrays = man.at("arrays");
    std::size_t total = 0;
    for (const json& a : arrays) total += a.at("len").get<std::size_t>();
    if (payload.size() != total * sizeof(double))
      throw FormatError(path.string() + ": payload is " +
                        std::to_string(payload.size()) + " bytes, expected " +
                        std::to_string(total * sizeof(double)) +
                        " (corrupt or truncated)");
    std::vector<double> data(total);
    std::memcpy(data.data(), payload.data(), payload.size());

    const auto d = static_cast<std::size_t>(p.dim);
    const auto nv = static_cast<std::size_t>(p.n_entities);
    const auto nr = static_cast<std::size_t>(p.n_relations);
    const auto opt_name = man.at("optimizer").get<std::string>();
    const std::size_t expect_arrays =
        opt_name == "none" ? 7 : (opt_name == "adam" ? 7 + 21 : 7 + 7);
    if (arrays.size() != expect_arrays)
      throw FormatError(path.string() + ": unexpected array count");

    std::size_t i = 0, off = 0;
    auto take = [&](const char* name, std::vector<std::size_t> shape,
                    Vec& out) {
      take_array(arrays.at(i), off, name, std::move(shape), data.data(),
                 total, out);
      off += out.size();
      ++i;
    };
    take("entity_emb", {nv, d}, p.entity_emb);
    take("entity_bias", {nv}, p.entity_bias);
    take("rel_emb", {nr, d}, p.rel_emb);
    take("rot_angle", {nr, d / 2}, p.rot_angle);
    take("ref_angle", {nr, d / 2}, p.ref_angle);
    take("attn_vec", {nr, d}, p.attn_vec);
    take("raw_curv", {nr}, p.raw_curv);
    if (opt_name != "none") {
      OptimizerState opt;
      opt.kind = optimizer_from_name(opt_name);
      auto slot = [&](const char* tag, OptimizerState::Slot& s,
                      std::size_t scalars, std::size_t rows) {
        const std::string base = std::string("opt.") + tag + ".";
        if (opt.kind == OptimizerKind::Adam) {
          take((base + "m").c_str(), {scalars}, s.m);
          take((base + "v").c_str(), {scalars}, s.v);
          Vec steps;
          take((base + "step").c_str(), {rows}, steps);
          s.step.resize(steps.size());
          for (std::size_t j = 0; j < steps.size(); ++j)
            s.step[j] = static_cast<std::int64_t>(steps[j]);
        } else {
          take((base + "acc").c_str(), {scalars}, s.acc);
        }
      };
      slot("ent_emb", opt.ent_emb, nv * d, nv);
      slot("ent_bias", opt.ent_bias, nv, nv);
      slot("rel_emb", opt.rel_emb, nr * d, nr);
      slot("rot", opt.rot, nr * d / 2, nr);
      slot("ref", opt.ref, nr * d / 2, nr);
      slot("attn", opt.attn, nr * d, nr);
      slot("curv", opt.curv, nr, nr);
      ck.opt = std::move(opt);
    }
    return ck;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }
}

Checkpoint load_checkpoint_for(const std::filesystem::path& path,
                               const Dataset& ds) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.dict_hash != dictionary_hash(ds))
    throw FormatError(path.string() +
                      ": dictionary hash does not match this dataset; "
                      "refusing to mix them");
  return ck;
}

void export_embeddings(const Checkpoint& ck,
                       const std::filesystem::path& out) {
  char buf[40];
  auto fmt = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  {
    std::ofstream f(out, std::ios::trunc);
    for (int v = 0; v < ck.params.n_entities; ++v) {
      f << ck.entity_names[v];
      for (double x : ck.params.entity_row(v)) f << '\t' << fmt(x);
      f << '\n';
    }
    if (!f) throw FormatError("cannot write " + out.string());
  }
  const std::filesystem::path side = out.string() + ".curvatures";
  std::ofstream f(side, std::ios::trunc);
  for (int r = 0; r < ck.params.n_relations; ++r)
    f << ck.relation_names[r] << '\t' << fmt(ck.params.curvature(r)) << '\n';
  if (!f) throw FormatError("cannot write " + side.string());
}

}  // namespace kge
