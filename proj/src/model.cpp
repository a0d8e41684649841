#include "kge/model.hpp"

#include <algorithm>
#include <cmath>

#include "kge/isometry.hpp"

namespace kge {

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::RefE: return "refe";
    case ModelKind::RotE: return "rote";
    case ModelKind::AttE: return "atte";
    case ModelKind::RefH: return "refh";
    case ModelKind::RotH: return "roth";
    case ModelKind::AttH: return "atth";
  }
  throw std::invalid_argument("unknown model kind");
}

ModelKind kind_from_name(const std::string& name) {
  for (ModelKind k : {ModelKind::RefE, ModelKind::RotE, ModelKind::AttE,
                      ModelKind::RefH, ModelKind::RotH, ModelKind::AttH})
    if (name == kind_name(k)) return k;
  throw std::invalid_argument("unknown model kind: " + name);
}

bool is_hyperbolic(ModelKind k) {
  return k == ModelKind::RefH || k == ModelKind::RotH || k == ModelKind::AttH;
}

bool uses_rotation(ModelKind k) {
  return k == ModelKind::RotE || k == ModelKind::RotH ||
         k == ModelKind::AttE || k == ModelKind::AttH;
}

bool uses_reflection(ModelKind k) {
  return k == ModelKind::RefE || k == ModelKind::RefH ||
         k == ModelKind::AttE || k == ModelKind::AttH;
}

bool uses_attention(ModelKind k) {
  return k == ModelKind::AttE || k == ModelKind::AttH;
}

std::span<const double> ModelParams::entity_row(int v) const {
  check_entity(v);
  return {entity_emb.data() + static_cast<std::size_t>(v) * dim,
          static_cast<std::size_t>(dim)};
}

std::span<const double> ModelParams::rel_row(int r) const {
  check_relation(r);
  return {rel_emb.data() + static_cast<std::size_t>(r) * dim,
          static_cast<std::size_t>(dim)};
}

std::span<const double> ModelParams::rot_row(int r) const {
  check_relation(r);
  return {rot_angle.data() + static_cast<std::size_t>(r) * (dim / 2),
          static_cast<std::size_t>(dim / 2)};
}

std::span<const double> ModelParams::ref_row(int r) const {
  check_relation(r);
  return {ref_angle.data() + static_cast<std::size_t>(r) * (dim / 2),
          static_cast<std::size_t>(dim / 2)};
}

std::span<const double> ModelParams::attn_row(int r) const {
  check_relation(r);
  return {attn_vec.data() + static_cast<std::size_t>(r) * dim,
          static_cast<std::size_t>(dim)};
}

double ModelParams::curvature(int r) const {
  check_relation(r);
  if (!is_hyperbolic(kind)) return 0.0;
  if (curv_mode == CurvatureMode::Fixed) return fixed_c;
  return softplus(raw_curv[r]);
}

void ModelParams::check_entity(int v) const {
  if (v < 0 || v >= n_entities)
    throw std::invalid_argument("entity id out of range: " +
                                std::to_string(v));
}

void ModelParams::check_relation(int r) const {
  if (r < 0 || r >= n_relations)
    throw std::invalid_argument("relation id out of range: " +
                                std::to_string(r));
}

ModelParams init_params(ModelKind kind, CurvatureMode mode, double fixed_c,
                        int dim, int n_entities, int n_relations,
                        std::uint64_t seed) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("dim must be even and >= 2");
  if (n_entities < 1 || n_relations < 1)
    throw std::invalid_argument("need at least one entity and one relation");
  if (mode == CurvatureMode::Fixed && !(fixed_c > 0.0))
    throw std::invalid_argument("fixed curvature must be positive");

  ModelParams p;
  p.kind = kind;
  p.curv_mode = mode;
  p.fixed_c = fixed_c;
  p.dim = dim;
  p.n_entities = n_entities;
  p.n_relations = n_relations;
  p.entity_emb.resize(static_cast<std::size_t>(n_entities) * dim);
  p.entity_bias.assign(n_entities, 0.0);
  p.rel_emb.resize(static_cast<std::size_t>(n_relations) * dim);
  p.rot_angle.resize(static_cast<std::size_t>(n_relations) * (dim / 2));
  p.ref_angle.resize(static_cast<std::size_t>(n_relations) * (dim / 2));
  p.attn_vec.assign(static_cast<std::size_t>(n_relations) * dim, 0.0);
  p.raw_curv.assign(n_relations, inverse_softplus(1.0));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> emb(0.0, 1e-3);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (double& x : p.entity_emb) x = emb(rng);
  for (double& x : p.rel_emb) x = emb(rng);
  for (double& x : p.rot_angle) x = ang(rng);
  for (double& x : p.ref_angle) x = ang(rng);
  return p;
}

namespace detail {

namespace {

// stable two-way softmax
inline void softmax2(double sx, double sy, double& ax, double& ay) {
  const double mx = std::max(sx, sy);
  const double ex = std::exp(sx - mx);
  const double ey = std::exp(sy - mx);
  const double z = ex + ey;
  ax = ex / z;
  ay = ey / z;
}

inline void materialize_into(Vec& out, std::span<const double> tangent,
                             double c, manifold::ExpCache& ec,
                             manifold::ProjCache& pc, long& events) {
  out.resize(tangent.size());
  manifold::expmap0_into(out, tangent, c, &ec);
  manifold::project_into(out, c, &pc);
  events += pc.clipped ? 1 : 0;
}

}  // namespace

void query_forward(const ModelParams& p, int h, int r, QueryCache& qc) {
  qc.h = h;
  qc.r = r;
  qc.events = 0;
  const ModelKind kind = p.kind;
  const std::span<const double> eh = p.entity_row(h);
  const std::span<const double> rv = p.rel_row(r);
  const std::size_t d = eh.size();

  if (is_hyperbolic(kind)) {
    const double c = p.curvature(r);
    qc.c = c;
    materialize_into(qc.ehH, eh, c, qc.eh_exp, qc.eh_proj, qc.events);
    qc.u.resize(d);
    if (kind == ModelKind::RotH) {
      isometry::rotate_into(qc.u, p.rot_row(r), qc.ehH);
    } else if (kind == ModelKind::RefH) {
      isometry::reflect_into(qc.u, p.ref_row(r), qc.ehH);
    } else {  // AttH
      qc.u_rot.resize(d);
      qc.u_ref.resize(d);
      isometry::rotate_into(qc.u_rot, p.rot_row(r), qc.ehH);
      isometry::reflect_into(qc.u_ref, p.ref_row(r), qc.ehH);
      qc.xE.resize(d);
      qc.yE.resize(d);
      manifold::logmap0_into(qc.xE, qc.u_rot, c, &qc.lx);
      manifold::logmap0_into(qc.yE, qc.u_ref, c, &qc.ly);
      qc.events += (qc.lx.clamped ? 1 : 0) + (qc.ly.clamped ? 1 : 0);
      const std::span<const double> a = p.attn_row(r);
      qc.sx = dot(a, qc.xE);
      qc.sy = dot(a, qc.yE);
      softmax2(qc.sx, qc.sy, qc.ax, qc.ay);
      qc.m.resize(d);
      for (std::size_t i = 0; i < d; ++i)
        qc.m[i] = qc.ax * qc.xE[i] + qc.ay * qc.yE[i];
      manifold::expmap0_into(qc.u, qc.m, c, &qc.m_exp);
      manifold::project_into(qc.u, c, &qc.m_proj);
      qc.events += qc.m_proj.clipped ? 1 : 0;
    }
    materialize_into(qc.rvH, rv, c, qc.rv_exp, qc.rv_proj, qc.events);
    qc.q_raw.resize(d);
    manifold::mobius_add_into(qc.q_raw, qc.u, qc.rvH, c, &qc.mob);
    qc.Q = qc.q_raw;
    manifold::project_into(qc.Q, c, &qc.q_proj);
    qc.events += qc.q_proj.clipped ? 1 : 0;
    return;
  }

  // flat kinds: log/exp are identity, translation is addition
  qc.c = 0.0;
  qc.ehH.assign(eh.begin(), eh.end());
  qc.u.resize(d);
  if (kind == ModelKind::RotE) {
    isometry::rotate_into(qc.u, p.rot_row(r), qc.ehH);
  } else if (kind == ModelKind::RefE) {
    isometry::reflect_into(qc.u, p.ref_row(r), qc.ehH);
  } else {  // AttE
    qc.u_rot.resize(d);
    qc.u_ref.resize(d);
    isometry::rotate_into(qc.u_rot, p.rot_row(r), qc.ehH);
    isometry::reflect_into(qc.u_ref, p.ref_row(r), qc.ehH);
    const std::span<const double> a = p.attn_row(r);
    qc.sx = dot(a, qc.u_rot);
    qc.sy = dot(a, qc.u_ref);
    softmax2(qc.sx, qc.sy, qc.ax, qc.ay);
    for (std::size_t i = 0; i < d; ++i)
      qc.u[i] = qc.ax * qc.u_rot[i] + qc.ay * qc.u_ref[i];
  }
  qc.Q.resize(d);
  for (std::size_t i = 0; i < d; ++i) qc.Q[i] = qc.u[i] + rv[i];
}

double tail_score_forward(const ModelParams& p, const QueryCache& qc, int t,
                          TailCache& tc) {
  tc.t = t;
  tc.events = 0;
  const std::span<const double> et = p.entity_row(t);
  if (is_hyperbolic(p.kind)) {
    materialize_into(tc.etH, et, qc.c, tc.e_exp, tc.e_proj, tc.events);
    tc.z.resize(et.size());
    tc.dd = manifold::distance_kernel(qc.Q, tc.etH, qc.c, tc.z, &tc.dist);
    tc.events += tc.dist.clamped ? 1 : 0;
  } else {
    tc.etH.assign(et.begin(), et.end());
    double s2 = 0.0;
    for (std::size_t i = 0; i < et.size(); ++i) {
      const double d = qc.Q[i] - tc.etH[i];
      s2 += d * d;
    }
    tc.dd = 2.0 * std::sqrt(s2);
  }
  tc.score =
      -tc.dd * tc.dd + p.entity_bias[qc.h] + p.entity_bias[t];
  return tc.score;
}

}  // namespace detail

Vec materialize(const ModelParams& p, int r, std::span<const double> tangent) {
  if (static_cast<int>(tangent.size()) != p.dim)
    throw std::invalid_argument("materialize: dimension mismatch");
  if (!all_finite(tangent))
    throw std::invalid_argument("materialize: non-finite input");
  if (!is_hyperbolic(p.kind)) return Vec(tangent.begin(), tangent.end());
  return manifold::expmap0(tangent, p.curvature(r));
}

Vec attention_combine(std::span<const double> xH, std::span<const double> yH,
                      std::span<const double> a, double c) {
  if (xH.size() != yH.size() || xH.size() != a.size())
    throw std::invalid_argument("attention_combine: dimension mismatch");
  if (!(std::isfinite(c)) || c <= 0.0)
    throw std::invalid_argument("attention_combine: curvature must be positive");
  Vec xE = manifold::logmap0(xH, c);
  Vec yE = manifold::logmap0(yH, c);
  const double sx = dot(a, xE);
  const double sy = dot(a, yE);
  double ax, ay;
  {
    const double mx = std::max(sx, sy);
    const double ex = std::exp(sx - mx);
    const double ey = std::exp(sy - mx);
    ax = ex / (ex + ey);
    ay = ey / (ex + ey);
  }
  Vec m(xE.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = ax * xE[i] + ay * yE[i];
  return manifold::expmap0(m, c);
}

QueryEmbedding query(const ModelParams& p, int h, int r) {
  detail::QueryCache qc;
  detail::query_forward(p, h, r, qc);
  return QueryEmbedding{std::move(qc.Q), qc.c};
}

double score(const ModelParams& p, int h, int r, int t) {
  detail::QueryCache qc;
  detail::query_forward(p, h, r, qc);
  detail::TailCache tc;
  return detail::tail_score_forward(p, qc, t, tc);
}

void score_all_tails(const ModelParams& p, int h, int r,
                     std::span<double> out) {
  if (static_cast<int>(out.size()) != p.n_entities)
    throw std::invalid_argument("score_all_tails: output size != n_entities");
  detail::QueryCache qc;
  detail::query_forward(p, h, r, qc);
  detail::TailCache tc;
  for (int t = 0; t < p.n_entities; ++t)
    out[t] = detail::tail_score_forward(p, qc, t, tc);
}

}  // namespace kge
