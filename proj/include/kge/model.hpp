#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "kge/common.hpp"
#include "kge/manifold.hpp"

namespace kge {

// Six scoring graphs sharing one parameter layout. The *E kinds work in flat
// space (exp/log are identity, translation is vector addition, distance is
// twice the Euclidean norm); the *H kinds materialize tangent embeddings on
// the ball at a per-relation curvature. Rot*/Ref* transform the head with a
// Givens rotation/reflection; Att* computes both and blends them with a
// learned per-relation attention vector.
enum class ModelKind { RefE, RotE, AttE, RefH, RotH, AttH };

enum class CurvatureMode { Trainable, Fixed };

const char* kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);
bool is_hyperbolic(ModelKind k);
bool uses_rotation(ModelKind k);
bool uses_reflection(ModelKind k);
bool uses_attention(ModelKind k);

// All trainable state is Euclidean; entities and relation translations are
// tangent vectors at the origin. Row-major storage.
struct ModelParams {
  ModelKind kind = ModelKind::RotH;
  CurvatureMode curv_mode = CurvatureMode::Trainable;
  double fixed_c = 1.0;
  int dim = 0;
  int n_entities = 0;
  int n_relations = 0;  // inverse relations included

  Vec entity_emb;   // n_entities x dim
  Vec entity_bias;  // n_entities
  Vec rel_emb;      // n_relations x dim
  Vec rot_angle;    // n_relations x dim/2
  Vec ref_angle;    // n_relations x dim/2
  Vec attn_vec;     // n_relations x dim
  Vec raw_curv;     // n_relations; c_r = softplus(raw_curv[r])

  std::span<const double> entity_row(int v) const;
  std::span<const double> rel_row(int r) const;
  std::span<const double> rot_row(int r) const;
  std::span<const double> ref_row(int r) const;
  std::span<const double> attn_row(int r) const;

  /// Curvature attached to relation r: softplus of the raw parameter,
  /// the shared constant in fixed mode, 0 for flat kinds.
  double curvature(int r) const;

  void check_entity(int v) const;
  void check_relation(int r) const;
};

/// Embeddings ~ N(0, 1e-3), biases 0, angles ~ U(-pi, pi), attention vectors
/// 0, raw curvatures set so every c_r starts at 1. Rejects odd or
/// non-positive dim.
ModelParams init_params(ModelKind kind, CurvatureMode mode, double fixed_c,
                        int dim, int n_entities, int n_relations,
                        std::uint64_t seed);

/// Tangent vector -> ball point at relation r's curvature (identity for
/// flat kinds).
Vec materialize(const ModelParams& p, int r, std::span<const double> tangent);

/// Hyperbolic attention: map both points to the tangent space, softmax of
/// <a, .> picks the blend, map the mixture back. Output projected.
Vec attention_combine(std::span<const double> xH, std::span<const double> yH,
                      std::span<const double> a, double c);

struct QueryEmbedding {
  Vec point;
  double c = 0.0;  // 0 in flat space
};

QueryEmbedding query(const ModelParams& p, int h, int r);
double score(const ModelParams& p, int h, int r, int t);
void score_all_tails(const ModelParams& p, int h, int r,
                     std::span<double> out);

// Cached forward pass. score()/score_all_tails() and the gradient code run
// exactly this, so scalar scoring, batched scoring and the value
// differentiated are bitwise identical.
namespace detail {

struct QueryCache {
  int h = -1, r = -1;
  double c = 0.0;
  manifold::ExpCache eh_exp;
  manifold::ProjCache eh_proj;
  Vec ehH;  // materialized head (plain row copy for flat kinds)
  Vec u_rot, u_ref;
  manifold::LogCache lx, ly;
  Vec xE, yE;
  double sx = 0, sy = 0, ax = 0, ay = 0;
  Vec m;  // attention mixture in the tangent space
  manifold::ExpCache m_exp;
  manifold::ProjCache m_proj;
  manifold::ExpCache rv_exp;
  manifold::ProjCache rv_proj;
  Vec rvH;  // materialized relation translation
  Vec u;    // transformed head, pre-translation
  manifold::MobCache mob;
  Vec q_raw;  // unprojected Mobius sum
  manifold::ProjCache q_proj;
  Vec Q;
  long events = 0;  // clamps/clips seen while building the query
};

struct TailCache {
  int t = -1;
  manifold::ExpCache e_exp;
  manifold::ProjCache e_proj;
  Vec etH;
  manifold::DistCache dist;
  Vec z;  // (-Q) (+) etH scratch
  double dd = 0.0;
  double score = 0.0;
  long events = 0;
};

void query_forward(const ModelParams& p, int h, int r, QueryCache& qc);
double tail_score_forward(const ModelParams& p, const QueryCache& qc, int t,
                          TailCache& tc);

}  // namespace detail

}  // namespace kge
