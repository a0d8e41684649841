#include "kge/diff.hpp"

#include <cmath>

#include "kge/isometry.hpp"

namespace kge {

namespace {

using detail::QueryCache;
using detail::TailCache;
using manifold::DistCache;
using manifold::ExpCache;
using manifold::LogCache;
using manifold::MobCache;
using manifold::ProjCache;

Vec& grow(std::unordered_map<int, Vec>& m, int id, std::size_t len) {
  Vec& v = m[id];
  if (v.size() != len) v.assign(len, 0.0);
  return v;
}

// --- VJPs of the manifold kernels. Each consumes the cotangent w of the
// --- kernel output and accumulates into the input cotangents.

// out = g(||v||) * v with g = tanh(s n)/(s n)
void exp_vjp(std::span<const double> v, const ExpCache& ec, double c,
             std::span<const double> w, std::span<double> gv, double& gc) {
  if (ec.trivial) {
    for (std::size_t i = 0; i < v.size(); ++i) gv[i] += w[i];
    return;
  }
  const double s = std::sqrt(c);
  const double n = ec.n, th = ec.th, g = ec.g;
  const double wv = dot(w, v);
  const double sech2 = 1.0 - th * th;
  const double gp = sech2 / n - th / (s * n * n);  // dg/dn
  const double coefv = wv * gp / n;
  for (std::size_t i = 0; i < v.size(); ++i) gv[i] += g * w[i] + coefv * v[i];
  gc += wv * (sech2 / (2.0 * c) - th / (2.0 * c * s * n));
}

// out = q(||y||) * y with q = arctanh(min(s n, 1-eps))/(s n)
void log_vjp(std::span<const double> y, const LogCache& lc, double c,
             std::span<const double> w, std::span<double> gy, double& gc) {
  if (lc.trivial) {
    for (std::size_t i = 0; i < y.size(); ++i) gy[i] += w[i];
    return;
  }
  const double s = std::sqrt(c);
  const double n = lc.n, A = lc.A, q = lc.q;
  const double wy = dot(w, y);
  double qp, dqdc;
  if (!lc.clamped) {
    qp = 1.0 / (n * (1.0 - c * n * n)) - A / (s * n * n);
    dqdc = 1.0 / (2.0 * c * (1.0 - c * n * n)) - A / (2.0 * c * s * n);
  } else {  // arctanh frozen by the clamp; only the 1/(s n) prefactor moves
    qp = -A / (s * n * n);
    dqdc = -A / (2.0 * c * s * n);
  }
  const double coefy = wy * qp / n;
  for (std::size_t i = 0; i < y.size(); ++i) gy[i] += q * w[i] + coefy * y[i];
  gc += wy * dqdc;
}

// Rescale onto the ball boundary (active only when the input left the ball).
// Rewrites w in place into the input cotangent.
void proj_vjp(std::span<const double> out, const ProjCache& pc, double c,
              std::span<double> w, double& gc) {
  if (!pc.clipped) return;
  const double radius = (1.0 - manifold::kBallEps) / std::sqrt(c);
  const double nn = norm(out);
  const double inv = 1.0 / nn;
  double wx = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) wx += w[i] * out[i] * inv;
  const double f = pc.scale;
  for (std::size_t i = 0; i < out.size(); ++i)
    w[i] = f * (w[i] - wx * out[i] * inv);
  gc += -wx * radius / (2.0 * c);
}

// out = (al*xe + be*y)/D where xe is the (possibly negated) left operand.
void mobius_vjp(std::span<const double> xe, std::span<const double> y,
                std::span<const double> out, const MobCache& mc, double c,
                std::span<const double> w, std::span<double> gxe,
                std::span<double> gy, double& gc) {
  const std::size_t d = xe.size();
  const double Dinv = 1.0 / mc.D;
  double A = 0.0, B = 0.0, E = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    A += w[i] * xe[i];
    B += w[i] * y[i];
    E += w[i] * out[i];
  }
  A *= Dinv;
  B *= Dinv;
  E *= Dinv;
  const double cp = 2.0 * c * (A - E);  // coefficient of the dP path
  const double cx = 2.0 * (-c * B - E * c * c * mc.Y);
  const double cy = 2.0 * (c * A - E * c * c * mc.X);
  for (std::size_t i = 0; i < d; ++i) {
    gxe[i] += mc.al * Dinv * w[i] + cp * y[i] + cx * xe[i];
    gy[i] += mc.be * Dinv * w[i] + cp * xe[i] + cy * y[i];
  }
  gc += A * (2.0 * mc.P + mc.Y) - B * mc.X -
        E * (2.0 * mc.P + 2.0 * c * mc.X * mc.Y);
}

// w2 is the cotangent of the squared distance dd^2.
void dist2_vjp(const DistCache& dc, double c, double w2, std::span<double> gz,
               double& gc) {
  if (dc.trivial) {
    for (double& g : gz) g = 0.0;
    return;
  }
  const double s = std::sqrt(c);
  const double one_m_t2 = 1.0 - dc.t * dc.t;
  if (!dc.clamped) {
    const double coefz = w2 * 4.0 * dc.dd / (one_m_t2 * dc.n);
    // gz holds z on entry; rescale in place
    for (double& g : gz) g *= coefz;
    gc += w2 * 2.0 * dc.dd * (-dc.A / (c * s) + dc.n / (c * one_m_t2));
  } else {
    for (double& g : gz) g = 0.0;
    gc += w2 * 2.0 * dc.dd * (-dc.A / (c * s));
  }
}

// Givens backward: gx += G^T w, gangle_i += w.(dG/dangle_i x) written with
// the forward output (same cross formula for both block shapes).
void rot_vjp(std::span<const double> angles, std::span<const double> out,
             std::span<const double> w, std::span<double> gx,
             std::span<double> gangles) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double wa = w[2 * i], wb = w[2 * i + 1];
    gx[2 * i] += cs * wa + sn * wb;
    gx[2 * i + 1] += -sn * wa + cs * wb;
    gangles[i] += -wa * out[2 * i + 1] + wb * out[2 * i];
  }
}

void ref_vjp(std::span<const double> angles, std::span<const double> out,
             std::span<const double> w, std::span<double> gx,
             std::span<double> gangles) {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double cs = std::cos(angles[i]);
    const double sn = std::sin(angles[i]);
    const double wa = w[2 * i], wb = w[2 * i + 1];
    gx[2 * i] += cs * wa + sn * wb;
    gx[2 * i + 1] += sn * wa - cs * wb;
    gangles[i] += -wa * out[2 * i + 1] + wb * out[2 * i];
  }
}

struct Scratch {
  QueryCache qc;
  TailCache tc;
  Vec negQ, Qbar, gz, gnegQ, getH, gEhH, gu, gm, gur, guf;
};

std::string triple_str(const Triple& tr, int t_cand) {
  return "(" + std::to_string(tr.h) + "," + std::to_string(tr.r) + "," +
         std::to_string(t_cand) + ")";
}

// Shared forward/backward driver; when bundle is null only the loss and the
// event count are computed.
LossInfo run_batch(const ModelParams& p, std::span<const Triple> batch,
                   const NegativeSamples& negs, bool full_loss,
                   GradientBundle* bundle, Scratch& sc) {
  if (!full_loss) {
    if (negs.k < 1)
      throw std::invalid_argument("sampled mode needs k >= 1 negatives");
    if (negs.ids.size() != batch.size() * static_cast<std::size_t>(negs.k))
      throw std::invalid_argument("negative matrix shape mismatch");
  }
  const std::size_t d = static_cast<std::size_t>(p.dim);
  const bool hyp = is_hyperbolic(p.kind);
  const bool train_c = hyp && p.curv_mode == CurvatureMode::Trainable;
  LossInfo info;

  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const Triple& tr = batch[bi];
    p.check_entity(tr.t);
    QueryCache& qc = sc.qc;
    detail::query_forward(p, tr.h, tr.r, qc);
    info.events += qc.events;
    double gc = 0.0;  // d loss / d c for this triple
    if (bundle) {
      sc.Qbar.assign(d, 0.0);
      if (hyp) {
        sc.negQ.resize(d);
        for (std::size_t i = 0; i < d; ++i) sc.negQ[i] = -qc.Q[i];
      }
    }

    const int n_cand = full_loss ? p.n_entities : negs.k + 1;
    for (int ci = 0; ci < n_cand; ++ci) {
      int tc_id;
      if (full_loss)
        tc_id = ci;
      else
        tc_id = ci == 0 ? tr.t : negs.ids[bi * negs.k + (ci - 1)];
      const double y = tc_id == tr.t ? -1.0 : 1.0;

      TailCache& tc = sc.tc;
      const double s = detail::tail_score_forward(p, qc, tc_id, tc);
      info.events += tc.events;
      if (!std::isfinite(s))
        throw NumericError("non-finite score at triple " +
                           triple_str(tr, tc_id));
      info.loss += log1pexp(y * s);
      if (!bundle) continue;

      const double sb = y * sigmoid(y * s);  // d loss / d score
      bundle->entity_bias[tr.h] += sb;
      bundle->entity_bias[tc_id] += sb;
      const double w2 = -sb;  // score = -dd^2 + biases

      if (hyp) {
        sc.gz = tc.z;
        dist2_vjp(tc.dist, qc.c, w2, sc.gz, gc);
        sc.gnegQ.assign(d, 0.0);
        sc.getH.assign(d, 0.0);
        mobius_vjp(sc.negQ, tc.etH, tc.z, tc.dist.mob, qc.c, sc.gz, sc.gnegQ,
                   sc.getH, gc);
        for (std::size_t i = 0; i < d; ++i) sc.Qbar[i] -= sc.gnegQ[i];
        proj_vjp(tc.etH, tc.e_proj, qc.c, sc.getH, gc);
        exp_vjp(p.entity_row(tc_id), tc.e_exp, qc.c, sc.getH,
                grow(bundle->entity_emb, tc_id, d), gc);
      } else {
        Vec& ge = grow(bundle->entity_emb, tc_id, d);
        for (std::size_t i = 0; i < d; ++i) {
          const double g = w2 * 8.0 * (qc.Q[i] - tc.etH[i]);
          sc.Qbar[i] += g;
          ge[i] -= g;
        }
      }
    }

    if (!bundle) continue;

    // backward through the shared query
    if (hyp) {
      proj_vjp(qc.Q, qc.q_proj, qc.c, sc.Qbar, gc);
      sc.gu.assign(d, 0.0);
      Vec& grv = grow(bundle->rel_emb, tr.r, d);
      {
        // temporary cotangent for the materialized translation
        sc.getH.assign(d, 0.0);
        mobius_vjp(qc.u, qc.rvH, qc.q_raw, qc.mob, qc.c, sc.Qbar, sc.gu,
                   sc.getH, gc);
        proj_vjp(qc.rvH, qc.rv_proj, qc.c, sc.getH, gc);
        exp_vjp(p.rel_row(tr.r), qc.rv_exp, qc.c, sc.getH, grv, gc);
      }
      sc.gEhH.assign(d, 0.0);
      if (p.kind == ModelKind::RotH) {
        rot_vjp(p.rot_row(tr.r), qc.u, sc.gu, sc.gEhH,
                grow(bundle->rot_angle, tr.r, d / 2));
      } else if (p.kind == ModelKind::RefH) {
        ref_vjp(p.ref_row(tr.r), qc.u, sc.gu, sc.gEhH,
                grow(bundle->ref_angle, tr.r, d / 2));
      } else {  // AttH
        proj_vjp(qc.u, qc.m_proj, qc.c, sc.gu, gc);
        sc.gm.assign(d, 0.0);
        exp_vjp(qc.m, qc.m_exp, qc.c, sc.gu, sc.gm, gc);
        const double gax = dot(sc.gm, qc.xE);
        const double gay = dot(sc.gm, qc.yE);
        const double mix = gax * qc.ax + gay * qc.ay;
        const double gsx = qc.ax * (gax - mix);
        const double gsy = qc.ay * (gay - mix);
        const std::span<const double> a = p.attn_row(tr.r);
        Vec& gatt = grow(bundle->attn_vec, tr.r, d);
        sc.gur.assign(d, 0.0);
        sc.guf.assign(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
          gatt[i] += gsx * qc.xE[i] + gsy * qc.yE[i];
          sc.gur[i] = qc.ax * sc.gm[i] + gsx * a[i];  // cotangent of xE
          sc.guf[i] = qc.ay * sc.gm[i] + gsy * a[i];  // cotangent of yE
        }
        sc.gm.assign(d, 0.0);  // reuse as cotangent of u_rot
        log_vjp(qc.u_rot, qc.lx, qc.c, sc.gur, sc.gm, gc);
        rot_vjp(p.rot_row(tr.r), qc.u_rot, sc.gm, sc.gEhH,
                grow(bundle->rot_angle, tr.r, d / 2));
        sc.gm.assign(d, 0.0);  // cotangent of u_ref
        log_vjp(qc.u_ref, qc.ly, qc.c, sc.guf, sc.gm, gc);
        ref_vjp(p.ref_row(tr.r), qc.u_ref, sc.gm, sc.gEhH,
                grow(bundle->ref_angle, tr.r, d / 2));
      }
      proj_vjp(qc.ehH, qc.eh_proj, qc.c, sc.gEhH, gc);
      exp_vjp(p.entity_row(tr.h), qc.eh_exp, qc.c, sc.gEhH,
              grow(bundle->entity_emb, tr.h, d), gc);
      if (train_c)
        bundle->raw_curv[tr.r] += gc * sigmoid(p.raw_curv[tr.r]);
    } else {
      Vec& grv = grow(bundle->rel_emb, tr.r, d);
      for (std::size_t i = 0; i < d; ++i) grv[i] += sc.Qbar[i];
      Vec& geh = grow(bundle->entity_emb, tr.h, d);
      if (p.kind == ModelKind::RotE) {
        rot_vjp(p.rot_row(tr.r), qc.u, sc.Qbar, geh,
                grow(bundle->rot_angle, tr.r, d / 2));
      } else if (p.kind == ModelKind::RefE) {
        ref_vjp(p.ref_row(tr.r), qc.u, sc.Qbar, geh,
                grow(bundle->ref_angle, tr.r, d / 2));
      } else {  // AttE: attention directly on the transformed head vectors
        const double gax = dot(sc.Qbar, qc.u_rot);
        const double gay = dot(sc.Qbar, qc.u_ref);
        const double mix = gax * qc.ax + gay * qc.ay;
        const double gsx = qc.ax * (gax - mix);
        const double gsy = qc.ay * (gay - mix);
        const std::span<const double> a = p.attn_row(tr.r);
        Vec& gatt = grow(bundle->attn_vec, tr.r, d);
        sc.gur.assign(d, 0.0);
        sc.guf.assign(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
          gatt[i] += gsx * qc.u_rot[i] + gsy * qc.u_ref[i];
          sc.gur[i] = qc.ax * sc.Qbar[i] + gsx * a[i];
          sc.guf[i] = qc.ay * sc.Qbar[i] + gsy * a[i];
        }
        rot_vjp(p.rot_row(tr.r), qc.u_rot, sc.gur, geh,
                grow(bundle->rot_angle, tr.r, d / 2));
        ref_vjp(p.ref_row(tr.r), qc.u_ref, sc.guf, geh,
                grow(bundle->ref_angle, tr.r, d / 2));
      }
    }
  }
  if (bundle) {
    bundle->loss = info.loss;
    bundle->events = info.events;
  }
  return info;
}

}  // namespace

GradientBundle loss_and_gradients(const ModelParams& p,
                                  std::span<const Triple> batch,
                                  const NegativeSamples& negs,
                                  bool full_loss) {
  GradientBundle bundle;
  Scratch sc;
  run_batch(p, batch, negs, full_loss, &bundle, sc);
  return bundle;
}

LossInfo batch_loss_forward(const ModelParams& p,
                            std::span<const Triple> batch,
                            const NegativeSamples& negs, bool full_loss) {
  Scratch sc;
  return run_batch(p, batch, negs, full_loss, nullptr, sc);
}

double finite_difference_check(ModelParams p, std::span<const Triple> batch,
                               const NegativeSamples& negs, bool full_loss,
                               double step) {
  const GradientBundle bundle = loss_and_gradients(p, batch, negs, full_loss);
  const long base_events = bundle.events;
  double worst = 0.0;
  Scratch sc;

  // Per tensor: compare the largest coordinate-wise deviation against the
  // tensor's gradient scale. Central differences at a fixed step carry an
  // absolute noise floor (loss roundoff / step), so coordinates with tiny
  // gradients cannot be held to a per-coordinate relative bound.
  double max_diff = 0.0, a_scale = 0.0, fd_scale = 0.0;
  auto close_tensor = [&] {
    const double denom = std::max({1e-8, a_scale, fd_scale});
    worst = std::max(worst, max_diff / denom);
    max_diff = a_scale = fd_scale = 0.0;
  };

  auto probe = [&](double& param, double analytic) {
    const double orig = param;
    param = orig + step;
    const LossInfo up = run_batch(p, batch, negs, full_loss, nullptr, sc);
    param = orig - step;
    const LossInfo dn = run_batch(p, batch, negs, full_loss, nullptr, sc);
    param = orig;
    if (up.events != base_events || dn.events != base_events) return;
    const double fd = (up.loss - dn.loss) / (2.0 * step);
    max_diff = std::max(max_diff, std::abs(analytic - fd));
    a_scale = std::max(a_scale, std::abs(analytic));
    fd_scale = std::max(fd_scale, std::abs(fd));
  };

  auto sweep_rows = [&](Vec& tensor, const std::unordered_map<int, Vec>& grads,
                        std::size_t row_len) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const int row = static_cast<int>(i / row_len);
      const std::size_t col = i % row_len;
      auto it = grads.find(row);
      probe(tensor[i], it == grads.end() ? 0.0 : it->second[col]);
    }
    close_tensor();
  };
  auto sweep_scalars = [&](Vec& tensor,
                           const std::unordered_map<int, double>& grads) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      auto it = grads.find(static_cast<int>(i));
      probe(tensor[i], it == grads.end() ? 0.0 : it->second);
    }
    close_tensor();
  };

  const std::size_t d = static_cast<std::size_t>(p.dim);
  sweep_rows(p.entity_emb, bundle.entity_emb, d);
  sweep_scalars(p.entity_bias, bundle.entity_bias);
  sweep_rows(p.rel_emb, bundle.rel_emb, d);
  sweep_rows(p.rot_angle, bundle.rot_angle, d / 2);
  sweep_rows(p.ref_angle, bundle.ref_angle, d / 2);
  sweep_rows(p.attn_vec, bundle.attn_vec, d);
  sweep_scalars(p.raw_curv, bundle.raw_curv);
  return worst;
}

GradcheckInstance make_gradcheck_instance(ModelKind kind, CurvatureMode mode,
                                          int dim, std::uint64_t seed) {
  constexpr int kEntities = 5;
  constexpr int kBaseRelations = 2;
  constexpr int kBatch = 2;
  constexpr int kNegs = 2;

  GradcheckInstance gi;
  gi.params = init_params(kind, mode, 1.0, dim, kEntities, 2 * kBaseRelations,
                          seed);
  std::mt19937_64 rng(mix_seed(seed, 0x67c0de));
  std::normal_distribution<double> emb(0.0, 0.35);
  std::normal_distribution<double> bias(0.0, 0.1);
  std::normal_distribution<double> attn(0.0, 0.5);
  std::uniform_real_distribution<double> curv(-0.5, 1.5);
  std::uniform_int_distribution<int> ent(0, kEntities - 1);
  std::uniform_int_distribution<int> rel(0, 2 * kBaseRelations - 1);
  for (double& x : gi.params.entity_emb) x = emb(rng);
  for (double& x : gi.params.entity_bias) x = bias(rng);
  for (double& x : gi.params.rel_emb) x = emb(rng);
  for (double& x : gi.params.attn_vec) x = attn(rng);
  for (double& x : gi.params.raw_curv) x = curv(rng);
  for (int i = 0; i < kBatch; ++i)
    gi.batch.push_back({ent(rng), rel(rng), ent(rng)});
  gi.negs.k = kNegs;
  for (std::size_t i = 0; i < gi.batch.size() * kNegs; ++i)
    gi.negs.ids.push_back(ent(rng));
  return gi;
}

}  // namespace kge
