#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "kge/data.hpp"
#include "kge/model.hpp"

namespace kge {

/// Sampled negative tails, k per batch triple, row-major.
struct NegativeSamples {
  int k = 0;
  std::vector<int> ids;  // batch.size() * k
  std::span<const int> row(std::size_t i) const {
    return {ids.data() + i * static_cast<std::size_t>(k),
            static_cast<std::size_t>(k)};
  }
};

/// Sparse gradients of the batch loss: only parameters the batch touches
/// get an entry. Vector-valued tensors map id -> dense row.
struct GradientBundle {
  double loss = 0.0;
  long events = 0;  // clamp/clip activations seen in the forward passes
  std::unordered_map<int, Vec> entity_emb;
  std::unordered_map<int, double> entity_bias;
  std::unordered_map<int, Vec> rel_emb;
  std::unordered_map<int, Vec> rot_angle;
  std::unordered_map<int, Vec> ref_angle;
  std::unordered_map<int, Vec> attn_vec;
  std::unordered_map<int, double> raw_curv;
};

// Loss: for each triple, log(1+exp(-s(h,r,t))) plus log(1+exp(y*s(h,r,t')))
// per sampled candidate t' (y=-1 when the draw happens to be the true tail).
// With full_loss the candidate set is every entity, the true tail carrying
// y=-1, and no separate positive term.

GradientBundle loss_and_gradients(const ModelParams& p,
                                  std::span<const Triple> batch,
                                  const NegativeSamples& negs, bool full_loss);

struct LossInfo {
  double loss = 0.0;
  long events = 0;
};

/// Forward pass only; bitwise-identical loss to loss_and_gradients.
LossInfo batch_loss_forward(const ModelParams& p, std::span<const Triple> batch,
                            const NegativeSamples& negs, bool full_loss);

/// Central finite differences over every scalar parameter against the
/// analytic bundle. Per tensor, the largest coordinate deviation is divided
/// by the tensor's gradient scale (largest analytic or measured coordinate,
/// floored at 1e-8); the worst such ratio is returned. Coordinates whose
/// perturbation flips a clamp/clip counter are skipped (the loss is only
/// piecewise smooth there).
double finite_difference_check(ModelParams p, std::span<const Triple> batch,
                               const NegativeSamples& negs, bool full_loss,
                               double step = 1e-6);

/// Small randomized problem for gradient checking: 5 entities, 2 base
/// relations (4 with inverses), 2 triples, 2 sampled negatives each,
/// parameters drawn at moderate magnitudes so no clamp activates.
struct GradcheckInstance {
  ModelParams params;
  std::vector<Triple> batch;
  NegativeSamples negs;
};

GradcheckInstance make_gradcheck_instance(ModelKind kind, CurvatureMode mode,
                                          int dim, std::uint64_t seed);

}  // namespace kge
