#pragma once

#include <functional>
#include <optional>

#include "kge/data.hpp"
#include "kge/diff.hpp"
#include "kge/eval.hpp"
#include "kge/model.hpp"

namespace kge {

enum class OptimizerKind { Adam, Adagrad };

const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

struct TrainConfig {
  ModelKind kind = ModelKind::RotH;
  CurvatureMode curv_mode = CurvatureMode::Trainable;
  double fixed_c = 1.0;
  int dim = 32;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int batch_size = 128;
  int neg_samples = 50;    // ignored when full_loss
  bool full_loss = false;  // score every entity instead of sampling
  int max_epochs = 500;
  int patience = 100;      // epochs without validation improvement
  int valid_period = 5;    // epochs between validation passes
  std::uint64_t seed = 42;
  int eval_threads = 1;

  void validate() const;
};

/// Per-parameter optimizer accumulators. Adam keeps first/second moments
/// plus a per-row step count so rows untouched by a batch do not advance
/// (sparse semantics); Adagrad keeps the squared-gradient accumulator.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  struct Slot {
    Vec m, v;                        // adam
    Vec acc;                         // adagrad
    std::vector<std::int64_t> step;  // adam, one per row
  };
  Slot ent_emb, ent_bias, rel_emb, rot, ref, attn, curv;
};

OptimizerState init_optimizer(OptimizerKind kind, const ModelParams& p);

/// One update from a gradient bundle; rows absent from the bundle are
/// untouched.
void apply_gradients(ModelParams& p, OptimizerState& st,
                     const GradientBundle& g, double lr);

/// k uniform draws over all entities; the true tail may be drawn (it then
/// scores with the positive label downstream).
std::vector<int> sample_negatives(const Triple& tr, int k, int n_entities,
                                  std::mt19937_64& rng);

/// Stable reference implementation of the batch objective via scalar
/// scoring; equals the loss reported by loss_and_gradients.
double batch_loss(const ModelParams& p, std::span<const Triple> batch,
                  const NegativeSamples& negs, bool full_loss);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;              // per training triple
  std::optional<double> val_mrr;
  double seconds = 0.0;
};

struct FitResult {
  ModelParams params;  // best validation MRR, else final
  std::vector<EpochRecord> history;
  int best_epoch = -1;                 // -1: validation never ran
  double best_val_mrr = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

FitResult fit(const Dataset& ds, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

}  // namespace kge
