#include "kge/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace kge {

const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "adagrad";
}

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "adagrad") return OptimizerKind::Adagrad;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("dim must be even and >= 2");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw std::invalid_argument("learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!full_loss && neg_samples < 1)
    throw std::invalid_argument("need a positive negative-sample count");
  if (max_epochs < 0) throw std::invalid_argument("max epochs must be >= 0");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (valid_period < 1)
    throw std::invalid_argument("validation period must be >= 1");
  if (curv_mode == CurvatureMode::Fixed && !(fixed_c > 0.0))
    throw std::invalid_argument("fixed curvature must be positive");
  if (eval_threads < 1) throw std::invalid_argument("threads must be >= 1");
}

OptimizerState init_optimizer(OptimizerKind kind, const ModelParams& p) {
  OptimizerState st;
  st.kind = kind;
  auto setup = [&](OptimizerState::Slot& s, std::size_t scalars,
                   std::size_t rows) {
    if (kind == OptimizerKind::Adam) {
      s.m.assign(scalars, 0.0);
      s.v.assign(scalars, 0.0);
      s.step.assign(rows, 0);
    } else {
      s.acc.assign(scalars, 0.0);
    }
  };
  const std::size_t ne = p.entity_emb.size();
  const std::size_t nr = p.rel_emb.size();
  setup(st.ent_emb, ne, p.n_entities);
  setup(st.ent_bias, p.entity_bias.size(), p.entity_bias.size());
  setup(st.rel_emb, nr, p.n_relations);
  setup(st.rot, p.rot_angle.size(), p.n_relations);
  setup(st.ref, p.ref_angle.size(), p.n_relations);
  setup(st.attn, p.attn_vec.size(), p.n_relations);
  setup(st.curv, p.raw_curv.size(), p.raw_curv.size());
  return st;
}

namespace {

constexpr double kAdamB1 = 0.9;
constexpr double kAdamB2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kAdagradEps = 1e-10;

void update_row(OptimizerKind kind, Vec& params, OptimizerState::Slot& slot,
                int row, std::span<const double> grad, std::size_t row_len,
                double lr) {
  const std::size_t off = row * row_len;
  if (kind == OptimizerKind::Adam) {
    const std::int64_t t = ++slot.step[row];
    const double bc1 = 1.0 - std::pow(kAdamB1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(kAdamB2, static_cast<double>(t));
    for (std::size_t j = 0; j < row_len; ++j) {
      double& m = slot.m[off + j];
      double& v = slot.v[off + j];
      const double g = grad[j];
      m = kAdamB1 * m + (1.0 - kAdamB1) * g;
      v = kAdamB2 * v + (1.0 - kAdamB2) * g * g;
      params[off + j] -= lr * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
    }
  } else {
    for (std::size_t j = 0; j < row_len; ++j) {
      double& a = slot.acc[off + j];
      const double g = grad[j];
      a += g * g;
      params[off + j] -= lr * g / std::sqrt(a + kAdagradEps);
    }
  }
}

}  // namespace

void apply_gradients(ModelParams& p, OptimizerState& st,
                     const GradientBundle& g, double lr) {
  const std::size_t d = static_cast<std::size_t>(p.dim);
  for (const auto& [id, grad] : g.entity_emb)
    update_row(st.kind, p.entity_emb, st.ent_emb, id, grad, d, lr);
  for (const auto& [id, grad] : g.entity_bias)
    update_row(st.kind, p.entity_bias, st.ent_bias, id, {&grad, 1}, 1, lr);
  for (const auto& [id, grad] : g.rel_emb)
    update_row(st.kind, p.rel_emb, st.rel_emb, id, grad, d, lr);
  for (const auto& [id, grad] : g.rot_angle)
    update_row(st.kind, p.rot_angle, st.rot, id, grad, d / 2, lr);
  for (const auto& [id, grad] : g.ref_angle)
    update_row(st.kind, p.ref_angle, st.ref, id, grad, d / 2, lr);
  for (const auto& [id, grad] : g.attn_vec)
    update_row(st.kind, p.attn_vec, st.attn, id, grad, d, lr);
  for (const auto& [id, grad] : g.raw_curv)
    update_row(st.kind, p.raw_curv, st.curv, id, {&grad, 1}, 1, lr);
}

std::vector<int> sample_negatives(const Triple& tr, int k, int n_entities,
                                  std::mt19937_64& rng) {
  (void)tr;  // uniform over all entities, independent of the query
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (n_entities < 1) throw std::invalid_argument("empty entity set");
  std::uniform_int_distribution<int> pick(0, n_entities - 1);
  std::vector<int> out(k);
  for (int& id : out) id = pick(rng);
  return out;
}

double batch_loss(const ModelParams& p, std::span<const Triple> batch,
                  const NegativeSamples& negs, bool full_loss) {
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Triple& tr = batch[i];
    if (full_loss) {
      for (int t = 0; t < p.n_entities; ++t) {
        const double y = t == tr.t ? -1.0 : 1.0;
        loss += log1pexp(y * score(p, tr.h, tr.r, t));
      }
    } else {
      loss += log1pexp(-score(p, tr.h, tr.r, tr.t));
      for (int t : negs.row(i)) {
        const double y = t == tr.t ? -1.0 : 1.0;
        loss += log1pexp(y * score(p, tr.h, tr.r, t));
      }
    }
  }
  return loss;
}

FitResult fit(const Dataset& ds, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
  cfg.validate();
  if (ds.train.empty()) throw std::invalid_argument("empty training split");

  FitResult res;
  res.params = init_params(cfg.kind, cfg.curv_mode, cfg.fixed_c, cfg.dim,
                           ds.n_entities(), ds.n_relations(),
                           mix_seed(cfg.seed, 0));
  OptimizerState opt = init_optimizer(cfg.optimizer, res.params);
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 1));
  std::mt19937_64 neg_rng(mix_seed(cfg.seed, 2));

  const FilterIndex filter =
      ds.valid.empty() ? FilterIndex{} : build_filter_index(ds);
  std::vector<std::size_t> order(ds.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ModelParams best = res.params;
  bool validated = false;
  std::vector<Triple> batch;
  NegativeSamples negs;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total_loss = 0.0;
    for (std::size_t lo = 0; lo < order.size();
         lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi = std::min(
          order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(ds.train[order[i]]);
      negs.ids.clear();
      negs.k = cfg.full_loss ? 0 : cfg.neg_samples;
      if (!cfg.full_loss) {
        for (const Triple& tr : batch) {
          const std::vector<int> row = sample_negatives(
              tr, cfg.neg_samples, res.params.n_entities, neg_rng);
          negs.ids.insert(negs.ids.end(), row.begin(), row.end());
        }
      }
      const GradientBundle g =
          loss_and_gradients(res.params, batch, negs, cfg.full_loss);
      if (!std::isfinite(g.loss)) throw NumericError("non-finite batch loss");
      total_loss += g.loss;
      apply_gradients(res.params, opt, g, cfg.lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = total_loss / static_cast<double>(ds.train.size());
    if (!ds.valid.empty() && epoch % cfg.valid_period == 0) {
      const EvalReport rep = evaluate(res.params, ds, Split::Valid, filter,
                                      cfg.eval_threads);
      rec.val_mrr = rep.total.mrr;
      if (!validated || rep.total.mrr > res.best_val_mrr) {
        validated = true;
        res.best_val_mrr = rep.total.mrr;
        res.best_epoch = epoch;
        best = res.params;
      }
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (validated && epoch - res.best_epoch >= cfg.patience) break;
  }

  if (validated) res.params = std::move(best);
  return res;
}

}  // namespace kge
