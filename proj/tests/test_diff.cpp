#include <cmath>
#include <vector>

#include "doctest.h"
#include "kge/diff.hpp"

using namespace kge;
using doctest::Approx;

namespace {

const ModelKind kAllKinds[] = {ModelKind::RefE, ModelKind::RotE,
                               ModelKind::AttE, ModelKind::RefH,
                               ModelKind::RotH, ModelKind::AttH};

ModelParams zero_params(ModelKind kind, int dim, int n_entities,
                        int n_relations) {
  ModelParams p = init_params(kind, CurvatureMode::Trainable, 1.0, dim,
                              n_entities, n_relations, 0);
  std::fill(p.entity_emb.begin(), p.entity_emb.end(), 0.0);
  std::fill(p.rel_emb.begin(), p.rel_emb.end(), 0.0);
  std::fill(p.rot_angle.begin(), p.rot_angle.end(), 0.0);
  std::fill(p.ref_angle.begin(), p.ref_angle.end(), 0.0);
  return p;
}

}  // namespace

TEST_CASE("all-zero parameters give log 2 per term") {
  const double log2 = std::log(2.0);
  for (ModelKind kind : kAllKinds) {
    CAPTURE(kind_name(kind));
    const ModelParams p = zero_params(kind, 4, 5, 4);
    const std::vector<Triple> batch{{0, 0, 1}};
    NegativeSamples negs;
    negs.k = 2;
    negs.ids = {2, 3};

    const GradientBundle g = loss_and_gradients(p, batch, negs, false);
    CHECK(g.loss == Approx(3 * log2).epsilon(1e-14));

    const GradientBundle full = loss_and_gradients(p, batch, negs, true);
    CHECK(full.loss == Approx(5 * log2).epsilon(1e-14));

    const std::vector<Triple> two{{0, 0, 1}, {2, 1, 4}};
    NegativeSamples negs2;
    negs2.k = 2;
    negs2.ids = {2, 3, 0, 1};
    const GradientBundle g2 = loss_and_gradients(p, two, negs2, false);
    CHECK(g2.loss == Approx(6 * log2).epsilon(1e-14));
  }
}

TEST_CASE("gradients only touch referenced parameters") {
  GradcheckInstance inst =
      make_gradcheck_instance(ModelKind::RotH, CurvatureMode::Trainable, 4, 3);
  inst.batch = {{0, 0, 1}};
  inst.negs.k = 1;
  inst.negs.ids = {2};
  const GradientBundle g =
      loss_and_gradients(inst.params, inst.batch, inst.negs, false);

  CHECK(g.entity_emb.count(0) == 1);
  CHECK(g.entity_emb.count(1) == 1);
  CHECK(g.entity_emb.count(2) == 1);
  CHECK(g.entity_emb.count(3) == 0);
  CHECK(g.entity_emb.count(4) == 0);
  CHECK(g.entity_bias.count(3) == 0);
  CHECK(g.rel_emb.size() == 1);
  CHECK(g.rel_emb.count(0) == 1);
  CHECK(g.rot_angle.count(0) == 1);
  CHECK(g.ref_angle.empty());   // RotH has no reflection
  CHECK(g.attn_vec.empty());    // or attention
  CHECK(g.raw_curv.count(0) == 1);

  // fixed curvature: no curvature gradient at all
  GradcheckInstance fixed =
      make_gradcheck_instance(ModelKind::RotH, CurvatureMode::Fixed, 4, 3);
  const GradientBundle gf =
      loss_and_gradients(fixed.params, fixed.batch, fixed.negs, false);
  CHECK(gf.raw_curv.empty());

  // flat kinds never touch curvature
  GradcheckInstance flat =
      make_gradcheck_instance(ModelKind::RotE, CurvatureMode::Trainable, 4, 3);
  const GradientBundle ge =
      loss_and_gradients(flat.params, flat.batch, flat.negs, false);
  CHECK(ge.raw_curv.empty());
}

TEST_CASE("gradient entries are finite and shaped like the rows") {
  for (ModelKind kind : kAllKinds) {
    CAPTURE(kind_name(kind));
    GradcheckInstance inst =
        make_gradcheck_instance(kind, CurvatureMode::Trainable, 6, 17);
    const GradientBundle g =
        loss_and_gradients(inst.params, inst.batch, inst.negs, false);
    CHECK(std::isfinite(g.loss));
    for (const auto& [id, row] : g.entity_emb) {
      CHECK(row.size() == 6u);
      for (double x : row) CHECK(std::isfinite(x));
    }
    for (const auto& [id, row] : g.rot_angle) CHECK(row.size() == 3u);
    for (const auto& [id, row] : g.ref_angle) CHECK(row.size() == 3u);
    for (const auto& [id, gc] : g.raw_curv) CHECK(std::isfinite(gc));
  }
}

TEST_CASE("finite differences confirm every kind, mode and width") {
  for (ModelKind kind : kAllKinds) {
    for (CurvatureMode mode : {CurvatureMode::Trainable, CurvatureMode::Fixed}) {
      for (int dim : {2, 4, 8}) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
          CAPTURE(kind_name(kind));
          CAPTURE(dim);
          CAPTURE(seed);
          GradcheckInstance inst = make_gradcheck_instance(kind, mode, dim, seed);
          const double err = finite_difference_check(inst.params, inst.batch,
                                                     inst.negs, false);
          CHECK(err <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("flat kinds are better conditioned") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GradcheckInstance inst = make_gradcheck_instance(
        ModelKind::AttE, CurvatureMode::Trainable, 4, seed);
    const double err =
        finite_difference_check(inst.params, inst.batch, inst.negs, false);
    CHECK(err <= 1e-5);
  }
}

TEST_CASE("finite differences confirm the full loss") {
  for (ModelKind kind : {ModelKind::RotE, ModelKind::RotH, ModelKind::AttH}) {
    CAPTURE(kind_name(kind));
    GradcheckInstance inst =
        make_gradcheck_instance(kind, CurvatureMode::Trainable, 4, 5);
    const double err =
        finite_difference_check(inst.params, inst.batch, inst.negs, true);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("saturated loss has exactly zero error and gradients") {
  // one entity, full loss: the only candidate is the gold tail, and a huge
  // bias pushes the term into the flat tail of log1pexp
  ModelParams p = zero_params(ModelKind::RotE, 2, 1, 2);
  p.entity_bias[0] = 1000.0;
  const std::vector<Triple> batch{{0, 0, 0}};
  NegativeSamples negs;

  const GradientBundle g = loss_and_gradients(p, batch, negs, true);
  CHECK(g.loss == 0.0);
  for (const auto& [id, row] : g.entity_emb)
    for (double x : row) CHECK(x == 0.0);
  for (const auto& [id, b] : g.entity_bias) CHECK(b == 0.0);

  CHECK(finite_difference_check(p, batch, negs, true) == 0.0);
}

TEST_CASE("forward-only loss matches the gradient pass bitwise") {
  for (ModelKind kind : kAllKinds) {
    CAPTURE(kind_name(kind));
    GradcheckInstance inst =
        make_gradcheck_instance(kind, CurvatureMode::Trainable, 4, 29);
    const GradientBundle g =
        loss_and_gradients(inst.params, inst.batch, inst.negs, false);
    const LossInfo f =
        batch_loss_forward(inst.params, inst.batch, inst.negs, false);
    CHECK(f.loss == g.loss);
    CHECK(f.events == g.events);

    const GradientBundle gf =
        loss_and_gradients(inst.params, inst.batch, inst.negs, true);
    const LossInfo ff =
        batch_loss_forward(inst.params, inst.batch, inst.negs, true);
    CHECK(ff.loss == gf.loss);
  }
}

TEST_CASE("gradients are bitwise deterministic") {
  GradcheckInstance inst =
      make_gradcheck_instance(ModelKind::AttH, CurvatureMode::Trainable, 8, 9);
  const GradientBundle a =
      loss_and_gradients(inst.params, inst.batch, inst.negs, false);
  const GradientBundle b =
      loss_and_gradients(inst.params, inst.batch, inst.negs, false);
  CHECK(a.loss == b.loss);
  REQUIRE(a.entity_emb.size() == b.entity_emb.size());
  for (const auto& [id, row] : a.entity_emb) {
    REQUIRE(b.entity_emb.count(id) == 1);
    CHECK(row == b.entity_emb.at(id));
  }
  for (const auto& [id, gc] : a.raw_curv) CHECK(gc == b.raw_curv.at(id));
}

TEST_CASE("non-finite scores are reported with the triple") {
  GradcheckInstance inst =
      make_gradcheck_instance(ModelKind::RotE, CurvatureMode::Trainable, 4, 1);
  inst.params.entity_emb[static_cast<std::size_t>(inst.batch[0].h) * 4] =
      std::nan("");
  CHECK_THROWS_AS(
      loss_and_gradients(inst.params, inst.batch, inst.negs, false),
      NumericError);
  try {
    loss_and_gradients(inst.params, inst.batch, inst.negs, false);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("triple") != std::string::npos);
  }
}

TEST_CASE("shape and range violations") {
  GradcheckInstance inst =
      make_gradcheck_instance(ModelKind::RotH, CurvatureMode::Trainable, 4, 1);

  NegativeSamples bad = inst.negs;
  bad.ids.pop_back();
  CHECK_THROWS_AS(loss_and_gradients(inst.params, inst.batch, bad, false),
                  std::invalid_argument);

  NegativeSamples zero_k;
  CHECK_THROWS_AS(loss_and_gradients(inst.params, inst.batch, zero_k, false),
                  std::invalid_argument);
  // full loss ignores the sampled matrix entirely
  CHECK_NOTHROW(loss_and_gradients(inst.params, inst.batch, zero_k, true));

  NegativeSamples oob = inst.negs;
  oob.ids[0] = 99;
  CHECK_THROWS_AS(loss_and_gradients(inst.params, inst.batch, oob, false),
                  std::invalid_argument);

  std::vector<Triple> bad_triple{{0, 99, 1}};
  NegativeSamples one;
  one.k = 1;
  one.ids = {2};
  CHECK_THROWS_AS(loss_and_gradients(inst.params, bad_triple, one, false),
                  std::invalid_argument);
}
