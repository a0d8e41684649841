#include "kge/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "kge/analyze.hpp"
#include "kge/diff.hpp"
#include "kge/eval.hpp"
#include "kge/persist.hpp"
#include "kge/train.hpp"

namespace kge {

namespace {

bool quiet_log() {
  const char* v = std::getenv("KGE_LOG");
  if (!v) return false;
  const std::string s = v;
  return s == "quiet" || s == "off" || s == "0";
}

void write_text(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::trunc);
  f << text;
  if (!f) throw FormatError("cannot write " + out_path);
}

const std::vector<std::string> kKindNames{"refe", "rote", "atte",
                                          "refh", "roth", "atth"};

CLI::Validator even_dim() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        int v = 0;
        try {
          v = std::stoi(s);
        } catch (...) {
          return "not an integer";
        }
        if (v < 2 || v % 2 != 0) return "dimension must be even and >= 2";
        return {};
      },
      "EVEN");
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  return Split::Test;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Knowledge-graph embeddings on the Poincare ball"};
  app.require_subcommand(1);
  int rc = 0;

  // train
  auto* train = app.add_subcommand("train", "Fit a model and save it");
  std::string tr_data, tr_model, tr_neg = "50", tr_opt = "adam";
  std::string tr_curv = "trainable", tr_out;
  TrainConfig cfg;
  train->add_option("--data", tr_data, "Dataset directory with {train,valid,test}.tsv")->required();
  train->add_option("--model", tr_model, "Scoring model")
      ->required()
      ->check(CLI::IsMember(kKindNames));
  train->add_option("--dim", cfg.dim, "Embedding dimension (even)")
      ->capture_default_str()
      ->check(even_dim());
  train->add_option("--lr", cfg.lr, "Learning rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--optimizer", tr_opt, "Optimizer")
      ->capture_default_str()
      ->check(CLI::IsMember({"adam", "adagrad"}));
  train->add_option("--batch-size", cfg.batch_size, "Triples per step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--neg-samples", tr_neg,
                    "Negative tails per triple, or 'full' for all entities")
      ->capture_default_str();
  train->add_option("--max-epochs", cfg.max_epochs, "Epoch budget")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--patience", cfg.patience,
                    "Stop after this many epochs without a validation gain")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--valid-period", cfg.valid_period,
                    "Validate every N epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  train->add_option("--curvature", tr_curv, "Curvature handling")
      ->capture_default_str()
      ->check(CLI::IsMember({"trainable", "fixed"}));
  train->add_option("--fixed-c", cfg.fixed_c,
                    "Curvature value when --curvature fixed")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--threads", cfg.eval_threads,
                    "Worker threads for validation ranking")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--out", tr_out, "Checkpoint file to write")->required();
  train->callback([&] {
    if (tr_neg == "full") {
      cfg.full_loss = true;
    } else {
      try {
        cfg.neg_samples = std::stoi(tr_neg);
      } catch (...) {
        throw CLI::ValidationError(
            "--neg-samples: expected a positive integer or 'full'");
      }
      if (cfg.neg_samples < 1)
        throw CLI::ValidationError(
            "--neg-samples: expected a positive integer or 'full'");
    }
    cfg.kind = kind_from_name(tr_model);
    cfg.optimizer = optimizer_from_name(tr_opt);
    cfg.curv_mode =
        tr_curv == "fixed" ? CurvatureMode::Fixed : CurvatureMode::Trainable;
    cfg.validate();

    const Dataset ds = load_dataset(tr_data);
    const bool log = !quiet_log();
    FitResult res = fit(ds, cfg, [&](const EpochRecord& e) {
      if (!log) return;
      std::fprintf(stderr, "epoch %d  loss %.6f", e.epoch, e.mean_loss);
      if (e.val_mrr) std::fprintf(stderr, "  val_mrr %.4f", *e.val_mrr);
      std::fprintf(stderr, "  %.2fs\n", e.seconds);
    });

    nlohmann::json echo{{"model", tr_model},
                        {"dim", cfg.dim},
                        {"lr", cfg.lr},
                        {"optimizer", tr_opt},
                        {"batch_size", cfg.batch_size},
                        {"neg_samples", cfg.full_loss ? -1 : cfg.neg_samples},
                        {"full_loss", cfg.full_loss},
                        {"max_epochs", cfg.max_epochs},
                        {"patience", cfg.patience},
                        {"valid_period", cfg.valid_period},
                        {"seed", cfg.seed},
                        {"curvature", tr_curv},
                        {"fixed_c", cfg.fixed_c}};
    save_checkpoint(make_checkpoint(res.params, ds, echo), tr_out);
    std::printf("saved %s\n", tr_out.c_str());
    if (res.best_epoch >= 0)
      std::printf("best_epoch %d  best_val_mrr %.6f\n", res.best_epoch,
                  res.best_val_mrr);
    else if (!res.history.empty())
      std::printf("epochs %zu  final_loss %.6f\n", res.history.size(),
                  res.history.back().mean_loss);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Rank held-out triples");
  std::string ev_data, ev_ckpt, ev_split = "test", ev_out;
  bool ev_per_rel = false;
  int ev_threads = 1;
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--split", ev_split, "Split to rank")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "valid", "test"}));
  ev->add_flag("--per-relation", ev_per_rel,
               "Tab-separated per-relation table instead of totals");
  ev->add_option("--threads", ev_threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ev->add_option("--out", ev_out, "Write the report here instead of stdout");
  ev->callback([&] {
    const Dataset ds = load_dataset(ev_data);
    const Checkpoint ck = load_checkpoint_for(ev_ckpt, ds);
    const FilterIndex filter = build_filter_index(ds);
    const EvalReport rep = evaluate(ck.params, ds, split_from_name(ev_split),
                                    filter, ev_threads);
    write_text(ev_per_rel ? report_tsv(rep, ds) : report_kv(rep, ds), ev_out);
  });

  // analyze
  auto* an = app.add_subcommand(
      "analyze", "Per-relation shape and symmetry diagnostics");
  std::string an_data, an_out;
  std::uint64_t an_seed = 42;
  an->add_option("--data", an_data, "Dataset directory")->required();
  an->add_option("--seed", an_seed, "Sampling seed")->capture_default_str();
  an->add_option("--out", an_out, "Write the table here instead of stdout");
  an->callback([&] {
    const Dataset ds = load_dataset(an_data);
    write_text(analysis_tsv(analyze_dataset(ds, an_seed)), an_out);
  });

  // export
  auto* ex = app.add_subcommand(
      "export", "Dump entity embeddings and relation curvatures as text");
  std::string ex_ckpt, ex_out;
  ex->add_option("--ckpt", ex_ckpt, "Checkpoint file")->required();
  ex->add_option("--out", ex_out, "Output file")->required();
  ex->callback([&] { export_embeddings(load_checkpoint(ex_ckpt), ex_out); });

  // gradcheck
  auto* gc = app.add_subcommand(
      "gradcheck", "Finite-difference audit of the analytic gradients");
  std::string gc_model, gc_curv = "trainable";
  int gc_dim = 8, gc_instances = 20;
  std::uint64_t gc_seed = 42;
  gc->add_option("--model", gc_model, "Scoring model")
      ->required()
      ->check(CLI::IsMember(kKindNames));
  gc->add_option("--dim", gc_dim, "Embedding dimension (even)")
      ->capture_default_str()
      ->check(even_dim());
  gc->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();
  gc->add_option("--curvature", gc_curv, "Curvature handling")
      ->capture_default_str()
      ->check(CLI::IsMember({"trainable", "fixed"}));
  gc->add_option("--instances", gc_instances, "Random problems to audit")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gc->callback([&] {
    const ModelKind kind = kind_from_name(gc_model);
    const CurvatureMode mode =
        gc_curv == "fixed" ? CurvatureMode::Fixed : CurvatureMode::Trainable;
    double worst = 0.0;
    for (int i = 0; i < gc_instances; ++i) {
      GradcheckInstance inst = make_gradcheck_instance(
          kind, mode, gc_dim, mix_seed(gc_seed, static_cast<std::uint64_t>(i)));
      worst = std::max(worst, finite_difference_check(inst.params, inst.batch,
                                                      inst.negs, false));
    }
    std::printf("max relative error: %.3g\n", worst);
    if (worst > 1e-4) {
      std::fprintf(stderr, "gradcheck failed: %.3g exceeds 1e-4\n", worst);
      rc = 2;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return rc;
}

}  // namespace kge
