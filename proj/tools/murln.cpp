// murln: command-line workflow over the header-only library.
//
// Every failure prints "error: <category>: <message>" on stderr and exits with
// the category's code (2 + category index). A gradient check that runs but
// does not pass exits with 1; unexpected exceptions print "internal" and
// exit with the first code after the categories.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "murln/murln.hpp"

using namespace murln;

namespace {

struct DataArgs {
  std::string dataset;
  std::string embeddings;
  std::string stats;
};

// Owns everything a FeatureExtractor refers to; never moved after construction.
struct Workspace {
  Dataset data;
  EmbeddingTable embeddings{0};
  std::optional<TripletStatistics> stats;
  std::optional<FeatureExtractor> features;
};

void add_data_options(CLI::App* cmd, DataArgs& a, bool need_embeddings) {
  cmd->add_option("--dataset", a.dataset, "Dataset JSON file")->required();
  auto* e = cmd->add_option("--embeddings", a.embeddings, "Word-embedding text file");
  if (need_embeddings) e->required();
  cmd->add_option("--stats", a.stats,
                  "Triplet statistics JSON (default: counted from the train split)");
}

std::unique_ptr<Workspace> load_workspace(const DataArgs& a) {
  auto ws = std::make_unique<Workspace>();
  ws->data = load_dataset(a.dataset);
  ws->embeddings = load_embeddings(a.embeddings);
  if (a.stats.empty()) {
    ws->stats.emplace(build_triplet_statistics(ws->data.scenes, ws->data.vocab));
  } else {
    ws->stats.emplace(statistics_from_json(parse_json(read_text_file(a.stats), a.stats)));
  }
  ws->features.emplace(ws->data.vocab, *ws->stats, ws->embeddings, ws->data.visual);
  return ws;
}

std::vector<std::size_t> parse_cutoffs(const std::vector<std::size_t>& v) {
  if (v.empty()) throw UsageError("at least one recall cut-off is required");
  return v;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SyntheticConfig config;
  std::string out;
  std::string embeddings_out;
};

void setup_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Generate a seeded synthetic dataset and embeddings");
  auto& c = a.config;
  cmd->add_option("--out", a.out, "Dataset JSON to write (features go next to it)")->required();
  cmd->add_option("--embeddings-out", a.embeddings_out, "Embedding text file to write")
      ->required();
  cmd->add_option("--objects", c.num_objects, "Object categories")->capture_default_str();
  cmd->add_option("--predicates", c.num_predicates, "Predicates")->capture_default_str();
  cmd->add_option("--train-scenes", c.train_scenes)->capture_default_str();
  cmd->add_option("--validation-scenes", c.validation_scenes)->capture_default_str();
  cmd->add_option("--test-scenes", c.test_scenes)->capture_default_str();
  cmd->add_option("--visual-dim", c.visual_dim)->capture_default_str();
  cmd->add_option("--embedding-dim", c.embedding_dim)->capture_default_str();
  cmd->add_option("--min-relations", c.min_relations)->capture_default_str();
  cmd->add_option("--max-relations", c.max_relations)->capture_default_str();
  cmd->add_option("--min-distractors", c.min_distractors)->capture_default_str();
  cmd->add_option("--max-distractors", c.max_distractors)->capture_default_str();
  cmd->add_option("--box-jitter", c.box_jitter)->capture_default_str();
  cmd->add_option("--label-flip-rate", c.label_flip_rate)->capture_default_str();
  cmd->add_option("--spurious-rate", c.spurious_rate)->capture_default_str();
  cmd->add_option("--miss-rate", c.miss_rate)->capture_default_str();
  cmd->add_option("--visual-noise", c.visual_noise)->capture_default_str();
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->callback([&a] {
    const auto syn = generate_synthetic(a.config);
    save_dataset(syn.dataset, a.out);
    save_embeddings(syn.embeddings, a.embeddings_out);
    std::printf("wrote %zu scenes to %s\n", syn.dataset.scenes.size(), a.out.c_str());
  });
}

// ---------------------------------------------------------------------------

struct PairsArgs {
  std::string dataset;
  std::string split = "train";
  std::string task = "relation";
  std::size_t max_undetermined = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void setup_generate_pairs(CLI::App& app, PairsArgs& a) {
  auto* cmd = app.add_subcommand("generate-pairs", "Label candidate pairs as determinate or undetermined");
  cmd->add_option("--dataset", a.dataset)->required();
  cmd->add_option("--split", a.split, "train, validation or test")->capture_default_str();
  cmd->add_option("--task", a.task, "predicate uses ground-truth pairs; phrase/relation use detections")
      ->capture_default_str();
  cmd->add_option("--max-undetermined-per-scene", a.max_undetermined, "0 keeps all")
      ->capture_default_str();
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--out", a.out, "Pairs JSON to write")->required();
  cmd->callback([&a] {
    const auto data = load_dataset(a.dataset);
    const auto pairs = build_training_pairs(data.split(parse_split(a.split)),
                                            data.vocab.num_predicates(), parse_task(a.task),
                                            a.max_undetermined, a.seed);
    Json scenes = Json::array();
    for (std::size_t i = 0; i < pairs.scenes.size(); ++i) {
      scenes.push_back(pairs_to_json(*pairs.scenes[i], pairs.per_scene[i]));
    }
    const Json doc{{"schema", "murln-pairs"},
                   {"version", 1},
                   {"split", a.split},
                   {"task", a.task},
                   {"determinate", pairs.determinate.size()},
                   {"undetermined", pairs.undetermined.size()},
                   {"scenes", std::move(scenes)}};
    write_text_file(a.out, doc.dump(1) + "\n");
    std::printf("%zu determinate, %zu undetermined pairs\n", pairs.determinate.size(),
                pairs.undetermined.size());
  });
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string dataset;
  std::string out;
};

void setup_build_stats(CLI::App& app, StatsArgs& a) {
  auto* cmd = app.add_subcommand("build-stats", "Count training triplets for the internal linguistic modal");
  cmd->add_option("--dataset", a.dataset)->required();
  cmd->add_option("--out", a.out, "Statistics JSON to write")->required();
  cmd->callback([&a] {
    const auto data = load_dataset(a.dataset);
    const auto stats = build_triplet_statistics(data.scenes, data.vocab);
    write_text_file(a.out, statistics_to_json(stats, data.vocab).dump(1) + "\n");
    std::printf("%llu training triplets\n", static_cast<unsigned long long>(stats.total()));
  });
}

// ---------------------------------------------------------------------------

// Model flags shared by train and gradcheck.
struct ModelArgs {
  std::optional<std::size_t> transform_dim, dc_hidden_dim, rel_hidden_dim;
  bool no_visual = false, no_spatial = false, no_internal = false, no_external = false;
  std::string fusion = "transforming";
  std::string dc_signal = "probability";
  bool im = false;
  std::optional<double> alpha, lambda1, lambda2;
  std::uint64_t init_seed = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--transform-dim", transform_dim, "Per-feature transform width");
    cmd->add_option("--dc-hidden-dim", dc_hidden_dim, "Determinate-confidence hidden width");
    cmd->add_option("--rel-hidden-dim", rel_hidden_dim, "Relation hidden width");
    cmd->add_flag("--no-visual", no_visual);
    cmd->add_flag("--no-spatial", no_spatial);
    cmd->add_flag("--no-internal", no_internal, "Drop the statistics-based linguistic feature");
    cmd->add_flag("--no-external", no_external, "Drop the embedding-based linguistic feature");
    cmd->add_option("--fusion", fusion, "transforming or concatenating")
        ->check(CLI::IsMember({"transforming", "concatenating"}))
        ->capture_default_str();
    cmd->add_option("--dc-signal", dc_signal, "probability or hidden")
        ->check(CLI::IsMember({"probability", "hidden"}))
        ->capture_default_str();
    cmd->add_flag("--im", im, "Union, subject and object networks");
    cmd->add_option("--alpha", alpha);
    cmd->add_option("--lambda1", lambda1);
    cmd->add_option("--lambda2", lambda2);
    cmd->add_option("--init-seed", init_seed)->capture_default_str();
  }

  void apply(ModelConfig& c) const {
    if (transform_dim) c.transform_dim = *transform_dim;
    if (dc_hidden_dim) c.dc_hidden_dim = *dc_hidden_dim;
    if (rel_hidden_dim) c.rel_hidden_dim = *rel_hidden_dim;
    c.use_visual = !no_visual;
    c.use_spatial = !no_spatial;
    c.use_internal = !no_internal;
    c.use_external = !no_external;
    c.fusion = fusion == "concatenating" ? FusionMode::Concatenating : FusionMode::Transforming;
    c.dc_signal = dc_signal == "hidden" ? DcSignal::Hidden : DcSignal::Probability;
    c.im_mode = im;
    if (alpha) c.alpha = *alpha;
    if (lambda1) c.lambda1 = *lambda1;
    if (lambda2) c.lambda2 = *lambda2;
    c.init_seed = init_seed;
  }
};

struct TrainArgs {
  DataArgs data;
  ModelArgs model;
  std::string task = "relation";
  std::string preset = "vrd";
  std::optional<double> lr, decay;
  std::optional<std::uint64_t> decay_interval;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 0;
  std::size_t batch_size = 32;
  std::optional<double> undetermined_parts, determinate_parts;
  std::size_t max_undetermined = 0;
  bool no_selection = false;
  std::size_t selection_recall_at = 50;
  bool determinate_only = false;
  std::uint64_t seed = 0;
  std::string checkpoint_out;
  std::string log_out;
};

RunConfig run_config(const TrainArgs& a, const Workspace& ws) {
  RunConfig rc;
  apply_task_preset(rc, parse_task(a.task));
  if (a.determinate_only) apply_determinate_only(rc);
  rc.optimizer = schedule_preset(a.preset);
  if (a.lr) rc.optimizer.base_lr = *a.lr;
  if (a.decay) rc.optimizer.decay = *a.decay;
  if (a.decay_interval) rc.optimizer.decay_interval = *a.decay_interval;
  rc.model.visual_dim = ws.features->visual_dim();
  rc.model.embedding_dim = ws.features->embedding_dim();
  rc.model.num_objects = ws.data.vocab.num_objects();
  rc.model.num_predicates = ws.data.vocab.num_predicates();
  a.model.apply(rc.model);
  rc.batch.batch_size = a.batch_size;
  if (a.undetermined_parts) rc.batch.undetermined_parts = *a.undetermined_parts;
  if (a.determinate_parts) rc.batch.determinate_parts = *a.determinate_parts;
  rc.epochs = a.epochs;
  rc.steps_per_epoch = a.steps_per_epoch;
  rc.max_undetermined_per_scene = a.max_undetermined;
  rc.select_on_validation = !a.no_selection;
  rc.selection_recall_at = a.selection_recall_at;
  rc.seed = a.seed;
  return rc;
}

void setup_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train a model and write a checkpoint and a JSONL log");
  add_data_options(cmd, a.data, true);
  a.model.add(cmd);
  cmd->add_option("--task", a.task, "predicate, phrase or relation (sets lambdas and batch ratio)")
      ->capture_default_str();
  cmd->add_option("--preset", a.preset, "Learning-rate schedule: vrd or vg")->capture_default_str();
  cmd->add_option("--lr", a.lr, "Base learning rate (overrides the preset)");
  cmd->add_option("--decay", a.decay, "Decay factor (overrides the preset)");
  cmd->add_option("--decay-interval", a.decay_interval, "Steps between decays (overrides the preset)");
  cmd->add_option("--epochs", a.epochs)->capture_default_str();
  cmd->add_option("--steps-per-epoch", a.steps_per_epoch, "0: one pass over the determinate pool")
      ->capture_default_str();
  cmd->add_option("--batch-size", a.batch_size)->capture_default_str();
  cmd->add_option("--undetermined-parts", a.undetermined_parts, "Batch ratio, undetermined side");
  cmd->add_option("--determinate-parts", a.determinate_parts, "Batch ratio, determinate side");
  cmd->add_option("--max-undetermined-per-scene", a.max_undetermined, "0 keeps all")
      ->capture_default_str();
  cmd->add_flag("--no-selection", a.no_selection, "Keep the last epoch instead of the best validation epoch");
  cmd->add_option("--selection-recall-at", a.selection_recall_at)->capture_default_str();
  cmd->add_flag("--determinate-only", a.determinate_only, "Train on determinate pairs only (lambda1 = lambda2 = 0)");
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--checkpoint-out", a.checkpoint_out)->required();
  cmd->add_option("--log-out", a.log_out, "Training log (JSONL)");
  cmd->callback([&a] {
    const auto ws = load_workspace(a.data);
    const RunConfig rc = run_config(a, *ws);
    const auto result = run_training(ws->data, *ws->features, rc);
    save_checkpoint(a.checkpoint_out, *result.model);
    if (!a.log_out.empty()) {
      std::ostringstream log;
      write_training_log(log, result);
      write_text_file(a.log_out, log.str());
    }
    std::printf("%zu steps, final loss %s", result.steps.size(),
                result.steps.empty() ? "n/a" : format_double(result.steps.back().loss.total).c_str());
    if (result.best_epoch) {
      std::printf(", best validation epoch %zu (R@%zu %s)", *result.best_epoch,
                  rc.selection_recall_at,
                  format_double(*result.epochs[*result.best_epoch].validation_recall).c_str());
    }
    std::printf("\n");
  });
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  DataArgs data;
  std::string checkpoint;
  std::string scorer = "model";
  std::string split = "test";
  std::vector<std::string> tasks{"predicate", "phrase", "relation"};
  std::string task = "relation";
  std::vector<std::size_t> recall_at{50, 100};
  std::size_t k = 1;
  bool zero_shot = false;
  bool macro = false;
  std::uint64_t seed = 0;
  std::string out;
};

struct ScoringContext {
  std::unique_ptr<Workspace> ws;
  std::optional<Model> model;
  PairScorer scorer;
};

ScoringContext scoring_context(const DataArgs& data, const std::string& kind,
                               const std::string& checkpoint, std::uint64_t seed) {
  ScoringContext ctx;
  if (kind == "model") {
    if (checkpoint.empty()) throw UsageError("--checkpoint is required with --scorer model");
    if (data.embeddings.empty()) throw UsageError("--embeddings is required with --scorer model");
    ctx.ws = load_workspace(data);
    ctx.model.emplace(load_checkpoint(checkpoint));
    check_compatible(ctx.model->config(), ctx.ws->data, *ctx.ws->features);
    ctx.scorer = model_scorer(*ctx.model, *ctx.ws->features);
    return ctx;
  }
  ctx.ws = std::make_unique<Workspace>();
  ctx.ws->data = load_dataset(data.dataset);
  const std::size_t m = ctx.ws->data.vocab.num_predicates();
  ctx.scorer = kind == "oracle" ? oracle_scorer(m) : uniform_random_scorer(m, seed);
  return ctx;
}

void add_scoring_options(CLI::App* cmd, EvalArgs& a) {
  add_data_options(cmd, a.data, false);
  cmd->add_option("--checkpoint", a.checkpoint);
  cmd->add_option("--scorer", a.scorer, "model, oracle or random")
      ->check(CLI::IsMember({"model", "oracle", "random"}))
      ->capture_default_str();
  cmd->add_option("--split", a.split)->capture_default_str();
  cmd->add_option("--k", a.k, "Predicates kept per pair")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Seed of the random scorer")->capture_default_str();
  cmd->add_option("--out", a.out)->required();
}

void setup_evaluate(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("evaluate", "Write a recall report for the selected tasks");
  add_scoring_options(cmd, a);
  cmd->add_option("--tasks", a.tasks, "Any of predicate, phrase, relation")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--recall-at", a.recall_at, "Cut-offs N")->delimiter(',')->capture_default_str();
  cmd->add_flag("--zero-shot", a.zero_shot, "Add a block restricted to triplet types unseen in training");
  cmd->add_flag("--macro", a.macro, "Average recall per image instead of pooling hits");
  cmd->callback([&a] {
    auto ctx = scoring_context(a.data, a.scorer, a.checkpoint, a.seed);
    const Dataset& data = ctx.ws->data;
    const TripletTypeSet types = training_triplet_types(data.scenes);
    const auto scenes = data.split(parse_split(a.split));
    std::vector<EvalResult> results;
    for (const auto& name : a.tasks) {
      EvalConfig cfg;
      cfg.task = parse_task(name);
      cfg.recall_at = parse_cutoffs(a.recall_at);
      cfg.top_k_predicates = a.k;
      cfg.zero_shot_only = a.zero_shot;
      cfg.macro_average = a.macro;
      results.push_back(evaluate(scenes, data.vocab.num_predicates(), ctx.scorer, cfg, &types));
    }
    const Json report = metrics_report(results, a.split);
    write_text_file(a.out, report.dump(1) + "\n");
    std::printf("%s\n", report.at("summary").dump().c_str());
    for (const auto& r : results) {
      if (r.all.error) throw UndefinedMetricError(std::string(task_name(r.task)) + ": " + *r.all.error);
    }
  });
}

void setup_predict(CLI::App& app, EvalArgs& a, std::size_t& top) {
  auto* cmd = app.add_subcommand("predict", "Write ranked triplet predictions per image");
  add_scoring_options(cmd, a);
  cmd->add_option("--task", a.task, "predicate, phrase or relation")->capture_default_str();
  cmd->add_option("--top", top, "Triplets kept per image (0 keeps all)")->capture_default_str();
  cmd->callback([&a, &top] {
    auto ctx = scoring_context(a.data, a.scorer, a.checkpoint, a.seed);
    const Dataset& data = ctx.ws->data;
    const Task task = parse_task(a.task);
    Json images = Json::array();
    std::size_t count = 0;
    for (const SceneRecord* scene : data.split(parse_split(a.split))) {
      auto preds = predict_scene(*scene, task, a.k, data.vocab.num_predicates(), ctx.scorer);
      if (top > 0 && preds.triplets.size() > top) {
        preds.triplets.erase(preds.triplets.begin() + static_cast<std::ptrdiff_t>(top), preds.triplets.end());
      }
      count += preds.triplets.size();
      images.push_back(predictions_to_json(preds, data.vocab));
    }
    const Json doc{{"schema", "murln-predictions"},
                   {"version", 1},
                   {"split", a.split},
                   {"task", task_name(task)},
                   {"images", std::move(images)}};
    write_text_file(a.out, doc.dump(1) + "\n");
    std::printf("%zu triplets over %zu images\n", count, doc.at("images").size());
  });
}

// ---------------------------------------------------------------------------

struct GradArgs {
  ModelArgs model;
  std::size_t instances = 20;
  std::size_t batch = 6;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  std::size_t visual_dim = 12, embedding_dim = 6, predicates = 4, objects = 5;
  std::string out;
  int status = 0;
};

void setup_gradcheck(CLI::App& app, GradArgs& a) {
  auto* cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full training graph on toy instances");
  a.model.add(cmd);
  cmd->add_option("--instances", a.instances)->capture_default_str();
  cmd->add_option("--batch-size", a.batch)->capture_default_str();
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--tolerance", a.tolerance)->capture_default_str();
  cmd->add_option("--visual-dim", a.visual_dim)->capture_default_str();
  cmd->add_option("--embedding-dim", a.embedding_dim)->capture_default_str();
  cmd->add_option("--predicates", a.predicates)->capture_default_str();
  cmd->add_option("--objects", a.objects)->capture_default_str();
  cmd->add_option("--out", a.out, "Report JSON");
  cmd->callback([&a] {
    ModelConfig base = toy_model_config();
    base.visual_dim = a.visual_dim;
    base.embedding_dim = a.embedding_dim;
    base.num_predicates = a.predicates;
    base.num_objects = a.objects;
    a.model.apply(base);
    GradCheckOptions opts;
    opts.tolerance = a.tolerance;
    Json runs = Json::array();
    double worst = 0.0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < a.instances; ++i) {
      ModelConfig c = base;
      c.init_seed = base.init_seed + a.seed * 1000 + i;
      Model m(c);
      jitter_biases(m, 0.1, a.seed * 7919 + i);
      const auto [in, targets] = random_toy_batch(c, a.batch, a.seed * 104729 + i);
      const auto report = check_model_gradients(m, in, targets, opts);
      worst = std::max(worst, report.max_relative_error());
      failed += report.passed ? 0 : 1;
      Json blocks = Json::object();
      for (const auto& b : report.blocks) blocks[b.name] = b.max_relative_error;
      Json run{{"instance", i}, {"passed", report.passed},
               {"max_relative_error", report.max_relative_error()}, {"blocks", std::move(blocks)}};
      if (const auto* w = report.worst_failing()) run["worst_block"] = w->name;
      runs.push_back(std::move(run));
    }
    const Json doc{{"schema", "murln-gradcheck"}, {"version", 1}, {"tolerance", a.tolerance},
                   {"passed", failed == 0}, {"max_relative_error", worst}, {"instances", runs}};
    if (!a.out.empty()) write_text_file(a.out, doc.dump(1) + "\n");
    std::printf("%s: %zu/%zu instances passed, max relative error %s (tolerance %s)\n",
                failed == 0 ? "PASS" : "FAIL", a.instances - failed, a.instances,
                format_double(worst).c_str(), format_double(a.tolerance).c_str());
    a.status = failed == 0 ? 0 : 1;
  });
}

int fail(ErrorCategory c, const std::string& msg) {
  std::fprintf(stderr, "error: %s: %s\n", category_name(c), msg.c_str());
  return exit_code(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal relation learning with undetermined pairs"};
  app.require_subcommand(1);

  SynthArgs synth;
  PairsArgs pairs;
  StatsArgs stats;
  TrainArgs train;
  EvalArgs eval, pred;
  std::size_t top = 100;
  GradArgs grad;
  setup_synth(app, synth);
  setup_generate_pairs(app, pairs);
  setup_build_stats(app, stats);
  setup_train(app, train);
  setup_evaluate(app, eval);
  setup_predict(app, pred, top);
  setup_gradcheck(app, grad);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCategory::Usage, e.what());
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const Json::exception& e) {
    return fail(ErrorCategory::Ingestion, e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return exit_code(ErrorCategory::Usage) + 1;
  }
  return grad.status;
}
