#include "cabkgc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <utility>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cabkgc/checkpoint.hpp"
#include "cabkgc/context.hpp"
#include "cabkgc/encoder.hpp"
#include "cabkgc/errors.hpp"
#include "cabkgc/evaluator.hpp"
#include "cabkgc/kg_store.hpp"
#include "cabkgc/sequence.hpp"
#include "cabkgc/trainer.hpp"

namespace cabkgc {

namespace {

namespace fs = std::filesystem;

std::string format6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void require_dataset_paths(const RunConfig& rc) {
  if (rc.train_path.empty()) throw InvalidConfig("field 'train' is required");
  if (rc.valid_path.empty()) throw InvalidConfig("field 'valid' is required");
  if (rc.test_path.empty()) throw InvalidConfig("field 'test' is required");
}

ModelConfig make_model_config(const RunConfig& rc, const Vocabulary& vocab) {
  ModelConfig m =
      ModelConfig::for_vocabulary(vocab.entity_count(), vocab.relation_count());
  m.d_model = rc.d_model;
  m.n_layers = rc.n_layers;
  m.n_heads = rc.n_heads;
  m.ff_dim = rc.ff_dim;
  m.max_len = rc.max_len;
  m.dropout = rc.dropout;
  m.seed = rc.seed;
  m.validate();
  return m;
}

TrainConfig make_train_config(const RunConfig& rc) {
  TrainConfig t;
  t.batch_size = rc.batch_size;
  t.learning_rate = rc.learning_rate;
  t.adam_beta1 = rc.adam_beta1;
  t.adam_beta2 = rc.adam_beta2;
  t.adam_eps = rc.adam_eps;
  t.max_epochs = rc.max_epochs;
  t.stabilization_patience = rc.patience;
  t.stabilization_decimals = rc.decimals;
  t.seed = rc.seed;
  t.validation_subsample = rc.validation_subsample;
  t.validate();
  return t;
}

EvalOptions make_eval_options(const RunConfig& rc) {
  EvalOptions o;
  o.protocol = rc.protocol == "raw" ? Protocol::Raw : Protocol::Filtered;
  o.tie_policy = rc.tie_policy == "optimistic" ? TiePolicy::Optimistic
                                               : TiePolicy::Pessimistic;
  o.n_threads = rc.threads;
  return o;
}

EntityId lookup_entity(const Vocabulary& vocab, const std::string& name) {
  if (auto id = vocab.entity_id(name)) return *id;
  throw InvalidConfig("unknown entity '" + name + "'");
}

RelationId lookup_relation(const Vocabulary& vocab, const std::string& name) {
  if (auto id = vocab.relation_id(name)) return *id;
  throw InvalidConfig("unknown relation '" + name + "'");
}

void write_effective_config(CLI::App& app, const RunConfig& rc,
                            const std::string& command) {
  fs::create_directories(rc.out_dir);
  const fs::path path = fs::path(rc.out_dir) / "effective_config.txt";
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw IoError("cannot write effective config: " + path.string());
  }
  f << "# command: " << command << "\n" << app.config_to_str(true, false);
  if (!f) {
    throw IoError("failed writing effective config: " + path.string());
  }
}

int run_ingest(const RunConfig& rc, std::ostream& out) {
  require_dataset_paths(rc);
  auto [vocab, splits] =
      ingest_splits(rc.train_path, rc.valid_path, rc.test_path);
  std::vector<Triple> all = splits.train;
  all.insert(all.end(), splits.valid.begin(), splits.valid.end());
  all.insert(all.end(), splits.test.begin(), splits.test.end());
  const KnowledgeGraph graph = KnowledgeGraph::build(
      std::move(all), vocab.entity_count(), vocab.relation_count());
  const GraphStats stats = graph.stats();
  out << "entities: " << stats.num_entities << "\n"
      << "relations: " << stats.num_relations << "\n"
      << "triples: " << stats.num_triples << "\n"
      << "train: " << splits.train.size() << " (duplicate lines dropped: "
      << splits.duplicates_removed[0] << ")\n"
      << "valid: " << splits.valid.size() << " (duplicate lines dropped: "
      << splits.duplicates_removed[1] << ")\n"
      << "test: " << splits.test.size() << " (duplicate lines dropped: "
      << splits.duplicates_removed[2] << ")\n";
  return 0;
}

int run_context(const RunConfig& rc, const std::string& head_name,
                const std::string& relation_name, std::ostream& out) {
  require_dataset_paths(rc);
  if (head_name.empty() && relation_name.empty()) {
    throw InvalidConfig("context needs --head and/or --relation");
  }
  auto [vocab, splits] =
      ingest_splits(rc.train_path, rc.valid_path, rc.test_path);
  const KnowledgeGraph graph = KnowledgeGraph::build(
      splits.train, vocab.entity_count(), vocab.relation_count());
  if (!head_name.empty()) {
    const EntityId h = lookup_entity(vocab, head_name);
    const ContextSet hc = head_context(graph, h, rc.hc_budget);
    out << "H_c(" << head_name << "): " << hc.size() << " symbols"
        << (hc.truncated ? " (truncated)" : "") << "\n"
        << render_context(hc, vocab);
  }
  if (!relation_name.empty()) {
    const RelationId r = lookup_relation(vocab, relation_name);
    const ContextSet rcx = relation_context(graph, r, rc.rc_budget);
    out << "R_c(" << relation_name << "): " << rcx.size() << " symbols"
        << (rcx.truncated ? " (truncated)" : "") << "\n"
        << render_context(rcx, vocab);
  }
  return 0;
}

nlohmann::ordered_json report_to_json(const TrainReport& report) {
  nlohmann::ordered_json j;
  j["stop_reason"] = report.stop_reason;
  j["best_epoch"] = report.best_epoch;
  j["best_val_mrr"] = report.best_val_mrr;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const EpochStats& e : report.epochs) {
    nlohmann::ordered_json je;
    je["epoch"] = e.epoch;
    je["mean_loss"] = e.mean_loss;
    je["val_mrr"] = e.val_mrr;
    nlohmann::ordered_json hits = nlohmann::ordered_json::object();
    for (const auto& [k, v] : e.val_hits_at) hits[std::to_string(k)] = v;
    je["val_hits_at"] = hits;
    je["seconds"] = e.seconds;
    epochs.push_back(je);
  }
  j["epochs"] = epochs;
  return j;
}

int run_train(const RunConfig& rc, std::ostream& out) {
  require_dataset_paths(rc);
  auto [vocab, splits] =
      ingest_splits(rc.train_path, rc.valid_path, rc.test_path);
  const KnowledgeGraph graph = KnowledgeGraph::build(
      splits.train, vocab.entity_count(), vocab.relation_count());
  const ContextCache cache(graph, {rc.hc_budget, rc.rc_budget});
  const ModelConfig mcfg = make_model_config(rc, vocab);
  const TrainConfig tcfg = make_train_config(rc);

  TrainResult result = train(mcfg, tcfg, cache, splits, &out);

  fs::create_directories(rc.out_dir);
  const fs::path ckpt_path = fs::path(rc.out_dir) / "checkpoint.cabk";
  save_checkpoint(result.params, mcfg, vocab.fingerprint(), ckpt_path);
  const fs::path report_path = fs::path(rc.out_dir) / "train_report.json";
  std::ofstream rf(report_path, std::ios::trunc);
  if (!rf) throw IoError("cannot write train report: " + report_path.string());
  rf << report_to_json(result.report).dump(2) << "\n";

  out << "stop reason: " << result.report.stop_reason << "\n"
      << "epochs: " << result.report.epochs.size() << "\n"
      << "best epoch: " << result.report.best_epoch << " (val MRR "
      << format6(result.report.best_val_mrr) << ")\n"
      << "checkpoint: " << ckpt_path.string() << "\n";
  return 0;
}

void print_metrics_table(const MetricsReport& report, std::ostream& out) {
  std::string header = "MRR";
  std::string values = format6(report.mrr);
  for (const auto& [k, v] : report.hits_at) {
    header += "\tHits@" + std::to_string(k);
    values += "\t" + format6(v);
  }
  out << header << "\n" << values << "\n";
}

int run_evaluate(const RunConfig& rc, const std::string& checkpoint_path,
                 const std::string& split_name, std::ostream& out) {
  require_dataset_paths(rc);
  auto [vocab, splits] =
      ingest_splits(rc.train_path, rc.valid_path, rc.test_path);
  const CheckpointData ckpt =
      load_checkpoint(checkpoint_path, vocab.fingerprint());
  const KnowledgeGraph graph = KnowledgeGraph::build(
      splits.train, vocab.entity_count(), vocab.relation_count());
  const ContextCache cache(graph, {rc.hc_budget, rc.rc_budget});

  const std::vector<Triple>* eval_split = &splits.test;
  if (split_name == "train") {
    eval_split = &splits.train;
  } else if (split_name == "valid") {
    eval_split = &splits.valid;
  }
  const MetricsReport report = evaluate_split(
      ckpt.params, ckpt.config, cache, splits, *eval_split,
      make_eval_options(rc));

  out << "split: " << split_name << "\n" << report.to_text();
  print_metrics_table(report, out);

  fs::create_directories(rc.out_dir);
  const fs::path metrics_path = fs::path(rc.out_dir) / "metrics.json";
  std::ofstream mf(metrics_path, std::ios::trunc);
  if (!mf) throw IoError("cannot write metrics: " + metrics_path.string());
  mf << report.to_json_string() << "\n";
  return 0;
}

int run_predict(const RunConfig& rc, const std::string& checkpoint_path,
                const std::string& head_name, const std::string& relation_name,
                std::size_t top_k, std::ostream& out) {
  require_dataset_paths(rc);
  auto [vocab, splits] =
      ingest_splits(rc.train_path, rc.valid_path, rc.test_path);
  const KnowledgeGraph graph = KnowledgeGraph::build(
      splits.train, vocab.entity_count(), vocab.relation_count());
  const ContextCache cache(graph, {rc.hc_budget, rc.rc_budget});

  ModelConfig mcfg;
  Parameters params;
  if (!checkpoint_path.empty()) {
    CheckpointData ckpt = load_checkpoint(checkpoint_path, vocab.fingerprint());
    mcfg = ckpt.config;
    params = std::move(ckpt.params);
  } else {
    // Untrained, seeded model: still a valid distribution, useful for
    // pipeline smoke checks.
    mcfg = make_model_config(rc, vocab);
    params = init_parameters(mcfg);
  }

  const EntityId h = lookup_entity(vocab, head_name);
  const RelationId r = lookup_relation(vocab, relation_name);
  const InputSequence seq = build_input_sequence(
      h, cache.head(h), r, cache.relation(r), mcfg.max_len);
  const Eigen::VectorXd probs = predict_tail_distribution(params, mcfg, seq);

  std::vector<std::uint32_t> order(vocab.entity_count());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              const double pa = probs[static_cast<Eigen::Index>(a)];
              const double pb = probs[static_cast<Eigen::Index>(b)];
              if (pa != pb) return pa > pb;
              return a < b;
            });
  const std::size_t n = std::min(top_k, order.size());
  for (std::size_t i = 0; i < n; ++i) {
    out << (i + 1) << "\t" << vocab.entity_name(EntityId{order[i]}) << "\t"
        << format6(probs[static_cast<Eigen::Index>(order[i])]) << "\n";
  }
  return 0;
}

int run_check_gradients(const RunConfig& rc, std::size_t entities,
                        std::size_t relations, std::size_t probes,
                        std::ostream& out, std::ostream& err) {
  ModelConfig cfg;
  cfg.d_model = rc.d_model;
  cfg.n_layers = rc.n_layers;
  cfg.n_heads = rc.n_heads;
  cfg.ff_dim = rc.ff_dim;
  cfg.max_len = rc.max_len;
  cfg.entity_count = entities;
  cfg.token_vocab_size = entities + relations + 3;
  cfg.seed = rc.seed;
  cfg.validate();

  const GradientCheckReport report = check_gradients(cfg, probes);
  if (!report.note.empty()) {
    err << "warning: " << report.note << "\n";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", report.max_rel_error);
  out << "max relative error: " << buf << " over " << report.probes
      << " probes\n";
  if (!report.worst_tensor.empty()) {
    out << "worst tensor: " << report.worst_tensor << "[" << report.worst_row
        << "," << report.worst_col << "] analytic " << report.worst_analytic
        << " vs numeric " << report.worst_numeric << "\n";
  }
  const bool pass = report.max_rel_error < 1e-4;
  out << (pass ? "PASS" : "FAIL") << " (threshold 1e-4)\n";
  return pass ? 0 : 3;
}

int classify_error(const Error& e) {
  if (dynamic_cast<const InvalidConfig*>(&e)) return 1;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const MalformedLine*>(&e) ||
      dynamic_cast<const EmptySplit*>(&e) || dynamic_cast<const EmptyInput*>(&e) ||
      dynamic_cast<const VocabularyMismatch*>(&e) ||
      dynamic_cast<const FormatVersionMismatch*>(&e) ||
      dynamic_cast<const ChecksumMismatch*>(&e)) {
    return 2;
  }
  return 3;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  RunConfig rc;
  CLI::App app{"cabkgc: context-aware knowledge-graph completion toolkit",
               "cabkgc"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "",
                 "Read options from a key=value config file; command-line "
                 "flags take precedence");

  app.add_option("--train", rc.train_path, "Training triple file (TSV)");
  app.add_option("--valid", rc.valid_path, "Validation triple file (TSV)");
  app.add_option("--test", rc.test_path, "Test triple file (TSV)");

  app.add_option("--d-model", rc.d_model, "Encoder width");
  app.add_option("--n-layers", rc.n_layers, "Encoder layers");
  app.add_option("--n-heads", rc.n_heads, "Attention heads");
  app.add_option("--ff-dim", rc.ff_dim, "Feed-forward width");
  app.add_option("--max-len", rc.max_len, "Input sequence length");
  app.add_option("--dropout", rc.dropout, "Dropout probability");

  app.add_option("--batch-size", rc.batch_size, "Training batch size");
  app.add_option("--learning-rate", rc.learning_rate, "Adam learning rate");
  app.add_option("--adam-beta1", rc.adam_beta1, "Adam beta1");
  app.add_option("--adam-beta2", rc.adam_beta2, "Adam beta2");
  app.add_option("--adam-eps", rc.adam_eps, "Adam epsilon");
  app.add_option("--max-epochs", rc.max_epochs, "Epoch cap");
  app.add_option("--patience", rc.patience,
                 "Consecutive stable epochs before stopping");
  app.add_option("--decimals", rc.decimals,
                 "Decimals the stabilization rule rounds to");
  app.add_option("--val-subsample", rc.validation_subsample,
                 "Validation queries per epoch (0 = all)");

  app.add_option("--hc-budget", rc.hc_budget, "Head context budget");
  app.add_option("--rc-budget", rc.rc_budget, "Relation context budget");

  app.add_option("--protocol", rc.protocol, "Ranking protocol")
      ->check(CLI::IsMember({"filtered", "raw"}));
  app.add_option("--tie-policy", rc.tie_policy, "Rank tie policy")
      ->check(CLI::IsMember({"pessimistic", "optimistic"}));
  app.add_option("--threads", rc.threads, "Evaluation worker threads");

  app.add_option("--out-dir", rc.out_dir, "Output directory");
  app.add_option("--seed", rc.seed, "RNG seed");

  CLI::App* ingest_cmd =
      app.add_subcommand("ingest", "Parse splits and print graph statistics");
  ingest_cmd->fallthrough();

  std::string head_name;
  std::string relation_name;
  CLI::App* context_cmd = app.add_subcommand(
      "context", "Print H_c / R_c extracted from the training graph");
  context_cmd->fallthrough();
  context_cmd->add_option("--head", head_name, "Head entity name");
  context_cmd->add_option("--relation", relation_name, "Relation name");

  CLI::App* train_cmd = app.add_subcommand(
      "train", "Train the encoder-classifier and write a checkpoint");
  train_cmd->fallthrough();

  std::string checkpoint_path;
  std::string split_name = "test";
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "Rank a split and print MRR / Hits@k");
  evaluate_cmd->fallthrough();
  evaluate_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  evaluate_cmd->add_option("--split", split_name, "Split to evaluate")
      ->check(CLI::IsMember({"train", "valid", "test"}));

  std::string predict_checkpoint;
  std::string predict_head;
  std::string predict_relation;
  std::size_t top_k = 10;
  CLI::App* predict_cmd = app.add_subcommand(
      "predict", "Print the top-k predicted tails for (head, relation)");
  predict_cmd->fallthrough();
  predict_cmd->add_option("--checkpoint", predict_checkpoint,
                          "Checkpoint file (omit for an untrained seeded "
                          "model)");
  predict_cmd->add_option("--head", predict_head, "Head entity name")
      ->required();
  predict_cmd->add_option("--relation", predict_relation, "Relation name")
      ->required();
  predict_cmd->add_option("--top-k", top_k, "Number of tails to print");

  std::size_t cg_entities = 20;
  std::size_t cg_relations = 5;
  std::size_t cg_probes = 200;
  CLI::App* check_cmd = app.add_subcommand(
      "check-gradients",
      "Compare analytic gradients against central finite differences");
  check_cmd->fallthrough();
  check_cmd->add_option("--entities", cg_entities, "Synthetic entity count");
  check_cmd->add_option("--relations", cg_relations,
                        "Synthetic relation count");
  check_cmd->add_option("--probes", cg_probes, "Probed coordinates");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    write_effective_config(app, rc, command);
    if (ingest_cmd->parsed()) return run_ingest(rc, out);
    if (context_cmd->parsed()) {
      return run_context(rc, head_name, relation_name, out);
    }
    if (train_cmd->parsed()) return run_train(rc, out);
    if (evaluate_cmd->parsed()) {
      return run_evaluate(rc, checkpoint_path, split_name, out);
    }
    if (predict_cmd->parsed()) {
      return run_predict(rc, predict_checkpoint, predict_head,
                         predict_relation, top_k, out);
    }
    if (check_cmd->parsed()) {
      return run_check_gradients(rc, cg_entities, cg_relations, cg_probes, out,
                                 err);
    }
    err << "error: no command selected\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return classify_error(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace cabkgc
