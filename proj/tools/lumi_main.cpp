// lumi: long-tail conversational recommendation toolkit.
//
// Subcommands: ingest, segment, stats, select-prototypes, retrieve, augment,
// review, train, evaluate, experiment, report. Every run writes a manifest
// with input/artifact digests; identical config + inputs reproduce identical
// artifacts byte for byte (timestamps live only in the manifest).

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lumi/augment.hpp"
#include "lumi/config.hpp"
#include "lumi/corpus.hpp"
#include "lumi/embed.hpp"
#include "lumi/eval.hpp"
#include "lumi/losses.hpp"
#include "lumi/prototype.hpp"
#include "lumi/trainer.hpp"
#include "lumi/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunContext {
  lumi::RunConfig cfg;
  lumi::RunManifest manifest;
  fs::path out;

  explicit RunContext(lumi::RunConfig config, const std::string& subcommand)
      : cfg(std::move(config)), out(cfg.out_dir) {
    fs::create_directories(out);
    manifest.subcommand = subcommand;
    manifest.tool_version = LUMI_VERSION;
    manifest.started_at = lumi::utc_timestamp();
    manifest.config_hash = lumi::sha256_hex(cfg.snapshot_json());
  }

  void add_input(const fs::path& path) { manifest.add_input(path); }

  fs::path write_artifact(const std::string& name, std::string_view content) {
    const fs::path path = out / name;
    lumi::atomic_write_file(path, content);
    manifest.add_artifact(path);
    return path;
  }

  void finish() {
    manifest.finished_at = lumi::utc_timestamp();
    manifest.write(out / "manifest.json");
  }
};

std::unique_ptr<lumi::Embedder> make_embedder(const lumi::RunConfig& cfg,
                                              const lumi::Corpus* corpus) {
  if (cfg.embedder == "remote")
    return lumi::make_remote_embedder(cfg.remote_embed_url, cfg.remote_embed_model,
                                      cfg.embed_dim);
  auto hashed = std::make_unique<lumi::HashedEmbedder>(cfg.embed_dim);
  if (corpus != nullptr) hashed->fit_idf(*corpus);
  return hashed;
}

lumi::Segmentation make_segmentation(const lumi::RunConfig& cfg,
                                     const lumi::PopularityTable& pop) {
  return cfg.quartile ? lumi::segment_by_quartile(pop, cfg.body_max)
                      : lumi::segment(pop, cfg.tail_max, cfg.body_max);
}

json prototype_entry(const lumi::Prototype& proto, const lumi::SupportSet& support) {
  json neighbors = json::array();
  for (const auto& [dialogue_id, score] : support.neighbors)
    neighbors.push_back({{"dialogue_id", dialogue_id}, {"score", score}});
  return json{{"movie_id", proto.movie_id},
              {"prototype_dialogue_id", proto.dialogue_id},
              {"neighbors", neighbors}};
}

int cmd_ingest(RunContext& ctx) {
  ctx.add_input(ctx.cfg.corpus_path);
  const lumi::Corpus corpus = lumi::ingest(ctx.cfg.corpus_path);
  const lumi::PopularityTable pop = lumi::compute_popularity(corpus);
  std::int64_t mentioned = 0;
  for (const auto& [id, n] : pop.pop) mentioned += n >= 1;
  json warnings = json::array();
  for (const lumi::IngestWarning& w : corpus.warnings)
    warnings.push_back(
        {{"line", w.line_number}, {"dialogue_id", w.dialogue_id}, {"message", w.message}});
  json doc{{"dialogues", corpus.dialogues.size()},
           {"catalog", corpus.catalog.size()},
           {"mentioned_movies", mentioned},
           {"warnings", warnings}};
  ctx.write_artifact("corpus_summary.json", doc.dump(2) + "\n");
  std::cout << "ingested " << corpus.dialogues.size() << " dialogues, "
            << corpus.catalog.size() << " catalog movies, " << corpus.warnings.size()
            << " warnings\n";
  return 0;
}

int cmd_segment(RunContext& ctx) {
  ctx.add_input(ctx.cfg.corpus_path);
  const lumi::Corpus corpus = lumi::ingest(ctx.cfg.corpus_path);
  const lumi::PopularityTable pop = lumi::compute_popularity(corpus);
  const lumi::Segmentation seg = make_segmentation(ctx.cfg, pop);
  ctx.write_artifact("segmentation.json", lumi::segmentation_to_json_string(seg, pop) + "\n");
  std::cout << "head " << seg.head.size() << ", body " << seg.body.size() << ", tail "
            << seg.tail.size() << " (thresholds " << seg.tail_max << "/" << seg.body_max
            << ")\n";
  return 0;
}

int cmd_stats(RunContext& ctx) {
  ctx.add_input(ctx.cfg.corpus_path);
  const lumi::Corpus corpus = lumi::ingest(ctx.cfg.corpus_path);
  const lumi::PopularityTable pop = lumi::compute_popularity(corpus);
  const lumi::Segmentation seg = make_segmentation(ctx.cfg, pop);
  const lumi::StatsReport report = lumi::corpus_stats(corpus, seg);
  ctx.write_artifact("stats.json", report.to_json_string() + "\n");
  ctx.write_artifact("stats.md", report.to_markdown());
  std::cout << report.to_markdown();
  return 0;
}

int cmd_select_prototypes(RunContext& ctx, const std::string& movie_filter) {
  ctx.add_input(ctx.cfg.corpus_path);
  const lumi::Corpus corpus = lumi::ingest(ctx.cfg.corpus_path);
  const lumi::PopularityTable pop = lumi::compute_popularity(corpus);
  const lumi::Segmentation seg = make_segmentation(ctx.cfg, pop);
  const auto embedder = make_embedder(ctx.cfg, &corpus);
  const lumi::EmotionLexicon lexicon = lumi::EmotionLexicon::load(ctx.cfg.lexicon_path);
  const lumi::FeatureIndex index = lumi::FeatureIndex::build(corpus, *embedder, lexicon);
  const auto subsets = lumi::build_subsets(corpus, seg);
  const auto strategy = lumi::prototype_strategy_from_name(ctx.cfg.prototype_strategy);

  json out = json::array();
  for (const auto& [movie, dialogue_indices] : subsets) {
    if (!movie_filter.empty() && movie != movie_filter) continue;
    if (dialogue_indices.empty()) continue;
    lumi::Rng rng = lumi::Rng::derive(ctx.cfg.seed, "prototype:" + movie);
    const lumi::Prototype proto =
        lumi::select_prototype(movie, dialogue_indices, index, strategy, &rng);
    const lumi::SupportSet support =
        lumi::top_k_neighbors(proto, index, ctx.cfg.support_k, ctx.cfg.weights);
    out.push_back(prototype_entry(proto, support));
  }
  if (!movie_filter.empty() && out.empty())
    lumi::fail(lumi::ErrorKind::not_found,
               "movie " + movie_filter + " has no body/tail subset in this corpus");

  if (movie_filter.empty()) {
    ctx.write_artifact("prototypes.json", out.dump(2) + "\n");
    std::cout << "selected " << out.size() << " prototypes\n";
  } else {
    const std::string payload = out[0].dump(2) + "\n";
    ctx.write_artifact("retrieve.json", payload);
    std::cout << payload;
  }
  return 0;
}

int cmd_augment(RunContext& ctx, bool force_mock) {
  ctx.add_input(ctx.cfg.corpus_path);
  const lumi::Corpus corpus = lumi::ingest(ctx.cfg.corpus_path);
  const lumi::PopularityTable pop = lumi::compute_popularity(corpus);
  const lumi::Segmentation seg = make_segmentation(ctx.cfg, pop);
  const auto embedder = make_embedder(ctx.cfg, &corpus);
  const lumi::EmotionLexicon lexicon = lumi::EmotionLexicon::load(ctx.cfg.lexicon_path);

  std::unique_ptr<lumi::ChatClient> client;
  std::vector<std::unique_ptr<lumi::Judge>> judges;
  if (!force_mock && !ctx.cfg.chat_url.empty()) {
    client = lumi::make_http_chat_client(ctx.cfg.chat_url, ctx.cfg.chat_model);
    for (int j = 0; j < ctx.cfg.augment.judge_count; ++j)
      judges.push_back(lumi::make_http_judge("judge" + std::to_string(j + 1),
                                             ctx.cfg.chat_url, ctx.cfg.chat_model));
  } else {
    client = std::make_unique<lumi::MockChatClient>();
    for (int j = 0; j < ctx.cfg.augment.judge_count; ++j)
      judges.push_back(std::make_unique<lumi::MockJudge>("judge" + std::to_string(j + 1)));
  }

  const lumi::AugmentationOutcome outcome =
      lumi::run_augmentation(corpus, seg, ctx.cfg.augment, ctx.cfg.weights, ctx.cfg.support_k,
                             *client, judges, *embedder, lexicon, ctx.cfg.seed);

  ctx.write_artifact("augmented.jsonl", lumi::to_jsonl(outcome.integration.corpus));
  outcome.queue.save(ctx.out / "review_queue.jsonl");
  ctx.manifest.add_artifact(ctx.out / "review_queue.jsonl");
  ctx.write_artifact("candidates.json",
                     lumi::candidates_to_json_string(outcome.candidates) + "\n");

  std::map<std::string, int> by_state;
  for (const lumi::Candidate& c : outcome.candidates)
    by_state[lumi::candidate_state_name(c.state)] += 1;
  json errors = json::array();
  for (const auto& [movie, message] : outcome.movie_errors)
    errors.push_back({{"movie_id", movie}, {"error", message}});
  json report{{"candidates_by_state", by_state},
              {"added_dialogues", outcome.integration.added},
              {"dropped_by_cap", outcome.integration.dropped_by_cap},
              {"skipped_unparseable", outcome.integration.skipped_unparseable},
              {"movie_errors", errors}};
  ctx.write_artifact("augment_report.json", report.dump(2) + "\n");
  std::cout << "augmentation: " << outcome.integration.added << " dialogues added, "
            << outcome.queue.entries().size() << " queued for review, "
            << outcome.movie_errors.size() << " movie errors\n";
  return 0;
}

int cmd_review(RunContext& ctx, const std::string& queue_path, const std::string& approve_id,
               const std::string& reject_id, bool list_only,
               const std::string& candidates_path) {
  ctx.add_input(queue_path);
  lumi::ReviewQueue queue = lumi::ReviewQueue::load(queue_path);
  if (list_only) {
    for (const lumi::ReviewQueueEntry& e : queue.entries()) {
      std::cout << e.candidate_id << " pass_count=" << e.pass_count << " "
                << lumi::review_resolution_name(e.resolution) << "\n";
    }
    return 0;
  }
  const bool approving = !approve_id.empty();
  const std::string& target = approving ? approve_id : reject_id;
  if (target.empty())
    lumi::fail(lumi::ErrorKind::config, "review: pass --approve <id>, --reject <id>, or --list");
  queue.resolve(target, approving ? lumi::ReviewResolution::approved
                                  : lumi::ReviewResolution::rejected);
  queue.save(queue_path);
  ctx.manifest.add_artifact(queue_path);

  // With the candidate store at hand, update the state and rebuild the
  // augmented corpus so approvals become training data immediately.
  if (!candidates_path.empty()) {
    ctx.add_input(candidates_path);
    auto candidates = lumi::candidates_from_json_string(lumi::read_file(candidates_path));
    bool found = false;
    for (lumi::Candidate& c : candidates) {
      if (c.id != target) continue;
      found = true;
      c.state = approving ? lumi::CandidateState::accepted : lumi::CandidateState::discarded;
    }
    if (!found) lumi::fail(lumi::ErrorKind::not_found, "candidate not in store: " + target);
    lumi::atomic_write_file(candidates_path,
                            lumi::candidates_to_json_string(candidates) + "\n");
    ctx.manifest.add_artifact(candidates_path);
    if (!ctx.cfg.corpus_path.empty()) {
      ctx.add_input(ctx.cfg.corpus_path);
      const lumi::Corpus corpus = lumi::ingest(ctx.cfg.corpus_path);
      std::vector<lumi::Candidate> accepted;
      for (const lumi::Candidate& c : candidates) {
        if (c.state == lumi::CandidateState::accepted) accepted.push_back(c);
      }
      const lumi::IntegrationReport integrated =
          lumi::integrate(accepted, corpus, ctx.cfg.augment.rho);
      ctx.write_artifact("augmented.jsonl", lumi::to_jsonl(integrated.corpus));
    }
  }
  std::cout << (approving ? "approved " : "rejected ") << target << "\n";
  return 0;
}

int cmd_train(RunContext& ctx, const std::string& loss_name) {
  const lumi::LossKind kind = lumi::loss_kind_from_name(loss_name);
  lumi::SyntheticSpec spec = ctx.cfg.synthetic;
  spec.seed = ctx.cfg.seed;
  const lumi::SyntheticData data = lumi::gen_synthetic(spec);
  lumi::TrainOptions topt = ctx.cfg.train;
  topt.seed = ctx.cfg.seed;
  const lumi::TrainResult result = lumi::train(data, kind, ctx.cfg.loss, topt);
  ctx.write_artifact("curve_" + loss_name + ".csv", lumi::curve_to_csv(result.curve));
  json doc{{"loss", loss_name},
           {"epochs", result.curve.size()},
           {"final_train_loss", result.curve.empty() ? 0.0 : result.curve.back().train_loss},
           {"final_val_loss", result.curve.empty() ? 0.0 : result.curve.back().val_loss},
           {"train_examples", result.train_indices.size()},
           {"val_examples", result.val_indices.size()}};
  ctx.write_artifact("train_summary.json", doc.dump(2) + "\n");
  std::cout << "trained " << loss_name << ": final train loss "
            << (result.curve.empty() ? 0.0 : result.curve.back().train_loss) << "\n";
  return 0;
}

lumi::RankedList ranked_from_json(const json& doc, std::size_t line_number) {
  if (!doc.is_object() || !doc.contains("query_id") || !doc.contains("ranking") ||
      !doc.contains("relevant"))
    lumi::fail(lumi::ErrorKind::parse, "rankings line " + std::to_string(line_number) +
                                           ": need query_id, ranking, relevant");
  lumi::RankedList list;
  list.query_id = doc["query_id"].get<std::string>();
  for (const json& item : doc["ranking"]) list.ranking.push_back(item.get<std::string>());
  for (const json& item : doc["relevant"]) list.relevant.insert(item.get<std::string>());
  lumi::validate_ranked_list(list);
  return list;
}

int cmd_evaluate(RunContext& ctx, const std::string& rankings_path) {
  if (!fs::exists(rankings_path))
    lumi::fail(lumi::ErrorKind::not_found, "rankings file does not exist: " + rankings_path);
  ctx.add_input(rankings_path);
  ctx.add_input(ctx.cfg.corpus_path);
  const lumi::Corpus corpus = lumi::ingest(ctx.cfg.corpus_path);
  const lumi::PopularityTable pop = lumi::compute_popularity(corpus);
  const lumi::Segmentation seg = make_segmentation(ctx.cfg, pop);

  std::vector<lumi::RankedList> lists;
  std::istringstream in(lumi::read_file(rankings_path));
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (lumi::trim(line).empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      lumi::fail(lumi::ErrorKind::parse,
                 "rankings line " + std::to_string(line_number) + ": " + e.what());
    }
    lists.push_back(ranked_from_json(doc, line_number));
  }
  if (lists.empty()) lumi::fail(lumi::ErrorKind::parse, "rankings file is empty");

  std::map<std::string, double> pop_real;
  for (const auto& [id, n] : pop.pop) pop_real[id] = static_cast<double>(n);
  const auto vectors = lumi::item_comention_vectors(corpus);
  const lumi::MetricReport report =
      lumi::evaluate_rankings(lists, ctx.cfg.k_values, seg.tail,
                              static_cast<std::int64_t>(corpus.catalog.size()), pop_real,
                              vectors);
  ctx.write_artifact("metrics.json", report.to_json_string() + "\n");
  ctx.write_artifact("report.md", report.to_markdown());
  std::cout << report.to_markdown();
  return 0;
}

int cmd_experiment(RunContext& ctx, int seeds_override, const std::string& losses_csv) {
  lumi::ExperimentOptions options;
  options.spec = ctx.cfg.synthetic;
  options.spec.seed = ctx.cfg.seed;
  options.n_seeds = seeds_override > 0 ? seeds_override : ctx.cfg.experiment_seeds;
  options.k_values = ctx.cfg.k_values;
  options.acfl = ctx.cfg.loss;
  options.train = ctx.cfg.train;
  if (!losses_csv.empty()) {
    options.kinds.clear();
    std::istringstream in(losses_csv);
    std::string token;
    while (std::getline(in, token, ','))
      options.kinds.push_back(lumi::loss_kind_from_name(lumi::trim(token)));
  }
  const lumi::ComparisonReport report = lumi::experiment(options);
  ctx.write_artifact("metrics.json", report.to_json_string() + "\n");
  ctx.write_artifact("report.md", report.to_markdown());
  for (const auto& [name, curve] : report.curves)
    ctx.write_artifact("curve_" + name + ".csv", lumi::curve_to_csv(curve));
  std::cout << report.to_markdown();
  return 0;
}

int cmd_report(RunContext& ctx, const std::string& metrics_path) {
  if (!fs::exists(metrics_path))
    lumi::fail(lumi::ErrorKind::not_found, "metrics file does not exist: " + metrics_path);
  ctx.add_input(metrics_path);
  const json doc = json::parse(lumi::read_file(metrics_path));
  std::string markdown;
  if (doc.contains("rows")) {
    lumi::ComparisonReport report;
    for (const json& row : doc["rows"]) {
      lumi::SeedRow r;
      r.kind = lumi::loss_kind_from_name(row.at("loss").get<std::string>());
      r.seed = row.at("seed").get<std::uint64_t>();
      r.metrics = row.at("metrics").get<std::map<std::string, double>>();
      report.rows.push_back(std::move(r));
    }
    if (doc.contains("medians"))
      report.medians =
          doc["medians"].get<std::map<std::string, std::map<std::string, double>>>();
    if (doc.contains("win_counts"))
      report.win_counts = doc["win_counts"].get<std::map<std::string, std::string>>();
    if (doc.contains("k_values")) report.k_values = doc["k_values"].get<std::vector<int>>();
    markdown = report.to_markdown();
  } else {
    lumi::MetricReport report;
    report.values = doc.at("values").get<std::map<std::string, double>>();
    if (doc.contains("absent")) report.absent = doc["absent"].get<std::vector<std::string>>();
    report.k_values = doc.at("k_values").get<std::vector<int>>();
    report.catalog_size = doc.value("catalog_size", 0);
    report.queries = doc.value("queries", 0);
    report.skipped_empty_relevant = doc.value("skipped_empty_relevant", 0);
    report.tail_queries = doc.value("tail_queries", 0);
    markdown = report.to_markdown();
  }
  ctx.write_artifact("report.md", markdown);
  std::cout << markdown;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lumi: long-tail conversational recommendation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global options remain usable after the subcommand name

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus_path;
  app.add_option("--config", config_path, "TOML-style run configuration file");
  app.add_option("--out", out_dir, "output directory (default: out)");
  app.add_option("--seed", seed, "run seed; all module RNG streams derive from it");

  auto* ingest_cmd = app.add_subcommand("ingest", "parse and validate a corpus file");
  auto* segment_cmd = app.add_subcommand("segment", "head/body/tail segmentation");
  auto* stats_cmd = app.add_subcommand("stats", "title/mention share report");
  auto* proto_cmd = app.add_subcommand("select-prototypes",
                                       "prototypes + support sets for body/tail movies");
  auto* retrieve_cmd = app.add_subcommand("retrieve", "prototype + neighbors for one movie");
  auto* augment_cmd = app.add_subcommand("augment", "prototype-guided dialogue augmentation");
  auto* review_cmd = app.add_subcommand("review", "resolve human-review queue entries");
  auto* train_cmd = app.add_subcommand("train", "train on a synthetic corpus");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics for a rankings file");
  auto* experiment_cmd = app.add_subcommand("experiment", "loss comparison over seeds");
  auto* report_cmd = app.add_subcommand("report", "re-render a metrics JSON as Markdown");

  for (CLI::App* cmd : {ingest_cmd, segment_cmd, stats_cmd, proto_cmd, retrieve_cmd,
                        augment_cmd, review_cmd, evaluate_cmd}) {
    cmd->add_option("--corpus", corpus_path, "corpus JSON-lines file");
  }

  std::optional<std::int64_t> tail_max, body_max;
  bool quartile = false;
  for (CLI::App* cmd :
       {segment_cmd, stats_cmd, proto_cmd, retrieve_cmd, augment_cmd, evaluate_cmd}) {
    cmd->add_option("--tail-max", tail_max, "tail threshold (pop <= tail-max)");
    cmd->add_option("--body-max", body_max, "body threshold (pop <= body-max)");
    cmd->add_flag("--quartile", quartile, "tail threshold from the 25th pop percentile");
  }

  std::optional<std::size_t> support_k;
  std::string strategy;
  std::string movie_id;
  proto_cmd->add_option("-K,--top-k", support_k, "support set size");
  proto_cmd->add_option("--strategy", strategy, "medoid | random | centroid_nearest");
  retrieve_cmd->add_option("-K,--top-k", support_k, "support set size");
  retrieve_cmd->add_option("--movie", movie_id, "movie id")->required();

  bool force_mock = false;
  augment_cmd->add_flag("--mock", force_mock, "force the deterministic mock generator/judges");
  std::optional<double> rho_flag;
  augment_cmd->add_option("--rho", rho_flag, "augmentation ratio cap");

  std::string queue_path = "out/review_queue.jsonl";
  std::string approve_id, reject_id, candidates_path;
  bool list_only = false;
  review_cmd->add_option("--queue", queue_path, "review queue file");
  review_cmd->add_option("--approve", approve_id, "approve a pending candidate");
  review_cmd->add_option("--reject", reject_id, "reject a pending candidate");
  review_cmd->add_option("--candidates", candidates_path, "candidate store to update");
  review_cmd->add_flag("--list", list_only, "list queue entries");

  std::string loss_name = "acfl";
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> n_items, n_dialogues;
  std::optional<double> zipf;
  bool resample = false;
  for (CLI::App* cmd : {train_cmd, experiment_cmd}) {
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--items", n_items, "synthetic catalog size");
    cmd->add_option("--dialogues", n_dialogues, "synthetic corpus size");
    cmd->add_option("--zipf", zipf, "synthetic Zipf exponent");
    cmd->add_flag("--resample", resample, "resample training examples by the Eq.-6 weights");
  }
  train_cmd->add_option("--loss", loss_name, "ce | focal | acfl");

  std::string rankings_path;
  evaluate_cmd->add_option("--rankings", rankings_path, "rankings JSON-lines file")->required();

  int experiment_seeds = 0;
  std::string losses_csv;
  experiment_cmd->add_option("--seeds", experiment_seeds, "number of seeds");
  experiment_cmd->add_option("--losses", losses_csv, "comma-separated loss kinds");

  std::string metrics_path;
  report_cmd->add_option("--metrics", metrics_path, "metrics JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;  // usage error
  }

  try {
    lumi::RunConfig cfg = config_path.empty() ? lumi::RunConfig::defaults()
                                              : lumi::RunConfig::from_file(config_path);
    // Flag > config file > built-in default.
    if (out_dir) cfg.out_dir = *out_dir;
    if (seed) cfg.seed = *seed;
    if (corpus_path) cfg.corpus_path = *corpus_path;
    if (tail_max) cfg.tail_max = *tail_max;
    if (body_max) cfg.body_max = *body_max;
    if (quartile) cfg.quartile = true;
    if (support_k) cfg.support_k = *support_k;
    if (!strategy.empty()) cfg.prototype_strategy = strategy;
    if (rho_flag) cfg.augment.rho = *rho_flag;
    if (epochs) cfg.train.epochs = *epochs;
    if (lr) cfg.train.lr = *lr;
    if (n_items) cfg.synthetic.n_items = *n_items;
    if (n_dialogues) cfg.synthetic.n_dialogues = *n_dialogues;
    if (zipf) cfg.synthetic.zipf_exponent = *zipf;
    if (resample) cfg.train.resample = true;
    cfg.validate();

    const std::string subcommand = app.get_subcommands().front()->get_name();
    const bool needs_corpus =
        subcommand == "ingest" || subcommand == "segment" || subcommand == "stats" ||
        subcommand == "select-prototypes" || subcommand == "retrieve" ||
        subcommand == "augment" || subcommand == "evaluate";
    if (needs_corpus && cfg.corpus_path.empty())
      lumi::fail(lumi::ErrorKind::config, subcommand + " requires --corpus (or corpus.train)");
    if (needs_corpus && !fs::exists(cfg.corpus_path))
      lumi::fail(lumi::ErrorKind::not_found, "corpus file does not exist: " + cfg.corpus_path);

    RunContext ctx(std::move(cfg), subcommand);
    int rc = 0;
    if (subcommand == "ingest") rc = cmd_ingest(ctx);
    if (subcommand == "segment") rc = cmd_segment(ctx);
    if (subcommand == "stats") rc = cmd_stats(ctx);
    if (subcommand == "select-prototypes") rc = cmd_select_prototypes(ctx, "");
    if (subcommand == "retrieve") rc = cmd_select_prototypes(ctx, movie_id);
    if (subcommand == "augment") rc = cmd_augment(ctx, force_mock);
    if (subcommand == "review")
      rc = cmd_review(ctx, queue_path, approve_id, reject_id, list_only, candidates_path);
    if (subcommand == "train") rc = cmd_train(ctx, loss_name);
    if (subcommand == "evaluate") rc = cmd_evaluate(ctx, rankings_path);
    if (subcommand == "experiment") rc = cmd_experiment(ctx, experiment_seeds, losses_csv);
    if (subcommand == "report") rc = cmd_report(ctx, metrics_path);
    ctx.finish();
    return rc;
  } catch (const lumi::Error& e) {
    json err{{"error", {{"kind", e.kind_name()}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err{{"error", {{"kind", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
