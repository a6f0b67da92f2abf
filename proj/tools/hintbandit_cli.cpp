// hintbandit: serve sessions, run simulants, replay and analyze corpora.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hintbandit/analysis.hpp"
#include "hintbandit/errors.hpp"
#include "hintbandit/llm_client.hpp"
#include "hintbandit/record_io.hpp"
#include "hintbandit/service.hpp"
#include "hintbandit/simulant.hpp"

namespace hb = hintbandit;

namespace {

constexpr int kExitSchema = 2;

struct StoreOptions {
  std::string embeddings;
  std::string frequencies;
  std::uint64_t world_seed = 1;
};

void add_store_options(CLI::App* app, StoreOptions& o) {
  app->add_option("--embeddings", o.embeddings, "Vector file (word2vec text)")
      ->check(CLI::ExistingFile);
  app->add_option("--frequencies", o.frequencies, "Word frequency TSV")->check(CLI::ExistingFile);
  app->add_option("--world-seed", o.world_seed,
                  "Seed of the synthetic world used when no vector file is given");
}

// A real store when both files are given, else the synthetic world over the
// sorted concept list (so simulate and replay rebuild the same world).
hb::WordStore open_store(const StoreOptions& o, std::vector<std::string> concepts) {
  if (!o.embeddings.empty() || !o.frequencies.empty()) {
    if (o.embeddings.empty() || o.frequencies.empty()) {
      throw hb::Error("--embeddings and --frequencies go together");
    }
    return hb::WordStore::load(o.embeddings, o.frequencies);
  }
  std::sort(concepts.begin(), concepts.end());
  concepts.erase(std::unique(concepts.begin(), concepts.end()), concepts.end());
  return hb::make_synthetic_world(o.world_seed, concepts);
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw hb::IoError("cannot write " + path);
  return file;
}

// -- serve --------------------------------------------------------------------

struct ServeOptions {
  std::string config;
  std::optional<int> port;
  std::string host;
};

int run_serve(const ServeOptions& o) {
  hb::ServiceConfig config;
  if (!o.config.empty()) config = hb::load_service_config(o.config);
  hb::apply_env_overrides(config);
  if (o.port) config.port = *o.port;
  if (!o.host.empty()) config.host = o.host;
  hb::run_service(config, [&](int port) {
    std::cerr << "listening on " << config.host << ":" << port << std::endl;
  });
  return 0;
}

// -- analyze ------------------------------------------------------------------

struct AnalyzeOptions {
  std::string corpus;
  std::string embeddings;
  std::string metric;
  std::string concept_word;
  std::string out;
  bool filter_outliers = false;
  double outlier_k = 3.5;
  int window_lo = -5;
  int window_hi = 10;
  bool include_practice = false;
  bool include_incomplete = false;
};

int run_analyze(const AnalyzeOptions& o) {
  const auto all = hb::read_corpus(o.corpus);
  auto records = hb::analysis_records(all, o.include_practice, o.include_incomplete);
  if (o.filter_outliers) records = hb::filter_outliers(records, o.outlier_k);
  if (!o.concept_word.empty() && o.metric != "curve") {
    const auto concept_word = hb::fold_case(o.concept_word);
    std::erase_if(records, [&](const hb::SessionRecord& r) {
      return r.config.concept_word != concept_word;
    });
  }

  std::ofstream file;
  std::ostream& out = open_out(o.out, file);
  if (o.metric == "counts") {
    hb::export_csv(records, out);
  } else if (o.metric == "features" || o.metric == "types" || o.metric == "density") {
    hb::write_metric_csv(records, o.metric, out);
  } else if (o.metric == "curve") {
    if (o.embeddings.empty() || o.concept_word.empty()) {
      throw hb::Error("--metric curve needs --embeddings and --concept");
    }
    const auto space = hb::load_embeddings(o.embeddings);
    hb::CurveOptions options;
    options.window_lo = o.window_lo;
    options.window_hi = o.window_hi;
    options.include_practice = o.include_practice;
    hb::write_curve_csv(hb::relatedness_curve(records, hb::fold_case(o.concept_word), space,
                                              options),
                        out);
  } else if (o.metric == "arms") {
    hb::write_arms_csv(hb::arm_preference_summary(records, o.include_practice), out);
  } else if (o.metric == "corr") {
    std::vector<std::pair<std::string, hb::Correlation>> rows;
    for (const auto& arm : hb::default_arms()) {
      rows.emplace_back(arm.name, hb::weight_performance_correlation(records, arm.name));
    }
    hb::write_correlation_csv(rows, out);
  } else {
    throw hb::Error("unknown metric " + o.metric);
  }
  out.flush();
  if (!out) throw hb::IoError("write failed");
  std::cerr << records.size() << " records analysed" << std::endl;
  return 0;
}

// -- simulate -----------------------------------------------------------------

struct SimulateOptions {
  std::string mode = "mock";
  std::vector<std::string> concepts;
  std::string condition = "both";
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t parallelism = 1;
  std::string llm_config;
  std::size_t max_turns = 0;
  std::int64_t duration_s = 1200;
  bool keep_incomplete = false;
  std::size_t knowledge_items = 40;
  std::size_t knowledge_pool = 400;
  StoreOptions store;
};

int run_simulate(const SimulateOptions& o) {
  std::vector<std::string> concepts;
  for (const auto& c : o.concepts) concepts.push_back(hb::fold_case(c));
  const auto store = open_store(o.store, concepts);
  const bool synthetic = o.store.embeddings.empty();

  std::vector<hb::Cell> cells;
  for (const auto& c : concepts) {
    if (!store.space.contains(c)) throw hb::UnknownWord(c);
    if (o.condition == "both" || o.condition == "hinted") {
      cells.push_back({c, hb::Condition::kHinted});
    }
    if (o.condition == "both" || o.condition == "unhinted") {
      cells.push_back({c, hb::Condition::kUnhinted});
    }
  }

  std::function<hb::SessionRecord(const hb::SessionConfig&)> run_one;
  std::unique_ptr<hb::HttpChatClient> client;
  hb::LlmRunOptions llm_options;
  if (o.mode == "mock") {
    run_one = [&](hb::SessionConfig c) {
      c.duration_s = o.duration_s;
      const auto profile_seed = hb::derive_seed(c.seed, 3);
      const auto profile = synthetic
                               ? hb::clustered_profile(store, c.concept_word, profile_seed)
                               : hb::neighbourhood_profile(store, c.concept_word, profile_seed,
                                                           o.knowledge_items, o.knowledge_pool);
      return hb::run_mock_session(profile, c, store);
    };
  } else {
    if (synthetic) throw hb::Error("--mode llm needs --embeddings and --frequencies");
    hb::LlmConfig llm;
    if (!o.llm_config.empty()) llm = hb::load_llm_config(o.llm_config);
    if (o.max_turns) llm.max_turns = o.max_turns;
    llm_options.max_turns = llm.max_turns;
    client = std::make_unique<hb::HttpChatClient>(llm);
    run_one = [&](hb::SessionConfig c) {
      c.duration_s = o.duration_s;
      // One client per session: its per-turn reply cache must not be shared.
      hb::HttpChatClient session_client(client->config());
      return hb::run_llm_session(session_client, c, store, llm_options);
    };
  }

  auto records = hb::run_batch(cells, o.n, o.seed, o.mode, o.parallelism, run_one);
  const auto total = records.size();
  if (!o.keep_incomplete) std::erase_if(records, [](const auto& r) { return !r.complete; });
  hb::write_corpus(o.out, records);
  std::cerr << records.size() << " records written";
  if (records.size() != total) std::cerr << " (" << total - records.size() << " aborted dropped)";
  std::cerr << std::endl;
  for (const auto& cell : cells) {
    std::vector<double> counts;
    for (const auto& r : records) {
      if (r.config.concept_word == cell.concept_word && r.config.condition == cell.condition) {
        counts.push_back(double(hb::feature_count(r)));
      }
    }
    if (counts.empty()) continue;
    std::cerr << cell.concept_word << " " << hb::to_string(cell.condition)
              << ": median features " << hb::describe(counts).median << std::endl;
  }
  return 0;
}

// -- replay -------------------------------------------------------------------

struct ReplayOptions {
  std::string corpus;
  StoreOptions store;
};

int run_replay(const ReplayOptions& o) {
  const auto records = hb::read_corpus(o.corpus);
  std::vector<std::string> concepts;
  for (const auto& r : records) concepts.push_back(r.config.concept_word);
  const auto store = open_store(o.store, concepts);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (hb::dump_record(hb::replay(records[i], store)) != hb::dump_record(records[i])) {
      std::cerr << "record " << i + 1 << " (" << records[i].config.participant_id
                << ") does not replay" << std::endl;
      ++mismatches;
    }
  }
  std::cout << records.size() - mismatches << "/" << records.size() << " records replay exactly"
            << std::endl;
  return mismatches == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive hinting for feature listing: service, simulants and analysis"};
  app.require_subcommand(1);

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  serve_cmd->add_option("--config", serve.config, "Service config (JSON)")
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", serve.port, "Override the configured port");
  serve_cmd->add_option("--host", serve.host, "Override the bind address");

  AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Compute metrics from a corpus as CSV");
  analyze_cmd->add_option("corpus", analyze.corpus, "Corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--embeddings", analyze.embeddings, "Vector file for the curve")
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--metric", analyze.metric, "Metric")
      ->required()
      ->check(CLI::IsMember({"counts", "features", "types", "density", "curve", "arms", "corr"}));
  analyze_cmd->add_option("--concept", analyze.concept_word, "Restrict to one concept");
  analyze_cmd->add_option("--out", analyze.out, "Output CSV (default stdout)");
  analyze_cmd->add_flag("--filter-outliers", analyze.filter_outliers,
                        "Drop sessions above mean + k sd features");
  analyze_cmd->add_option("--outlier-k", analyze.outlier_k, "k for --filter-outliers");
  analyze_cmd->add_option("--window-lo", analyze.window_lo, "First curve offset");
  analyze_cmd->add_option("--window-hi", analyze.window_hi, "Last curve offset");
  analyze_cmd->add_flag("--include-practice", analyze.include_practice, "Keep practice sessions");
  analyze_cmd->add_flag("--include-incomplete", analyze.include_incomplete,
                        "Keep aborted simulant runs");

  SimulateOptions simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run simulated participants");
  simulate_cmd->add_option("--mode", simulate.mode, "Participant kind")
      ->check(CLI::IsMember({"mock", "llm"}));
  simulate_cmd->add_option("--concept", simulate.concepts, "Concept word (repeatable)")
      ->required();
  simulate_cmd->add_option("--condition", simulate.condition, "Condition")
      ->check(CLI::IsMember({"hinted", "unhinted", "both"}));
  simulate_cmd->add_option("-n", simulate.n, "Sessions per cell")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", simulate.seed, "Base seed");
  simulate_cmd->add_option("--out", simulate.out, "Output corpus JSONL")->required();
  simulate_cmd->add_option("--parallelism", simulate.parallelism, "Concurrent sessions")
      ->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--llm-config", simulate.llm_config, "LLM client config (JSON)")
      ->check(CLI::ExistingFile);
  simulate_cmd->add_option("--max-turns", simulate.max_turns, "Override the LLM turn cap");
  simulate_cmd->add_option("--duration", simulate.duration_s, "Session duration in seconds");
  simulate_cmd->add_flag("--keep-incomplete", simulate.keep_incomplete,
                         "Also write aborted runs");
  simulate_cmd->add_option("--knowledge-items", simulate.knowledge_items,
                           "Mock knowledge size on a real vocabulary");
  simulate_cmd->add_option("--knowledge-pool", simulate.knowledge_pool,
                           "Nearest words the mock knowledge is drawn from");
  add_store_options(simulate_cmd, simulate.store);

  ReplayOptions replay;
  auto* replay_cmd = app.add_subcommand("replay", "Check that records replay byte-for-byte");
  replay_cmd->add_option("corpus", replay.corpus, "Corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  add_store_options(replay_cmd, replay.store);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return run_serve(serve);
    if (*analyze_cmd) return run_analyze(analyze);
    if (*simulate_cmd) return run_simulate(simulate);
    if (*replay_cmd) return run_replay(replay);
  } catch (const hb::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << std::endl;
    return kExitSchema;
  } catch (const hb::ParseError& e) {
    std::cerr << "schema error: " << e.what() << std::endl;
    return kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
