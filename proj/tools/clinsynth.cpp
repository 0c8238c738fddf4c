// clinsynth: rephrase clinical-style notes through OpenAI-compatible LLM
// endpoints, manage token-budgeted corpus mixtures with full provenance
// manifests, and evaluate corpora with an interpolated Kneser-Ney n-gram
// model.
//
// Subcommands: ingest, synthesize, mix, eval, matrix, export-config.
// Exit codes: 0 success, 1 runtime/data error, 2 configuration error.

#include <ctime>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clinsynth/chunking.hpp"
#include "clinsynth/corpus.hpp"
#include "clinsynth/gateway.hpp"
#include "clinsynth/manifest.hpp"
#include "clinsynth/matrix.hpp"
#include "clinsynth/ngram.hpp"
#include "clinsynth/notes.hpp"
#include "clinsynth/prompts.hpp"
#include "clinsynth/synthesis.hpp"
#include "clinsynth/trainer_config.hpp"
#include "clinsynth/version.hpp"

using namespace clinsynth;

namespace {

std::string now_utc() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Optional config file mirroring RunConfig. Precedence everywhere:
// explicit CLI flag > config file > built-in default.
struct FileConfig {
  std::vector<ModelEndpoint> endpoints;
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_new_tokens;
  std::optional<std::uint64_t> decoding_seed;
  std::optional<std::uint64_t> chunk_budget;
  std::optional<std::uint64_t> corpus_budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_dir;
};

FileConfig load_file_config(const std::string& path) {
  FileConfig cfg;
  if (path.empty()) return cfg;
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("config file " + path + " is not a JSON object");
  }
  try {
    if (j.contains("endpoints")) {
      for (const auto& e : j.at("endpoints")) {
        ModelEndpoint ep;
        ep.model_id = e.at("model_id").get<std::string>();
        ep.base_url = e.at("base_url").get<std::string>();
        ep.api_key_env = e.value("api_key_env", "");
        ep.max_in_flight = e.value("max_in_flight", ep.max_in_flight);
        ep.timeout_s = e.value("timeout_s", ep.timeout_s);
        if (e.contains("retry")) {
          ep.retry.max_attempts =
              e.at("retry").value("max_attempts", ep.retry.max_attempts);
          ep.retry.base_backoff_ms =
              e.at("retry").value("base_backoff_ms", ep.retry.base_backoff_ms);
        }
        cfg.endpoints.push_back(std::move(ep));
      }
    }
    if (j.contains("decoding")) {
      const auto& d = j.at("decoding");
      if (d.contains("temperature"))
        cfg.temperature = d.at("temperature").get<double>();
      if (d.contains("top_p")) cfg.top_p = d.at("top_p").get<double>();
      if (d.contains("max_new_tokens"))
        cfg.max_new_tokens = d.at("max_new_tokens").get<int>();
      if (d.contains("seed"))
        cfg.decoding_seed = d.at("seed").get<std::uint64_t>();
    }
    if (j.contains("budgets")) {
      const auto& b = j.at("budgets");
      if (b.contains("chunk_budget"))
        cfg.chunk_budget = b.at("chunk_budget").get<std::uint64_t>();
      if (b.contains("corpus_budget"))
        cfg.corpus_budget = b.at("corpus_budget").get<std::uint64_t>();
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("paths") && j.at("paths").contains("run_dir")) {
      cfg.run_dir = j.at("paths").at("run_dir").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return cfg;
}

struct Common {
  std::string run_dir;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string created_utc;
  bool dry_run = false;

  FileConfig file;

  void finalize() {
    file = load_file_config(config_path);
    if (run_dir.empty()) run_dir = file.run_dir.value_or("run");
    if (!seed && file.seed) seed = file.seed;
    if (created_utc.empty()) created_utc = now_utc();
  }

  fs::path chunks_dir() const { return fs::path(run_dir) / "chunks"; }
  fs::path corpora_dir() const { return fs::path(run_dir) / "corpora"; }
  fs::path manifests_dir() const { return fs::path(run_dir) / "manifests"; }
  fs::path reports_dir() const { return fs::path(run_dir) / "reports"; }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--run-dir,--out", c.run_dir,
                  "Run directory (chunks/, corpora/, manifests/, reports/)");
  cmd->add_option("--config", c.config_path,
                  "JSON config file (flags take precedence)");
  cmd->add_option("--seed", c.seed, "Seed recorded in the manifest");
  cmd->add_option("--created-utc", c.created_utc,
                  "Override the manifest timestamp (for reproducible runs)");
  cmd->add_flag("--dry-run", c.dry_run,
                "Validate inputs and print the plan; write nothing, no "
                "network calls");
}

// Report-producing commands record their run in a small manifest of their
// own, kept apart from corpus manifests by the .report.json suffix.
void write_report_manifest(const Common& c, const std::string& report_id,
                           const std::string& kind,
                           const nlohmann::json& inputs,
                           const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["report_id"] = report_id;
  j["kind"] = kind;
  j["created_utc"] = c.created_utc;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  if (c.seed) j["seed"] = *c.seed;
  j["tool_version"] = kToolVersion;
  const fs::path path = c.manifests_dir() / (report_id + ".report.json");
  atomic_write_file(path, j.dump(2) + "\n");
  std::cout << "manifest: " << path.string() << "\n";
}

// --- ingest ----------------------------------------------------------------

struct IngestArgs {
  Common common;
  std::string input;
  std::string format = "jsonl";
  std::string note_type;
  std::optional<int> min_year;
  std::optional<int> max_year;
  std::optional<std::uint64_t> chunk_budget;
  std::string id;
};

int run_ingest(IngestArgs& a) {
  a.common.finalize();
  const NoteFormat format = note_format_from_string(a.format);
  NoteFilter filter;
  if (!a.note_type.empty()) {
    const auto t = note_type_from_string(a.note_type);
    if (!t) {
      throw ConfigError(
          "unknown note type '" + a.note_type +
          "' (expected discharge_summary, radiology_report or other)");
    }
    filter.note_type = *t;
  }
  filter.min_year = a.min_year;
  filter.max_year = a.max_year;
  const std::uint64_t chunk_budget =
      a.chunk_budget.has_value()
          ? *a.chunk_budget
          : a.common.file.chunk_budget.value_or(kDefaultChunkBudget);
  if (chunk_budget < 1) throw ConfigError("chunk budget must be >= 1");
  if (a.id.empty()) a.id = fs::path(a.input).stem().string();

  const auto loaded = load_notes(a.input, format, filter, a.id);
  for (const auto& w : loaded.summary.warnings) {
    std::cerr << "warning: " << w << "\n";
  }

  std::vector<Chunk> chunks;
  std::uint64_t total_tokens = 0;
  for (const auto& note : loaded.notes) {
    for (auto& chunk : chunk_note(note, chunk_budget)) {
      total_tokens += chunk.ref_token_count;
      chunks.push_back(std::move(chunk));
    }
  }

  std::cout << "notes: total=" << loaded.summary.total
            << " kept=" << loaded.summary.kept
            << " skipped=" << loaded.summary.skipped
            << " malformed=" << loaded.summary.malformed << "\n";
  std::cout << "chunks: " << chunks.size() << " (" << total_tokens
            << " ref tokens, budget " << chunk_budget << ")\n";

  if (a.common.dry_run) {
    std::cout << "dry run: would write "
              << (a.common.chunks_dir() / (a.id + ".jsonl")).string() << "\n";
    return 0;
  }

  atomic_write_file(a.common.chunks_dir() / (a.id + ".jsonl"),
                    chunks_to_jsonl(chunks));

  CorpusManifest m;
  m.corpus_id = a.id;
  m.created_utc = a.common.created_utc;
  IngestedRecipe recipe;
  recipe.source_path = a.input;
  recipe.format = a.format;
  if (filter.note_type) recipe.filter.note_type = to_string(*filter.note_type);
  recipe.filter.min_year = filter.min_year;
  recipe.filter.max_year = filter.max_year;
  recipe.chunk_budget = chunk_budget;
  m.recipe = recipe;
  m.token_totals.record_count = chunks.size();
  m.token_totals.total_ref_tokens = total_tokens;
  m.seed = a.common.seed;
  const fs::path mpath = manifest_path(a.common.manifests_dir(), a.id);
  write_manifest(m, mpath);
  std::cout << "manifest: " << mpath.string() << "\n";
  return 0;
}

// --- synthesize --------------------------------------------------------------

struct SynthesizeArgs {
  Common common;
  std::string chunks_ref;
  std::string prompt_id;
  std::string prompt_file;
  std::string model;
  std::string base_url;
  std::string api_key_env;
  std::optional<std::uint64_t> budget_tokens;
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_new_tokens;
  std::optional<std::uint64_t> decoding_seed;
  std::optional<int> max_in_flight;
  std::optional<int> timeout_s;
  std::optional<int> max_attempts;
  std::optional<int> base_backoff_ms;
  int dispatch_window = 1;
  std::string capture_path;
  std::string id;
};

int run_synthesize(SynthesizeArgs& a) {
  a.common.finalize();

  PromptRegistry registry;
  if (!a.prompt_file.empty()) {
    const auto j =
        nlohmann::json::parse(read_file(a.prompt_file), nullptr, false);
    if (j.is_discarded()) {
      throw ConfigError("prompt file " + a.prompt_file + " is not valid JSON");
    }
    registry.register_custom(prompt_from_json(j));
  }
  const PromptTemplate& prompt = registry.get(a.prompt_id);

  // Endpoint: start from the config file entry for this model, then let
  // flags override.
  ModelEndpoint ep;
  ep.model_id = a.model;
  for (const auto& e : a.common.file.endpoints) {
    if (e.model_id == a.model) {
      ep = e;
      break;
    }
  }
  if (!a.base_url.empty()) ep.base_url = a.base_url;
  if (!a.api_key_env.empty()) ep.api_key_env = a.api_key_env;
  if (a.max_in_flight) ep.max_in_flight = *a.max_in_flight;
  if (a.timeout_s) ep.timeout_s = *a.timeout_s;
  if (a.max_attempts) ep.retry.max_attempts = *a.max_attempts;
  if (a.base_backoff_ms) ep.retry.base_backoff_ms = *a.base_backoff_ms;
  if (ep.base_url.empty()) {
    throw ConfigError("no --base-url given and model '" + a.model +
                      "' is not in the config file's endpoints");
  }

  DecodingParams decoding;
  decoding.temperature =
      a.temperature.value_or(a.common.file.temperature.value_or(0.7));
  decoding.top_p = a.top_p.value_or(a.common.file.top_p.value_or(0.95));
  decoding.max_new_tokens =
      a.max_new_tokens.value_or(a.common.file.max_new_tokens.value_or(1024));
  decoding.seed =
      a.decoding_seed ? a.decoding_seed : a.common.file.decoding_seed;

  const std::uint64_t budget = a.budget_tokens.has_value()
                                   ? *a.budget_tokens
                                   : a.common.file.corpus_budget.value_or(0);
  if (budget < 1) {
    throw ConfigError(
        "--budget-tokens is required (or budgets.corpus_budget in the "
        "config file)");
  }

  const bool chunks_is_path = a.chunks_ref.find('/') != std::string::npos ||
                              a.chunks_ref.ends_with(".jsonl");
  const fs::path chunks_path =
      chunks_is_path ? fs::path(a.chunks_ref)
                     : a.common.chunks_dir() / (a.chunks_ref + ".jsonl");
  const std::string chunks_corpus_id =
      chunks_is_path ? chunks_path.stem().string() : a.chunks_ref;
  const auto chunks = load_chunks_jsonl(chunks_path);
  if (chunks.empty()) {
    throw DataError("chunk corpus " + chunks_path.string() + " is empty");
  }
  if (a.id.empty()) a.id = "syn-" + a.prompt_id + "-" + a.model;

  std::cout << "plan: " << chunks.size() << " chunks from "
            << chunks_corpus_id << " -> prompt " << a.prompt_id << " @ "
            << ep.model_id << " (" << ep.base_url << "), budget " << budget
            << " ref tokens, window " << a.dispatch_window << "\n";
  if (a.common.dry_run) {
    std::cout << "dry run: would write "
              << (a.common.corpora_dir() / (a.id + ".jsonl")).string()
              << "\n";
    return 0;
  }

  std::optional<TranscriptWriter> capture;
  if (!a.capture_path.empty()) {
    fs::path cp(a.capture_path);
    if (cp.has_parent_path()) fs::create_directories(cp.parent_path());
    capture.emplace(cp);
  }
  Gateway gateway(ep, capture ? &*capture : nullptr,
                  a.common.seed.value_or(0));

  SynthesisOptions opt;
  opt.corpus_id = a.id;
  opt.chunks_corpus_id = chunks_corpus_id;
  opt.budget_tokens = budget;
  opt.decoding = decoding;
  opt.dispatch_window = a.dispatch_window;
  opt.created_utc = a.common.created_utc;
  opt.seed = a.common.seed;

  const SynthesisResult res = rephrase_corpus(chunks, prompt, gateway, opt);

  atomic_write_file(a.common.corpora_dir() / (a.id + ".jsonl"),
                    generation_records_to_jsonl(res.records));
  const fs::path mpath = manifest_path(a.common.manifests_dir(), a.id);
  write_manifest(res.manifest, mpath);

  std::cout << "records: " << res.records.size()
            << " accepted=" << res.accepted_records
            << " accepted_ref_tokens=" << res.accepted_ref_tokens
            << (res.budget_unmet ? " (budget unmet)" : "") << "\n";
  std::cout << "manifest: " << mpath.string() << "\n";
  return 0;
}

// --- mix ---------------------------------------------------------------------

struct MixArgs {
  Common common;
  std::vector<std::string> parents;  // "corpus@budget"
  std::string mode = "concat";
  std::string id;
};

int run_mix(MixArgs& a) {
  a.common.finalize();
  const MixMode mode = mix_mode_from_string(a.mode);

  std::vector<std::pair<std::string, std::uint64_t>> parent_specs;
  for (const auto& spec : a.parents) {
    const auto at = spec.rfind('@');
    if (at == std::string::npos || at == 0 || at + 1 >= spec.size()) {
      throw ConfigError("parent spec '" + spec +
                        "' must look like <corpus>@<budget-tokens>");
    }
    std::uint64_t budget = 0;
    try {
      budget = std::stoull(spec.substr(at + 1));
    } catch (...) {
      throw ConfigError("bad budget in parent spec '" + spec + "'");
    }
    if (budget < 1) throw ConfigError("parent budget must be >= 1");
    parent_specs.push_back({spec.substr(0, at), budget});
  }

  CorpusResolver resolver(a.common.run_dir);
  std::vector<Corpus> loaded;
  loaded.reserve(parent_specs.size());
  for (const auto& [ref, budget] : parent_specs) {
    if (!resolver.resolvable(ref)) {
      throw DataError("mix parent '" + ref + "' cannot be resolved");
    }
    loaded.push_back(resolver.load(ref));
  }

  if (a.common.dry_run) {
    std::cout << "dry run: would mix " << parent_specs.size()
              << " parents with mode " << a.mode << " into "
              << (a.common.corpora_dir() / (a.id + ".jsonl")).string()
              << "\n";
    return 0;
  }

  std::vector<MixParent> mp;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    mp.push_back({&loaded[i], parent_specs[i].second});
  }
  const Corpus mixed = mix(mp, mode, a.common.seed.value_or(0), a.id);
  save_corpus_jsonl(mixed, a.common.corpora_dir() / (a.id + ".jsonl"));

  CorpusManifest m;
  m.corpus_id = a.id;
  m.created_utc = a.common.created_utc;
  MixedRecipe recipe;
  recipe.mode = a.mode;
  for (std::size_t i = 0; i < parent_specs.size(); ++i) {
    recipe.parents.push_back({loaded[i].corpus_id, parent_specs[i].second});
  }
  m.recipe = recipe;
  m.token_totals.record_count = mixed.records.size();
  m.token_totals.total_ref_tokens = mixed.total_ref_tokens;
  m.seed = a.common.seed;
  const fs::path mpath = manifest_path(a.common.manifests_dir(), a.id);
  write_manifest(m, mpath);

  std::cout << "mixed: " << mixed.records.size() << " records, "
            << mixed.total_ref_tokens << " ref tokens\n";
  std::cout << "manifest: " << mpath.string() << "\n";
  return 0;
}

// --- eval / matrix -------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::string baseline;
  int order = 3;
  double discount = 0.75;
  int min_count = 2;
  std::string report_id;
};

int run_eval_or_matrix(EvalArgs& a, bool full_matrix) {
  a.common.finalize();
  NgramConfig cfg{a.order, a.discount, a.min_count};
  CorpusResolver resolver(a.common.run_dir);

  std::vector<std::string> trains = a.train;
  if (!a.baseline.empty() &&
      std::find(trains.begin(), trains.end(), a.baseline) == trains.end()) {
    trains.push_back(a.baseline);
  }

  if (a.common.dry_run) {
    for (const auto& ref : trains) {
      std::cout << "train: " << ref
                << (resolver.resolvable(ref) ? "" : " (UNRESOLVED)") << "\n";
    }
    for (const auto& ref : a.test) {
      std::cout << "test: " << ref
                << (resolver.resolvable(ref) ? "" : " (UNRESOLVED)") << "\n";
    }
    std::cout << "dry run: would evaluate " << trains.size() << " x "
              << a.test.size() << " cells (order " << cfg.order
              << ", discount " << cfg.discount << ", min_count "
              << cfg.min_count << ")\n";
    return 0;
  }

  const PerplexityReport report = run_matrix(trains, a.test, cfg, resolver);
  for (const auto& r : report.rows) {
    std::cout << r.train_corpus_id << " x " << r.test_set_id
              << ": ppl=" << detail::format_fixed(r.perplexity, 4)
              << " tokens=" << r.token_count
              << " oov_rate=" << detail::format_fixed(r.oov_rate, 4) << "\n";
  }

  if (a.report_id.empty()) a.report_id = full_matrix ? "matrix" : "eval";
  std::vector<std::string> outputs;
  auto emit = [&](const std::string& name, const std::string& content) {
    const fs::path p = a.common.reports_dir() / name;
    atomic_write_file(p, content);
    outputs.push_back(p.string());
    std::cout << "wrote " << p.string() << "\n";
  };

  emit(a.report_id + ".csv", report_to_csv(report));
  if (full_matrix) {
    emit("fig1.csv", fig1_csv(report));
    if (!a.baseline.empty()) {
      emit("fig2.csv", fig2_csv(report, a.baseline, a.common.manifests_dir()));
    }
    emit("fig3.csv", fig3_csv(report, a.common.manifests_dir()));
  }

  nlohmann::json inputs;
  inputs["train"] = trains;
  inputs["test"] = a.test;
  if (!a.baseline.empty()) inputs["baseline"] = a.baseline;
  inputs["ngram"] = {{"order", cfg.order},
                     {"discount", cfg.discount},
                     {"min_count", cfg.min_count}};
  write_report_manifest(a.common, a.report_id, full_matrix ? "matrix" : "eval",
                        inputs, outputs);
  return 0;
}

// --- export-config ---------------------------------------------------------------

struct ExportArgs {
  Common common;
  std::string kind = "causal";
  std::string manifest_ref;
  std::string out_path;
};

int run_export_config(ExportArgs& a) {
  a.common.finalize();
  const TrainerKind kind = trainer_kind_from_string(a.kind);

  std::string manifest_ref = a.manifest_ref;
  if (!manifest_ref.empty() && manifest_ref.find('/') == std::string::npos &&
      !manifest_ref.ends_with(".json")) {
    const fs::path p = manifest_path(a.common.manifests_dir(), manifest_ref);
    if (!fs::exists(p)) {
      throw DataError("corpus '" + manifest_ref + "' has no manifest at " +
                      p.string());
    }
    manifest_ref = p.string();
  }

  if (a.out_path.empty()) {
    a.out_path =
        (a.common.reports_dir() / ("trainer_" + a.kind + ".json")).string();
  }
  if (a.common.dry_run) {
    std::cout << "dry run: would write " << a.out_path << "\n";
    return 0;
  }
  export_trainer_config(kind, manifest_ref, a.out_path);
  std::cout << "wrote " << a.out_path << "\n";

  nlohmann::json inputs;
  inputs["kind"] = a.kind;
  inputs["corpus_manifest"] = manifest_ref;
  write_report_manifest(a.common, "trainer_" + a.kind, "export_config",
                        inputs, {a.out_path});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clinical corpus synthesis and evaluation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand(
      "ingest", "Load notes, filter, split into sentences, chunk");
  ingest->add_option("--input", ingest_args.input, "Note file")->required();
  ingest->add_option("--format", ingest_args.format, "jsonl or csv")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  ingest->add_option("--note-type", ingest_args.note_type,
                     "Keep only notes of this type")
      ->check(CLI::IsMember({"discharge_summary", "radiology_report",
                             "other"}));
  ingest->add_option("--filter-year-min", ingest_args.min_year,
                     "Keep notes written during or after this year");
  ingest->add_option("--filter-year-max", ingest_args.max_year,
                     "Keep notes written during or before this year");
  ingest->add_option("--chunk-budget", ingest_args.chunk_budget,
                     "Reference-token budget per chunk (default 300)");
  ingest->add_option("--id", ingest_args.id,
                     "Corpus id (default: input file stem)");
  add_common(ingest, ingest_args.common);

  SynthesizeArgs syn_args;
  auto* synthesize = app.add_subcommand(
      "synthesize", "Rephrase a chunk corpus through an LLM endpoint");
  synthesize->add_option("--chunks", syn_args.chunks_ref,
                         "Chunk corpus id or path")
      ->required();
  synthesize->add_option("--prompt", syn_args.prompt_id,
                         "Prompt id (P1, P2, P3, or a custom id)")
      ->required();
  synthesize->add_option("--prompt-file", syn_args.prompt_file,
                         "JSON file registering a custom prompt template");
  synthesize->add_option("--model", syn_args.model, "Model id")->required();
  synthesize->add_option("--base-url", syn_args.base_url,
                         "Endpoint base URL, e.g. http://host:8000/v1");
  synthesize->add_option("--api-key-env", syn_args.api_key_env,
                         "Env var holding the bearer token");
  synthesize->add_option("--budget-tokens", syn_args.budget_tokens,
                         "Accepted clean-token budget for the corpus");
  synthesize->add_option("--temperature", syn_args.temperature,
                         "Sampling temperature (default 0.7)");
  synthesize->add_option("--top-p", syn_args.top_p,
                         "Nucleus sampling mass (default 0.95)");
  synthesize->add_option("--max-new-tokens", syn_args.max_new_tokens,
                         "Completion length cap (default 1024)");
  synthesize->add_option("--decoding-seed", syn_args.decoding_seed,
                         "Seed forwarded to the endpoint");
  synthesize->add_option("--max-in-flight", syn_args.max_in_flight,
                         "Concurrent request cap (default 8)");
  synthesize->add_option("--timeout-s", syn_args.timeout_s,
                         "Per-request timeout (default 120)");
  synthesize->add_option("--max-attempts", syn_args.max_attempts,
                         "Retry budget per request (default 5)");
  synthesize->add_option("--base-backoff-ms", syn_args.base_backoff_ms,
                         "Backoff base before jitter (default 500)");
  synthesize->add_option("--dispatch-window", syn_args.dispatch_window,
                         "Requests outstanding beyond the committed prefix");
  synthesize->add_option("--capture", syn_args.capture_path,
                         "Append request/response pairs to this JSONL file");
  synthesize->add_option("--id", syn_args.id,
                         "Corpus id (default syn-<prompt>-<model>)");
  add_common(synthesize, syn_args.common);

  MixArgs mix_args;
  auto* mixcmd = app.add_subcommand(
      "mix", "Mix budget-truncated corpora (concat or interleave)");
  mixcmd->add_option("--in", mix_args.parents,
                     "Parent as <corpus>@<budget-tokens> (repeatable)")
      ->required();
  mixcmd->add_option("--mode", mix_args.mode, "concat or interleave")
      ->check(CLI::IsMember({"concat", "interleave"}));
  mixcmd->add_option("--id", mix_args.id, "Output corpus id")->required();
  add_common(mixcmd, mix_args.common);

  EvalArgs eval_args;
  auto* evalcmd =
      app.add_subcommand("eval", "Train/evaluate one n-gram perplexity cell");
  evalcmd->add_option("--train", eval_args.train, "Training corpus")
      ->required();
  evalcmd->add_option("--test", eval_args.test, "Test corpus")->required();
  evalcmd->add_option("--order", eval_args.order, "n-gram order");
  evalcmd->add_option("--discount", eval_args.discount, "KN discount");
  evalcmd->add_option("--min-count", eval_args.min_count, "Vocab threshold");
  evalcmd->add_option("--report-id", eval_args.report_id, "Report name");
  add_common(evalcmd, eval_args.common);

  EvalArgs matrix_args;
  auto* matrixcmd = app.add_subcommand(
      "matrix", "Full train x test perplexity grid plus figure CSVs");
  matrixcmd->add_option("--train", matrix_args.train,
                        "Training corpora (repeatable)")
      ->required();
  matrixcmd->add_option("--test", matrix_args.test,
                        "Test corpora (repeatable)")
      ->required();
  matrixcmd->add_option("--baseline", matrix_args.baseline,
                        "Real-only baseline corpus for fig2");
  matrixcmd->add_option("--order", matrix_args.order, "n-gram order");
  matrixcmd->add_option("--discount", matrix_args.discount, "KN discount");
  matrixcmd->add_option("--min-count", matrix_args.min_count,
                        "Vocab threshold");
  matrixcmd->add_option("--report-id", matrix_args.report_id, "Report name");
  add_common(matrixcmd, matrix_args.common);

  ExportArgs export_args;
  auto* exportcmd = app.add_subcommand("export-config",
                                       "Write a neural-trainer config JSON");
  exportcmd->add_option("--kind", export_args.kind, "causal or masked")
      ->check(CLI::IsMember({"causal", "masked"}));
  exportcmd->add_option("--manifest", export_args.manifest_ref,
                        "Corpus id or manifest path to reference")
      ->required();
  exportcmd->add_option("--out-path", export_args.out_path,
                        "Output file (default reports/trainer_<kind>.json)");
  add_common(exportcmd, export_args.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (ingest->parsed()) return run_ingest(ingest_args);
    if (synthesize->parsed()) return run_synthesize(syn_args);
    if (mixcmd->parsed()) return run_mix(mix_args);
    if (evalcmd->parsed()) return run_eval_or_matrix(eval_args, false);
    if (matrixcmd->parsed()) return run_eval_or_matrix(matrix_args, true);
    if (exportcmd->parsed()) return run_export_config(export_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
