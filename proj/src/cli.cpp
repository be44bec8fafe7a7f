#include "flashrank/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "flashrank/error.hpp"
#include "flashrank/json_io.hpp"
#include "flashrank/pipeline.hpp"
#include "flashrank/service.hpp"

namespace flashrank {

namespace {

struct GlobalOptions {
  std::string config_path;
  bool verbose = false;
  // Config keys set from command-line flags, applied after file and env.
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Registers `--flag` that writes its value into config key `key`.
void BindKey(CLI::App* cmd, GlobalOptions& g, const std::string& flag, const std::string& key,
             const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&g, key](const std::string& v) { g.overrides.emplace_back(key, v); }, help);
}

PipelineConfig ResolveConfig(const GlobalOptions& g) {
  PipelineConfig config;
  if (!g.config_path.empty()) config = PipelineConfig::Load(g.config_path);
  config.ApplyEnvironment([](const char* name) { return std::getenv(name); });
  for (const auto& [key, value] : g.overrides) config.Set(key, value);
  return config;
}

std::vector<double> ParseList(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(flag + ": expected comma-separated numbers, got \"" + text + "\"");
    }
  }
  return out;
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw IoError("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

struct QueryInput {
  std::string text;
  std::string id = kDefaultQueryId;
  std::string file;

  void Register(CLI::App* cmd) {
    cmd->add_option("-q,--query", text, "Query text");
    cmd->add_option("--query-id", id, "Id for --query");
    cmd->add_option("--queries", file, "TSV file of query_id<TAB>text");
  }

  std::vector<QueryRecord> Resolve() const {
    if (!file.empty()) return LoadQueries(file);
    if (text.empty()) throw ValidationError("give --query or --queries");
    return {QueryRecord{id, text}};
  }
};

void PrintWarnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

int CmdIndex(const GlobalOptions& g, const std::string& corpus_flag, const std::string& out_flag,
             bool force, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = ResolveConfig(g);
  const std::filesystem::path corpus_path = corpus_flag.empty() ? config.paths.corpus : std::filesystem::path(corpus_flag);
  const std::filesystem::path index_path = out_flag.empty() ? config.paths.index : std::filesystem::path(out_flag);
  if (corpus_path.empty()) throw ValidationError("paths.corpus: no corpus given (--corpus)");
  if (index_path.empty()) throw ValidationError("paths.index: no output path given (--out)");
  if (!std::filesystem::exists(corpus_path)) {
    throw IoError("corpus file not found: " + corpus_path.string());
  }
  if (std::filesystem::exists(index_path) && !force) {
    throw ValidationError("index " + index_path.string() + " already exists; pass --force to rebuild");
  }
  Corpus corpus = IngestJsonl(corpus_path);
  if (!config.paths.embeddings.empty()) corpus = LoadEmbeddings(config.paths.embeddings, corpus);
  const auto index = Bm25Index::Build(corpus, config.bm25);
  index.Save(index_path);
  out << "indexed " << index.doc_count() << " documents, avg length " << std::fixed
      << std::setprecision(2) << index.avg_doc_length() << " tokens -> " << index_path.string()
      << "\n";
  if (g.verbose) err << "postings: " << index.postings().size() << " terms\n";
  return 0;
}

int CmdExpand(const GlobalOptions& g, const QueryInput& input, std::ostream& out,
              std::ostream& err) {
  const auto pipeline = Pipeline::FromConfig(ResolveConfig(g));
  for (const auto& q : input.Resolve()) {
    std::vector<std::string> warnings;
    const auto eq = pipeline.Expand(q.id, q.text, &warnings);
    PrintWarnings(err, warnings);
    out << ToJson(eq).dump() << "\n";
  }
  return 0;
}

int CmdRetrieve(const GlobalOptions& g, const QueryInput& input, bool trec,
                const std::string& out_path, std::ostream& out, std::ostream& err) {
  const auto pipeline = Pipeline::FromConfig(ResolveConfig(g));
  Output sink(out_path, out);
  RunFile run;
  for (const auto& q : input.Resolve()) {
    std::vector<std::string> warnings;
    const auto eq = pipeline.Expand(q.id, q.text, &warnings);
    PrintWarnings(err, warnings);
    const auto set = pipeline.Retrieve(eq);
    if (trec) {
      for (const auto& c : set.candidates) run.Append(q.id, c.doc.id, c.score);
    } else {
      *sink << ToJson(set).dump() << "\n";
    }
  }
  if (trec) run.Write(*sink, "flashrank-hybrid");
  return 0;
}

int CmdRerank(const GlobalOptions& g, const QueryInput& input, bool explain,
              const std::string& out_path, std::ostream& out, std::ostream& err) {
  const auto pipeline = Pipeline::FromConfig(ResolveConfig(g));
  Output sink(out_path, out);
  for (const auto& q : input.Resolve()) {
    const auto run = pipeline.Run(q.id, q.text);
    PrintWarnings(err, run.warnings);
    *sink << SelectionJson(run.selection) << "\n";
    if (explain) err << ExplainSelection(run.selection, pipeline.config().coeffs);
    if (g.verbose) {
      err << q.id << ": " << run.candidates.size() << " candidates, rerank "
          << run.timings.rerank_ms << " ms, total " << run.timings.total_ms << " ms\n";
    }
  }
  return 0;
}

struct TuneOptions {
  std::string instances;
  std::string alpha, beta, gamma, delta;
  std::string out;
};

int CmdTune(const GlobalOptions& g, const TuneOptions& opts, std::ostream& out, std::ostream& err) {
  const auto pipeline = Pipeline::FromConfig(ResolveConfig(g));
  if (opts.instances.empty()) throw ValidationError("--instances is required");
  GridSpec grid = GridSpec::Default();
  if (!opts.alpha.empty()) grid.alpha = ParseList("--grid-alpha", opts.alpha);
  if (!opts.beta.empty()) grid.beta = ParseList("--grid-beta", opts.beta);
  if (!opts.gamma.empty()) grid.gamma = ParseList("--grid-gamma", opts.gamma);
  if (!opts.delta.empty()) grid.delta = ParseList("--grid-delta", opts.delta);

  std::vector<TuningInstance> instances;
  for (const auto& rec : LoadTuningRecords(opts.instances)) {
    instances.push_back(pipeline.MakeTuningInstance(rec));
  }
  const auto& sel = pipeline.config().selection;
  const auto result = GridSearch(instances, grid, sel.budget_tokens, pipeline.scorer(), sel.length_mode);
  Output sink(opts.out, out);
  *sink << ToJson(result).dump() << "\n";
  if (g.verbose) err << "evaluated " << result.grid_size << " grid points\n";
  return 0;
}

struct EvalOptions {
  std::string run;
  std::string qrels;
  std::size_t ndcg_k = 10;
  std::size_t recall_k = 50;
  bool linear_gain = false;
  std::string selections;
  std::string format = "json";
  std::string curve_csv;
  std::string queries;
  std::string budgets;
};

int CmdEval(const GlobalOptions& g, const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = ResolveConfig(g);
  OrderedJson report;
  const std::filesystem::path qrels_path = opts.qrels.empty() ? config.paths.qrels : std::filesystem::path(opts.qrels);
  std::optional<Qrels> qrels;
  if (!qrels_path.empty()) qrels = Qrels::Load(qrels_path);

  if (!opts.run.empty()) {
    if (!qrels) throw ValidationError("paths.qrels: --run needs qrels (--qrels)");
    const auto run = RunFile::Load(opts.run);
    const auto ndcg = NdcgAtK(run, *qrels, opts.ndcg_k,
                              opts.linear_gain ? GainMode::kLinear : GainMode::kExponential);
    const auto recall = RecallAtK(run, *qrels, opts.recall_k);
    report["ndcg@" + std::to_string(opts.ndcg_k)] = ToJson(ndcg);
    report["recall@" + std::to_string(opts.recall_k)] = ToJson(recall);
    for (const auto& qid : ndcg.missing_from_qrels) {
      err << "warning: query " << qid << " has no judgments; excluded\n";
    }
  }
  if (!opts.selections.empty()) {
    std::ifstream in(opts.selections);
    if (!in) throw IoError("cannot open " + opts.selections);
    std::vector<SelectionResult> selections;
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw IoError(opts.selections + ": malformed JSON line");
      selections.push_back(SelectionFromJson(j));
    }
    report["tokens"] = ToJson(MakeTokenReport(selections));
  }
  if (!opts.curve_csv.empty()) {
    if (!qrels) throw ValidationError("paths.qrels: the recall-cost curve needs qrels");
    if (opts.queries.empty() || opts.budgets.empty()) {
      throw ValidationError("--curve-csv needs --queries and --budgets");
    }
    const auto pipeline = Pipeline::FromConfig(config);
    const auto queries = LoadQueries(opts.queries);
    if (queries.empty()) throw ValidationError("--queries file is empty");
    std::vector<RecallCostPoint> points;
    for (double b : ParseList("--budgets", opts.budgets)) {
      if (b < 1) throw ValidationError("selection.budget must be >= 1");
      QueryOverrides overrides;
      overrides.budget = static_cast<std::size_t>(b);
      RunFile run;
      double tokens = 0.0;
      for (const auto& q : queries) {
        const auto res = pipeline.Run(q.id, q.text, overrides);
        const auto& sel = res.selection.selected;
        for (std::size_t i = 0; i < sel.size(); ++i) {
          run.Append(q.id, sel[i].doc_id, static_cast<double>(sel.size() - i));
        }
        tokens += static_cast<double>(res.selection.total_tokens);
      }
      const auto recall = RecallAtK(run, *qrels, std::max<std::size_t>(1, pipeline.config().retrieval_n));
      points.push_back(RecallCostPoint{*overrides.budget, tokens / static_cast<double>(queries.size()),
                                       recall.mean});
    }
    std::ofstream csv(opts.curve_csv, std::ios::trunc);
    if (!csv) throw IoError("cannot write " + opts.curve_csv);
    WriteRecallCostCsv(csv, points);
  }
  if (report.empty() && opts.curve_csv.empty()) {
    throw ValidationError("nothing to evaluate: give --run, --selections or --curve-csv");
  }

  if (opts.format == "text") {
    for (const auto& [name, value] : report.items()) {
      if (value.contains("mean") && value.contains("per_query")) {
        out << std::left << std::setw(12) << name << std::right << std::fixed
            << std::setprecision(4) << value["mean"].get<double>() << "\n";
        for (const auto& [qid, v] : value["per_query"].items()) {
          out << "  " << std::left << std::setw(10) << qid << std::right << std::setprecision(4)
              << v.get<double>() << "\n";
        }
      } else {
        out << std::left << std::setw(12) << name << value.dump() << "\n";
      }
    }
  } else if (!report.empty()) {
    out << report.dump() << "\n";
  }
  return 0;
}

int CmdBench(const GlobalOptions& g, const QueryInput& input, const BenchConfig& bench,
             std::ostream& out, std::ostream& err) {
  const auto pipeline = Pipeline::FromConfig(ResolveConfig(g));
  const auto queries = input.Resolve();
  std::size_t candidates = 0;
  const auto report = BenchRerank(
      [&](std::size_t i) {
        const auto run = pipeline.Run(queries[i].id, queries[i].text);
        candidates = std::max(candidates, run.candidates.size());
        return run.timings;
      },
      queries.size(), bench);
  auto j = ToJson(report);
  j["max_candidates"] = candidates;
  out << j.dump() << "\n";
  if (g.verbose) err << "benchmarked " << queries.size() << " queries\n";
  return 0;
}

int CmdServe(const GlobalOptions& g, const std::string& host, int port, std::ostream& err) {
  const auto pipeline = Pipeline::FromConfig(ResolveConfig(g));
  HttpServer server(pipeline);
  err << "serving on " << host << ":" << port << "\n";
  server.Listen(host, port);
  return 0;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Budget-aware retrieval and greedy context selection", "flashrank"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Pipeline config file")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", g.verbose, "Extra diagnostics on stderr");

  auto add_expansion_flags = [&g](CLI::App* cmd) {
    BindKey(cmd, g, "--phi", "expansion.phi", "Informativeness threshold");
    BindKey(cmd, g, "--m", "expansion.m", "Max expansion terms");
    BindKey(cmd, g, "--backend", "expansion.backend", "embedding|remote_llm|both");
  };
  auto add_selection_flags = [&g](CLI::App* cmd) {
    BindKey(cmd, g, "--budget", "selection.budget", "Token budget B");
    BindKey(cmd, g, "--tau", "selection.tau", "Marginal-gain threshold");
    BindKey(cmd, g, "--policy", "selection.oversize_policy", "break|skip");
    BindKey(cmd, g, "--n", "retrieval.n", "Candidate pool size");
  };

  std::string corpus_flag, index_out;
  bool force = false;
  auto* index_cmd = app.add_subcommand("index", "Build and persist the BM25 index");
  index_cmd->add_option("--corpus", corpus_flag, "Corpus JSONL");
  index_cmd->add_option("-o,--out", index_out, "Index output path");
  index_cmd->add_flag("--force", force, "Overwrite an existing index");
  BindKey(index_cmd, g, "--k1", "bm25.k1", "BM25 k1");
  BindKey(index_cmd, g, "--b", "bm25.b", "BM25 b");

  QueryInput expand_in;
  auto* expand_cmd = app.add_subcommand("expand", "Print the expanded query");
  expand_in.Register(expand_cmd);
  add_expansion_flags(expand_cmd);

  QueryInput retrieve_in;
  bool trec = false;
  std::string retrieve_out;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Hybrid candidate retrieval");
  retrieve_in.Register(retrieve_cmd);
  retrieve_cmd->add_flag("--trec", trec, "Write a TREC run instead of JSON");
  retrieve_cmd->add_option("-o,--out", retrieve_out, "Output file");
  add_expansion_flags(retrieve_cmd);
  BindKey(retrieve_cmd, g, "--n", "retrieval.n", "Candidate pool size");

  QueryInput rerank_in;
  bool explain = false;
  std::string rerank_out;
  auto* rerank_cmd = app.add_subcommand("rerank", "Expand, retrieve and select under a budget");
  rerank_in.Register(rerank_cmd);
  rerank_cmd->add_flag("--explain", explain, "Per-step component report on stderr");
  rerank_cmd->add_option("-o,--out", rerank_out, "Output file (JSON lines)");
  add_expansion_flags(rerank_cmd);
  add_selection_flags(rerank_cmd);

  TuneOptions tune;
  auto* tune_cmd = app.add_subcommand("tune", "Grid-search the utility coefficients");
  tune_cmd->add_option("--instances", tune.instances, "Tuning JSONL")->required();
  tune_cmd->add_option("--grid-alpha", tune.alpha, "Comma-separated alpha values");
  tune_cmd->add_option("--grid-beta", tune.beta, "Comma-separated beta values");
  tune_cmd->add_option("--grid-gamma", tune.gamma, "Comma-separated gamma values");
  tune_cmd->add_option("--grid-delta", tune.delta, "Comma-separated delta values");
  tune_cmd->add_option("-o,--out", tune.out, "Output JSON path");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Retrieval metrics and token accounting");
  eval_cmd->add_option("--run", eval.run, "TREC run file");
  eval_cmd->add_option("--qrels", eval.qrels, "TREC qrels file");
  eval_cmd->add_option("--ndcg-k", eval.ndcg_k, "NDCG cutoff")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--recall-k", eval.recall_k, "Recall cutoff")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--linear-gain", eval.linear_gain, "Use rel instead of 2^rel - 1");
  eval_cmd->add_option("--selections", eval.selections, "Rerank JSON lines for token stats");
  eval_cmd->add_option("--format", eval.format, "json|text")->check(CLI::IsMember({"json", "text"}));
  eval_cmd->add_option("--curve-csv", eval.curve_csv, "Write a recall-vs-tokens CSV");
  eval_cmd->add_option("--queries", eval.queries, "Queries for --curve-csv");
  eval_cmd->add_option("--budgets", eval.budgets, "Comma-separated budgets for --curve-csv");

  QueryInput bench_in;
  BenchConfig bench;
  auto* bench_cmd = app.add_subcommand("bench", "Latency of the full pipeline per stage");
  bench_in.Register(bench_cmd);
  bench_cmd->add_option("--repetitions", bench.repetitions, "Timed passes")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", bench.warmup, "Untimed passes");
  add_selection_flags(bench_cmd);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*index_cmd) return CmdIndex(g, corpus_flag, index_out, force, out, err);
    if (*expand_cmd) return CmdExpand(g, expand_in, out, err);
    if (*retrieve_cmd) return CmdRetrieve(g, retrieve_in, trec, retrieve_out, out, err);
    if (*rerank_cmd) return CmdRerank(g, rerank_in, explain, rerank_out, out, err);
    if (*tune_cmd) return CmdTune(g, tune, out, err);
    if (*eval_cmd) return CmdEval(g, eval, out, err);
    if (*bench_cmd) {
      if (bench_in.file.empty() && bench_in.text.empty()) {
        throw ValidationError("bench needs --query or --queries");
      }
      return CmdBench(g, bench_in, bench, out, err);
    }
    if (*serve_cmd) return CmdServe(g, host, port, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace flashrank
