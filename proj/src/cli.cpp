#include "graphflow/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/metrics.hpp"
#include "graphflow/oracle.hpp"
#include "graphflow/parallel.hpp"
#include "graphflow/rng.hpp"
#include "graphflow/sampler.hpp"
#include "graphflow/synth.hpp"
#include "graphflow/trainer.hpp"

namespace graphflow {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// One per run: what ran, with which settings, on which files.
class RunManifest {
 public:
  explicit RunManifest(std::string command)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["config"] = ordered_json::object();
    doc_["inputs"] = ordered_json::object();
    doc_["outputs"] = ordered_json::object();
    doc_["seed"] = 0;
    doc_["digests"] = ordered_json::object();
    doc_["result"] = ordered_json::object();
  }

  void seed(std::uint64_t s) { doc_["seed"] = s; }
  ordered_json& config() { return doc_["config"]; }
  ordered_json& result() { return doc_["result"]; }

  void input(const std::string& name, const fs::path& path) {
    doc_["inputs"][name] = path.string();
    doc_["digests"][path.string()] = hex64(fnv1a(read_file(path)));
  }
  void output(const std::string& name, const fs::path& path) {
    doc_["outputs"][name] = path.string();
    doc_["digests"][path.string()] = hex64(fnv1a(read_file(path)));
  }

  std::string finish() {
    doc_["wall_time_s"] = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start_)
                              .count();
    return doc_.dump(2) + "\n";
  }

 private:
  ordered_json doc_;
  std::chrono::steady_clock::time_point start_;
};

void write_output(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, content);
}

ordered_json key_values_to_json(const std::string& text) {
  ordered_json out = ordered_json::object();
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
    pos = end + 1;
  }
  return out;
}

// Flat key=value lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_key_values(
    const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  const std::string text = read_file(path);
  std::size_t pos = 0, line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(pos, end - pos);
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorKind::kParse, path.string() + ":" +
                                           std::to_string(line_no) +
                                           ": expected key=value");
      }
      out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    pos = end + 1;
  }
  return out;
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size() || value.front() == '-') throw std::exception();
    return static_cast<T>(v);
  } catch (...) {
    throw Error(ErrorKind::kParse, "bad value for " + key + ": " + value);
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::exception();
    return v;
  } catch (...) {
    throw Error(ErrorKind::kParse, "bad value for " + key + ": " + value);
  }
}

void apply_synth_value(SynthConfig& cfg, const std::string& key,
                       const std::string& value) {
  auto list = [&](auto parse) {
    using T = decltype(parse(std::string()));
    std::vector<T> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
      std::size_t end = value.find(',', pos);
      if (end == std::string::npos) end = value.size();
      out.push_back(parse(value.substr(pos, end - pos)));
      pos = end + 1;
    }
    return out;
  };
  if (key == "num_papers") cfg.num_papers = parse_unsigned<std::size_t>(key, value);
  else if (key == "num_authors") cfg.num_authors = parse_unsigned<std::size_t>(key, value);
  else if (key == "num_venues") cfg.num_venues = parse_unsigned<std::size_t>(key, value);
  else if (key == "vocab_size") cfg.vocab_size = parse_unsigned<std::size_t>(key, value);
  else if (key == "topic_vocab") cfg.topic_vocab = parse_unsigned<std::size_t>(key, value);
  else if (key == "tokens_per_doc") cfg.tokens_per_doc = parse_unsigned<std::size_t>(key, value);
  else if (key == "num_queries") cfg.num_queries = parse_unsigned<std::size_t>(key, value);
  else if (key == "num_test_queries") cfg.num_test_queries = parse_unsigned<std::size_t>(key, value);
  else if (key == "max_targets") cfg.max_targets = parse_unsigned<std::size_t>(key, value);
  else if (key == "deep_target_rate") cfg.deep_target_rate = parse_double(key, value);
  else if (key == "depth_cutoff") cfg.depth_cutoff = parse_unsigned<int>(key, value);
  else if (key == "bin_weights") {
    cfg.bin_weights = list([&](const std::string& v) { return parse_double(key, v); });
  } else if (key == "bin_edges") {
    cfg.bins.lower = list([&](const std::string& v) { return parse_unsigned<std::size_t>(key, v); });
  } else if (key == "dim") cfg.encoder.dim = parse_unsigned<std::size_t>(key, value);
  else if (key == "doc_cutoff") cfg.encoder.doc_cutoff = parse_unsigned<std::size_t>(key, value);
  else if (key == "hash_seed") cfg.encoder.hash_seed = parse_unsigned<std::uint64_t>(key, value);
  else if (key == "ngram_orders") {
    cfg.encoder.ngram_orders = list([&](const std::string& v) { return parse_unsigned<int>(key, v); });
  } else {
    throw Error(ErrorKind::kInvalidArgument, "unknown config key " + key);
  }
}

ordered_json synth_config_json(const SynthConfig& cfg) {
  return {{"num_papers", cfg.num_papers},
          {"num_authors", cfg.num_authors},
          {"num_venues", cfg.num_venues},
          {"vocab_size", cfg.vocab_size},
          {"topic_vocab", cfg.topic_vocab},
          {"tokens_per_doc", cfg.tokens_per_doc},
          {"num_queries", cfg.num_queries},
          {"num_test_queries", cfg.num_test_queries},
          {"bin_weights", cfg.bin_weights},
          {"bin_edges", cfg.bins.lower},
          {"max_targets", cfg.max_targets},
          {"deep_target_rate", cfg.deep_target_rate},
          {"depth_cutoff", cfg.depth_cutoff},
          {"dim", cfg.encoder.dim},
          {"doc_cutoff", cfg.encoder.doc_cutoff},
          {"hash_seed", cfg.encoder.hash_seed},
          {"ngram_orders", cfg.encoder.ngram_orders}};
}

// {"node id": reward, ...}
RewardSpec load_reward_table(const fs::path& path, const Graph& graph) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorKind::kParse, path.string() + ": expected an object");
  }
  std::map<NodeIndex, double> table;
  for (const auto& [id, value] : doc.items()) {
    if (!value.is_number()) {
      throw Error(ErrorKind::kParse, path.string() + ": reward for " + id +
                                         " is not a number");
    }
    table[graph.index_of(id)] = value.get<double>();
  }
  return RewardSpec::from_table(std::move(table));
}

std::string reward_table_json(const RewardSpec& reward, const Graph& graph) {
  ordered_json doc = ordered_json::object();
  for (const auto& [node, value] : reward.table) doc[graph.node(node).id] = value;
  return doc.dump(2) + "\n";
}

// A graph plus queries, from files or from a named fixture.
struct Problem {
  Graph graph;
  QuerySet queries;
  RewardSpec reward;
  MdpConfig mdp;
  std::optional<std::string> fixture;
};

struct ProblemFlags {
  std::string graph;
  std::string queries;
  std::string reward;
  std::string fixture;
};

void add_problem_flags(CLI::App* cmd, ProblemFlags& flags, bool allow_fixture) {
  cmd->add_option("--graph", flags.graph, "graph JSONL")->check(CLI::ExistingFile);
  cmd->add_option("--queries", flags.queries, "queries JSONL")->check(CLI::ExistingFile);
  cmd->add_option("--reward", flags.reward,
                  "JSON table of node id -> reward (default: binary)")
      ->check(CLI::ExistingFile);
  if (allow_fixture) {
    cmd->add_option("--fixture", flags.fixture, "built-in micro-graph")
        ->check(CLI::IsMember(fixture_names()));
  }
}

Problem load_problem(const ProblemFlags& flags, RunManifest& manifest) {
  Problem p;
  if (!flags.fixture.empty()) {
    Fixture f = make_fixture(flags.fixture);
    p.graph = std::move(f.graph);
    p.queries = std::move(f.queries);
    p.reward = f.reward;
    p.mdp = f.mdp;
    p.fixture = flags.fixture;
    manifest.config()["fixture"] = flags.fixture;
    return p;
  }
  if (flags.graph.empty() || flags.queries.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "--graph and --queries are required (or --fixture)");
  }
  p.graph = load_graph(flags.graph);
  manifest.input("graph", flags.graph);
  p.queries = load_queries(flags.queries, p.graph);
  manifest.input("queries", flags.queries);
  if (!flags.reward.empty()) {
    p.reward = load_reward_table(flags.reward, p.graph);
    manifest.input("reward", flags.reward);
  }
  return p;
}

void emit_manifest(RunManifest& manifest, const std::string& path,
                   std::ostream& out) {
  const std::string text = manifest.finish();
  if (path.empty()) {
    out << text;
  } else {
    write_output(path, text);
  }
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FLOWGRAPH_SEED")) {
    return parse_unsigned<std::uint64_t>("FLOWGRAPH_SEED", env);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GenFlags {
  std::string out_dir;
  std::string fixture;
  std::optional<std::size_t> num_queries;
  std::optional<std::size_t> num_test_queries;
};

void cmd_gen(const GenFlags& flags, const std::string& config_path,
             std::uint64_t seed, RunManifest& manifest) {
  const fs::path dir(flags.out_dir);
  fs::create_directories(dir);
  if (!flags.fixture.empty()) {
    const Fixture f = make_fixture(flags.fixture);
    manifest.config()["fixture"] = flags.fixture;
    write_output(dir / "graph.jsonl", graph_to_jsonl(f.graph));
    manifest.output("graph", dir / "graph.jsonl");
    write_output(dir / "queries.jsonl", queries_to_jsonl(f.queries, f.graph));
    manifest.output("queries", dir / "queries.jsonl");
    if (f.reward.mode == RewardSpec::Mode::kTable) {
      write_output(dir / "reward.json", reward_table_json(f.reward, f.graph));
      manifest.output("reward", dir / "reward.json");
    }
    return;
  }
  SynthConfig cfg;
  cfg.seed = seed;
  if (!config_path.empty()) {
    for (const auto& [k, v] : read_key_values(config_path)) {
      apply_synth_value(cfg, k, v);
    }
    manifest.input("config", config_path);
  }
  if (flags.num_queries) cfg.num_queries = *flags.num_queries;
  if (flags.num_test_queries) cfg.num_test_queries = *flags.num_test_queries;
  manifest.config() = synth_config_json(cfg);

  const SynthOutput synth = generate(cfg);
  write_output(dir / "graph.jsonl", synth.graph_jsonl());
  manifest.output("graph", dir / "graph.jsonl");
  write_output(dir / "queries.jsonl", synth.queries_jsonl());
  manifest.output("queries", dir / "queries.jsonl");
  if (cfg.num_test_queries > 0) {
    write_output(dir / "test_queries.jsonl", synth.test_queries_jsonl());
    manifest.output("test_queries", dir / "test_queries.jsonl");
  }
  write_output(dir / "planted.json", synth.manifest_json());
  manifest.output("planted", dir / "planted.json");
  manifest.result() = {{"nodes", synth.graph.node_count()},
                       {"edges", synth.graph.edge_count()},
                       {"queries", synth.queries.queries.size()},
                       {"test_queries", synth.test_queries.queries.size()}};
}

struct TrainFlags {
  ProblemFlags problem;
  std::string out;
  std::string log;
  std::string objective;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> max_steps;
  std::optional<double> lr;
  std::optional<std::size_t> num_exploration;
  std::optional<int> depth_cutoff;
  std::optional<double> target_loss;
  std::string dump;
};

void cmd_train(const TrainFlags& flags, const std::string& config_path,
               std::uint64_t seed, RunManifest& manifest) {
  Problem p = load_problem(flags.problem, manifest);
  TrainConfig cfg;
  cfg.mdp = p.mdp;
  cfg.reward = p.reward;
  if (!config_path.empty()) {
    for (const auto& [k, v] : read_key_values(config_path)) {
      apply_config_value(cfg, k, v);
    }
    manifest.input("config", config_path);
  }
  cfg.seed = seed;
  if (!flags.objective.empty()) cfg.objective = parse_objective(flags.objective);
  if (flags.epochs) cfg.epochs = *flags.epochs;
  if (flags.max_steps) cfg.max_steps = *flags.max_steps;
  if (flags.lr) cfg.lr = *flags.lr;
  if (flags.num_exploration) cfg.num_exploration = *flags.num_exploration;
  if (flags.depth_cutoff) cfg.mdp.depth_cutoff = *flags.depth_cutoff;
  if (flags.target_loss) cfg.target_loss = *flags.target_loss;
  cfg.dump_path = flags.dump;
  manifest.config() = key_values_to_json(cfg.to_key_values());

  const TrainResult result = train(p.graph, p.queries, cfg);
  write_output(flags.out, checkpoint_to_json(result.model));
  manifest.output("checkpoint", flags.out);
  if (!flags.log.empty()) {
    write_output(flags.log, result.log.to_csv());
    manifest.output("log", flags.log);
  }
  const LogRow& last = result.log.rows.back();
  manifest.result() = {
      {"steps", result.steps},
      {"converged", result.converged},
      {"train_units", result.train_units},
      {"eval_units", result.eval_units},
      {"final_train_loss", last.total_loss},
      {"coverage",
       {{"requested", result.coverage.requested},
        {"collected", result.coverage.collected},
        {"unreachable", result.coverage.unreachable},
        {"zero_reward", result.coverage.zero_reward}}}};
  if (!std::isnan(last.eval_loss)) manifest.result()["final_eval_loss"] = last.eval_loss;
}

struct RetrieveFlags {
  ProblemFlags problem;
  std::string checkpoint;
  std::string out;
  std::size_t n = 20;
  std::string rerank = "off";
  double temperature = 1.0;
  std::size_t jobs = 1;
};

void cmd_retrieve(const RetrieveFlags& flags, std::uint64_t seed,
                  RunManifest& manifest) {
  Problem p = load_problem(flags.problem, manifest);
  const Model model = load_checkpoint(flags.checkpoint);
  manifest.input("checkpoint", flags.checkpoint);
  SamplerConfig sc;
  sc.n = flags.n;
  sc.temperature = flags.temperature;
  sc.global_seed = seed;
  const bool rerank = flags.rerank == "on";
  manifest.config() = {{"n", sc.n},
                       {"temperature", sc.temperature},
                       {"rerank", flags.rerank},
                       {"jobs", flags.jobs}};

  const Agent agent(model, p.graph);
  std::vector<RetrievalResult> results(p.queries.queries.size());
  parallel_for(results.size(), flags.jobs, [&](std::size_t i) {
    const Query& q = p.queries.queries[i];
    RetrievalResult r = agent.retrieve(q, sc);
    results[i] = rerank ? agent.rerank(q, r) : std::move(r);
  });
  write_output(flags.out, results_to_jsonl(results, p.graph));
  manifest.output("results", flags.out);
  manifest.result() = {{"queries", results.size()}};
}

struct EvalFlags {
  ProblemFlags problem;
  std::string results;
  std::string out;
  std::string json;
  std::size_t jobs = 1;
};

void cmd_eval(const EvalFlags& flags, RunManifest& manifest) {
  Problem p = load_problem(flags.problem, manifest);
  const auto results = parse_results_jsonl(read_file(flags.results), p.graph);
  manifest.input("results", flags.results);
  EvalOptions options;
  options.jobs = flags.jobs;
  manifest.config() = {{"bin_edges", options.bins.lower},
                       {"recall_k", options.recall_k},
                       {"jobs", flags.jobs}};
  const MetricsReport report = evaluate(results, p.queries, p.graph, options);
  write_output(flags.out, report.to_csv());
  manifest.output("report", flags.out);
  if (!flags.json.empty()) {
    write_output(flags.json, report.to_json());
    manifest.output("report_json", flags.json);
  }
  ordered_json bins = ordered_json::array();
  for (const MetricsAggregate& b : report.per_bin) {
    bins.push_back({{"count", b.count}, {"d-r@20", b.dr20}});
  }
  manifest.result() = {{"queries", report.overall.count},
                       {"hit@1", report.overall.hit1},
                       {"hit@5", report.overall.hit5},
                       {"mrr", report.overall.mrr},
                       {"r@20", report.overall.r20},
                       {"d-r@20", report.overall.dr20},
                       {"per_bin", bins}};
}

struct OracleFlags {
  ProblemFlags problem;
  std::string qid;
  std::string out;
  std::string results;
  std::size_t budget = kDefaultOracleBudget;
  std::optional<int> depth_cutoff;
};

void cmd_oracle(const OracleFlags& flags, RunManifest& manifest) {
  Problem p = load_problem(flags.problem, manifest);
  if (flags.depth_cutoff) p.mdp.depth_cutoff = *flags.depth_cutoff;
  const Query* query = &p.queries.queries.front();
  if (!flags.qid.empty()) query = &p.queries.by_qid(flags.qid);
  const HashingEncoder encoder{EncoderConfig{}};
  const NodeIndex seed = rank_nodes(query->text, p.graph, 1, encoder)[0].node;
  manifest.config() = {{"qid", query->qid},
                       {"depth_cutoff", p.mdp.depth_cutoff},
                       {"allow_revisits", p.mdp.allow_revisits},
                       {"budget", flags.budget}};

  const Enumeration en =
      enumerate_trajectories(p.graph, {query->qid, query->text}, seed, p.mdp,
                             p.reward, query->targets, flags.budget);
  const FlowTable table = exact_flows(en);
  write_output(flags.out, oracle_to_json(table, p.graph));
  manifest.output("oracle", flags.out);
  manifest.result() = {{"trajectories", en.trajectory_count()},
                       {"partition", table.partition()},
                       {"conservation_error", table.conservation_error()},
                       {"crosscheck_error", table.crosscheck_error()}};

  if (!flags.results.empty()) {
    const auto results = parse_results_jsonl(read_file(flags.results), p.graph);
    manifest.input("results", flags.results);
    auto it = std::find_if(results.begin(), results.end(),
                           [&](const RetrievalResult& r) { return r.qid == query->qid; });
    if (it == results.end() || it->samples.empty()) {
      throw Error(ErrorKind::kNotFound, "no samples for " + query->qid);
    }
    std::map<NodeIndex, double> empirical;
    const double w = 1.0 / static_cast<double>(it->samples.size());
    for (const SampledPath& s : it->samples) empirical[s.terminal()] += w;
    // Normalize exactly; repeated addition of w can drift in the last bits.
    double total = 0.0;
    for (const auto& [node, v] : empirical) total += v;
    for (auto& [node, v] : empirical) v /= total;
    const DistributionDistance d =
        distribution_distance(empirical, terminal_distribution(table));
    manifest.result()["samples"] = it->samples.size();
    manifest.result()["total_variation"] = d.total_variation;
    manifest.result()["l1"] = d.l1;
  }
}

struct GradcheckFlags {
  ProblemFlags problem;
  std::vector<std::string> objectives;
  double h = 1e-5;
  std::size_t samples = 100;
  double tolerance = 1e-4;
  std::string hidden;
};

void cmd_gradcheck(const GradcheckFlags& flags, std::uint64_t seed,
                   RunManifest& manifest, std::ostream& out) {
  Problem p = load_problem(flags.problem, manifest);
  std::vector<std::string> objectives = flags.objectives;
  if (objectives.empty()) objectives = {"dble", "tb", "subtb", "sft", "prm"};
  manifest.config() = {{"step", flags.h},
                       {"samples", flags.samples},
                       {"tolerance", flags.tolerance},
                       {"objectives", objectives}};
  double worst = 0.0;
  for (const std::string& name : objectives) {
    TrainConfig cfg;
    cfg.objective = parse_objective(name);
    cfg.mdp = p.mdp;
    cfg.reward = p.reward;
    cfg.seed = seed;
    if (!flags.hidden.empty()) apply_config_value(cfg, "hidden", flags.hidden);
    const TrainingData data(p.graph, p.queries, cfg);
    Model model = init_model(cfg.encoder, cfg.mdp, cfg.hidden, seed);
    // Nonzero log Z so the tb term is exercised away from its boundary.
    model.set_log_z(0.3);
    const GradCheckReport report = grad_check(
        model, [&](const Model& m) { return data.total_loss(m); }, flags.h,
        flags.samples, hash_combine(seed, 7));
    manifest.result()[name] = {{"max_rel_error", report.max_rel_error},
                               {"checked", report.checked},
                               {"worst_index", report.worst_index}};
    char line[128];
    std::snprintf(line, sizeof(line), "%-6s max rel err %.3e over %zu params\n",
                  name.c_str(), report.max_rel_error, report.checked);
    out << line;
    worst = std::max(worst, report.max_rel_error);
  }
  manifest.result()["max_rel_error"] = worst;
  if (worst > flags.tolerance) {
    throw Error(ErrorKind::kNumerical,
                "gradient check failed: max rel err " + std::to_string(worst));
  }
}

struct DenseFlags {
  ProblemFlags problem;
  std::string out;
  std::size_t k = 20;
  std::size_t jobs = 1;
};

void cmd_baseline_dense(const DenseFlags& flags, RunManifest& manifest) {
  Problem p = load_problem(flags.problem, manifest);
  const HashingEncoder encoder{EncoderConfig{}};
  const DocumentIndex index(p.graph, encoder);
  manifest.config() = {{"k", flags.k}, {"jobs", flags.jobs}};
  std::vector<RetrievalResult> results(p.queries.queries.size());
  // The ranked list doubles as the retrieved set for the recall metrics.
  parallel_for(results.size(), flags.jobs, [&](std::size_t i) {
    const Query& q = p.queries.queries[i];
    RetrievalResult& r = results[i];
    r.qid = q.qid;
    for (const ScoredNode& s : index.rank(q.text, flags.k)) {
      r.ranked.push_back({s.node, s.score, 1});
      r.samples.push_back({{s.node}});
    }
  });
  write_output(flags.out, results_to_jsonl(results, p.graph));
  manifest.output("results", flags.out);
  manifest.result() = {{"queries", results.size()}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"graphflow: flow-based multi-hop retrieval over text-rich graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "graphflow 0.1");

  std::uint64_t seed = 0;
  std::string config_path;
  std::string manifest_path;
  bool seed_given = false;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "global seed (default: $FLOWGRAPH_SEED or 0)")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--manifest", manifest_path,
                    "write the run manifest here instead of stdout");
  };

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic benchmark");
  add_common(gen_cmd);
  gen_cmd->add_option("--out-dir", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--config", config_path, "flat key=value file")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--fixture", gen.fixture, "write a built-in fixture instead")
      ->check(CLI::IsMember(fixture_names()));
  gen_cmd->add_option("--num-queries", gen.num_queries);
  gen_cmd->add_option("--num-test-queries", gen.num_test_queries);

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "train a flow model");
  add_common(train_cmd);
  add_problem_flags(train_cmd, tr.problem, true);
  train_cmd->add_option("--config", config_path, "flat key=value file")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "training log CSV");
  train_cmd->add_option("--objective", tr.objective)
      ->check(CLI::IsMember({"dble", "tb", "subtb", "sft", "prm"}));
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--max-steps", tr.max_steps);
  train_cmd->add_option("--lr", tr.lr);
  train_cmd->add_option("--num-exploration", tr.num_exploration);
  train_cmd->add_option("--depth-cutoff", tr.depth_cutoff);
  train_cmd->add_option("--target-loss", tr.target_loss);
  train_cmd->add_option("--dump", tr.dump, "where to dump the model on a non-finite loss");

  RetrieveFlags rf;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "sample retrievals from a checkpoint");
  add_common(retrieve_cmd);
  add_problem_flags(retrieve_cmd, rf.problem, true);
  retrieve_cmd->add_option("--checkpoint", rf.checkpoint)->required()->check(CLI::ExistingFile);
  retrieve_cmd->add_option("--out", rf.out, "results JSONL")->required();
  retrieve_cmd->add_option("--n", rf.n, "trajectories per query");
  retrieve_cmd->add_option("--rerank", rf.rerank)->check(CLI::IsMember({"on", "off"}));
  retrieve_cmd->add_option("--temperature", rf.temperature);
  retrieve_cmd->add_option("--jobs", rf.jobs)->check(CLI::PositiveNumber);

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "score a results file");
  add_common(eval_cmd);
  add_problem_flags(eval_cmd, ef.problem, true);
  eval_cmd->add_option("--results", ef.results)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ef.out, "report CSV")->required();
  eval_cmd->add_option("--json", ef.json, "report JSON");
  eval_cmd->add_option("--jobs", ef.jobs)->check(CLI::PositiveNumber);

  OracleFlags of;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact flows by enumeration");
  add_common(oracle_cmd);
  add_problem_flags(oracle_cmd, of.problem, true);
  oracle_cmd->add_option("--qid", of.qid, "query (default: first)");
  oracle_cmd->add_option("--out", of.out, "oracle JSON")->required();
  oracle_cmd->add_option("--results", of.results, "compare these samples to P*")
      ->check(CLI::ExistingFile);
  oracle_cmd->add_option("--budget", of.budget, "max trajectories to enumerate");
  oracle_cmd->add_option("--depth-cutoff", of.depth_cutoff);

  GradcheckFlags gf;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(grad_cmd);
  add_problem_flags(grad_cmd, gf.problem, true);
  grad_cmd->add_option("--objective", gf.objectives, "default: all")
      ->check(CLI::IsMember({"dble", "tb", "subtb", "sft", "prm"}));
  grad_cmd->add_option("--step", gf.h, "central-difference step");
  grad_cmd->add_option("--samples", gf.samples);
  grad_cmd->add_option("--tolerance", gf.tolerance);
  grad_cmd->add_option("--hidden", gf.hidden, "e.g. 16,16 or none");

  DenseFlags df;
  auto* dense_cmd = app.add_subcommand("baseline-dense", "cosine top-k baseline");
  add_common(dense_cmd);
  add_problem_flags(dense_cmd, df.problem, true);
  dense_cmd->add_option("--out", df.out, "results JSONL")->required();
  dense_cmd->add_option("--k", df.k);
  dense_cmd->add_option("--jobs", df.jobs)->check(CLI::PositiveNumber);

  auto report_error = [&](const char* kind, const std::string& message) {
    err << ordered_json{{"error", {{"kind", kind}, {"message", message}}}}.dump()
        << "\n";
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (!seed_given) seed = default_seed();
    CLI::App* cmd = app.get_subcommands().front();
    RunManifest manifest(cmd->get_name());
    manifest.seed(seed);
    const std::string& name = cmd->get_name();
    if (name == "gen") cmd_gen(gen, config_path, seed, manifest);
    else if (name == "train") cmd_train(tr, config_path, seed, manifest);
    else if (name == "retrieve") cmd_retrieve(rf, seed, manifest);
    else if (name == "eval") cmd_eval(ef, manifest);
    else if (name == "oracle") cmd_oracle(of, manifest);
    else if (name == "gradcheck") cmd_gradcheck(gf, seed, manifest, err);
    else cmd_baseline_dense(df, manifest);
    emit_manifest(manifest, manifest_path, out);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace graphflow
