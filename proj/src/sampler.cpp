#include "graphflow/sampler.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "graphflow/error.hpp"
#include "graphflow/rng.hpp"

namespace graphflow {

using nlohmann::json;

std::vector<NodeIndex> RetrievalResult::ranked_nodes() const {
  std::vector<NodeIndex> out;
  for (const RankedEntry& e : ranked) out.push_back(e.node);
  return out;
}

std::vector<NodeIndex> RetrievalResult::sample_terminals() const {
  std::vector<NodeIndex> out;
  for (const SampledPath& s : samples) out.push_back(s.terminal());
  return out;
}

Agent::Agent(const Model& model, const Graph& graph)
    : model_(&model),
      encoder_(model.encoder_config()),
      featurizer_(graph, encoder_, model.mdp_config()) {}

NodeIndex Agent::seed_node(const Query& query) const {
  return featurizer_.document_index().rank(query.text, 1)[0].node;
}

std::vector<double> Agent::action_probs(const State& state,
                                        double temperature) const {
  const auto actions =
      candidate_actions(featurizer_.graph(), state, featurizer_.mdp());
  const auto scores =
      action_scores(*model_, featurizer_.action_features(state, actions));
  return policy_probs(scores, temperature);
}

Trajectory Agent::sample_trajectory(const Query& query, std::uint64_t rng_seed,
                                    double temperature) const {
  const Graph& graph = featurizer_.graph();
  Rng rng(rng_seed);
  Trajectory traj;
  traj.query = {query.qid, query.text};
  State state = initial_state(graph, traj.query, seed_node(query));
  while (!state.stopped) {
    Step step{state, candidate_actions(graph, state, featurizer_.mdp()), 0};
    const auto scores = action_scores(
        *model_, featurizer_.action_features(state, step.candidates));
    step.chosen = sample_categorical(policy_probs(scores, temperature), rng);
    state = apply_action(graph, state, step.action(), featurizer_.mdp());
    traj.steps.push_back(std::move(step));
  }
  traj.final_state = std::move(state);
  return traj;
}

std::uint64_t sample_seed(std::uint64_t global_seed, std::string_view qid,
                          std::size_t index) {
  return hash_combine(hash_string(global_seed, qid), index);
}

RetrievalResult Agent::retrieve(const Query& query,
                                const SamplerConfig& cfg) const {
  if (cfg.n < 1) throw Error(ErrorKind::kInvalidArgument, "n must be >= 1");
  RetrievalResult result;
  result.qid = query.qid;
  struct Tally {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<NodeIndex, Tally> tally;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const Trajectory t = sample_trajectory(
        query, sample_seed(cfg.global_seed, query.qid, i), cfg.temperature);
    result.samples.push_back({t.final_state.path});
    auto [it, inserted] = tally.try_emplace(t.terminal(), Tally{0, i});
    ++it->second.count;
  }
  const Graph& graph = featurizer_.graph();
  std::vector<std::pair<NodeIndex, Tally>> entries(tally.begin(), tally.end());
  std::sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    if (a.second.first != b.second.first) return a.second.first < b.second.first;
    return graph.node(a.first).id < graph.node(b.first).id;
  });
  for (const auto& [node, t] : entries) {
    result.ranked.push_back(
        {node, static_cast<double>(t.count) / static_cast<double>(cfg.n),
         t.count});
  }
  return result;
}

RetrievalResult Agent::rerank(const Query& query,
                              const RetrievalResult& result) const {
  const Graph& graph = featurizer_.graph();
  RetrievalResult out = result;
  const QueryRef ref{query.qid, query.text};
  std::map<NodeIndex, double> rescored;
  for (const RankedEntry& e : result.ranked) {
    auto sample = std::find_if(
        result.samples.begin(), result.samples.end(),
        [&](const SampledPath& s) { return s.terminal() == e.node; });
    if (sample == result.samples.end()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "ranked node without a sample in result " + result.qid);
    }
    const State terminal_state{ref, sample->path, false};
    const Action stop = Action::stop();
    const auto feats =
        featurizer_.action_features(terminal_state, std::span(&stop, 1));
    rescored[e.node] = head_forward(*model_, Head::kPolicy, feats[0]);
  }
  for (RankedEntry& e : out.ranked) e.score = rescored.at(e.node);
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [&](const RankedEntry& a, const RankedEntry& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.count != b.count) return a.count > b.count;
                     return graph.node(a.node).id < graph.node(b.node).id;
                   });
  out.rerank_applied = true;
  return out;
}

namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string result_to_json_line(const RetrievalResult& result,
                                const Graph& graph) {
  // Written by hand so scores keep 17 significant digits.
  std::string out = "{\"qid\":" + json(result.qid).dump() +
                    ",\"rerank_applied\":" +
                    (result.rerank_applied ? "true" : "false") +
                    ",\"ranked\":[";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const RankedEntry& e = result.ranked[i];
    if (i) out += ',';
    out += "{\"node\":" + json(graph.node(e.node).id).dump() +
           ",\"score\":" + number(e.score) +
           ",\"count\":" + std::to_string(e.count) + "}";
  }
  out += "],\"samples\":[";
  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    if (i) out += ',';
    json path = json::array();
    for (NodeIndex n : result.samples[i].path) path.push_back(graph.node(n).id);
    out += "{\"terminal\":" +
           json(graph.node(result.samples[i].terminal()).id).dump() +
           ",\"path\":" + path.dump() + "}";
  }
  out += "]}";
  return out;
}

std::string results_to_jsonl(const std::vector<RetrievalResult>& results,
                             const Graph& graph) {
  std::string out;
  for (const RetrievalResult& r : results) {
    out += result_to_json_line(r, graph);
    out += '\n';
  }
  return out;
}

std::vector<RetrievalResult> parse_results_jsonl(std::string_view content,
                                                 const Graph& graph) {
  std::vector<RetrievalResult> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    const std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw Error(ErrorKind::kParse,
                  "results line " + std::to_string(line_no) + ": bad JSON");
    }
    try {
      RetrievalResult r;
      r.qid = obj.at("qid").get<std::string>();
      r.rerank_applied = obj.at("rerank_applied").get<bool>();
      for (const json& e : obj.at("ranked")) {
        r.ranked.push_back({graph.index_of(e.at("node").get<std::string>()),
                            e.at("score").get<double>(),
                            e.at("count").get<std::size_t>()});
      }
      for (const json& s : obj.at("samples")) {
        SampledPath p;
        for (const json& n : s.at("path")) {
          p.path.push_back(graph.index_of(n.get<std::string>()));
        }
        if (p.path.empty()) {
          throw Error(ErrorKind::kParse, "empty sample path");
        }
        r.samples.push_back(std::move(p));
      }
      out.push_back(std::move(r));
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::kParse, "results line " +
                                         std::to_string(line_no) + ": " +
                                         ex.what());
    }
  }
  return out;
}

}  // namespace graphflow
