#include "cssl/causal_graph.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <queue>

#include "cssl/error.hpp"

namespace cssl {

std::vector<std::string> Node::column_names() const {
  if (!columns.empty()) return columns;
  if (dim == 1) return {id};
  std::vector<std::string> out;
  for (int k = 0; k < dim; ++k) out.push_back(id + "_" + std::to_string(k));
  return out;
}

const Node& CausalGraph::node(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownNode, id);
  return nodes_[it->second];
}

bool CausalGraph::has_edge(const std::string& from, const std::string& to) const {
  const auto& ch = children(from);
  return std::binary_search(ch.begin(), ch.end(), to);
}

const std::vector<std::string>& CausalGraph::parents(const std::string& id) const {
  auto it = parents_.find(id);
  if (it == parents_.end()) throw Error(ErrorCode::UnknownNode, id);
  return it->second;
}

const std::vector<std::string>& CausalGraph::children(const std::string& id) const {
  auto it = children_.find(id);
  if (it == children_.end()) throw Error(ErrorCode::UnknownNode, id);
  return it->second;
}

CausalGraph build_graph(std::vector<Node> nodes, std::vector<Edge> edges,
                        const std::string& label_id) {
  CausalGraph g;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& n = nodes[i];
    if (n.id.empty()) throw Error(ErrorCode::InvalidEdge, "empty node id");
    if (n.dim < 1) throw Error(ErrorCode::InvalidDims, "node " + n.id + " has dim < 1");
    if (!n.columns.empty() && static_cast<int>(n.columns.size()) != n.dim)
      throw Error(ErrorCode::InvalidDims, "node " + n.id + " column count differs from dim");
    if (!g.index_.emplace(n.id, i).second) throw Error(ErrorCode::DuplicateNode, n.id);
    if (n.id == label_id) n.kind = NodeKind::Label;
  }
  if (!g.index_.count(label_id)) throw Error(ErrorCode::UnknownNode, "label " + label_id);
  const auto labels = std::count_if(nodes.begin(), nodes.end(),
                                    [](const Node& n) { return n.kind == NodeKind::Label; });
  if (labels != 1)
    throw Error(ErrorCode::MultipleLabels, std::to_string(labels) + " label nodes declared");

  for (const auto& n : nodes) {
    g.parents_[n.id];
    g.children_[n.id];
  }
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& [from, to] = edges[i];
    if (!g.index_.count(from)) throw Error(ErrorCode::UnknownNode, from);
    if (!g.index_.count(to)) throw Error(ErrorCode::UnknownNode, to);
    if (from == to) throw Error(ErrorCode::CycleDetected, "self-loop on " + from);
    if (i > 0 && edges[i - 1] == edges[i])
      throw Error(ErrorCode::InvalidEdge, "duplicate edge " + from + "->" + to);
    g.parents_[to].push_back(from);
    g.children_[from].push_back(to);
  }
  for (auto& [_, v] : g.parents_) std::sort(v.begin(), v.end());
  for (auto& [_, v] : g.children_) std::sort(v.begin(), v.end());

  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  g.label_ = label_id;
  // Cycle check: a topological sort must consume every node.
  std::map<std::string, std::size_t> indegree;
  for (const auto& n : g.nodes_) indegree[n.id] = g.parents_[n.id].size();
  std::vector<std::string> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push_back(id);
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto id = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& c : g.children_[id])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  if (seen != g.nodes_.size()) throw Error(ErrorCode::CycleDetected, "graph contains a directed cycle");
  return g;
}

std::set<std::string> markov_blanket(const CausalGraph& g) {
  const auto& y = g.label();
  std::set<std::string> mb(g.parents(y).begin(), g.parents(y).end());
  for (const auto& child : g.children(y)) {
    mb.insert(child);
    for (const auto& co_parent : g.parents(child)) mb.insert(co_parent);
  }
  mb.erase(y);
  return mb;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Cause: return "cause";
    case Role::Effect: return "effect";
    case Role::Spouse: return "spouse";
    case Role::Outside: return "outside";
  }
  return "?";
}

RoleAssignment assign_roles(const CausalGraph& g) {
  const auto& y = g.label();
  const auto mb = markov_blanket(g);
  RoleAssignment roles;
  for (const auto& n : g.nodes()) {
    if (n.id == y) continue;
    if (g.has_edge(n.id, y))
      roles[n.id] = Role::Cause;
    else if (g.has_edge(y, n.id))
      roles[n.id] = Role::Effect;
    else if (mb.count(n.id))
      roles[n.id] = Role::Spouse;
    else
      roles[n.id] = Role::Outside;
  }
  return roles;
}

std::vector<std::string> topological_order(const CausalGraph& g) {
  std::map<std::string, std::size_t> indegree;
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& n : g.nodes()) {
    indegree[n.id] = g.parents(n.id).size();
    if (indegree[n.id] == 0) ready.push(n.id);
  }
  std::vector<std::string> order;
  order.reserve(g.nodes().size());
  while (!ready.empty()) {
    auto id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& c : g.children(id))
      if (--indegree[c] == 0) ready.push(c);
  }
  return order;
}

char to_char(Scenario s) { return static_cast<char>('A' + static_cast<int>(s)); }

std::string_view to_string(PlanMode mode) {
  return mode == PlanMode::Disjoint ? "disjoint" : "joint";
}

std::vector<std::string> FactorEntry::targets() const {
  std::vector<std::string> out;
  for (const auto& f : factors) out.push_back(f.target);
  return out;
}

bool FactorEntry::covers(const std::string& id) const {
  return std::any_of(factors.begin(), factors.end(),
                     [&](const Factor& f) { return f.target == id; });
}

namespace {

std::string render_conditional(const Factor& f, const std::string& label) {
  std::string s = "P(" + f.target;
  std::vector<std::string> given;
  // Label first, then features lexicographically: P(X|Y,...).
  for (const auto& p : f.parents)
    if (p == label) given.push_back(p);
  for (const auto& p : f.parents)
    if (p != label) given.push_back(p);
  for (std::size_t i = 0; i < given.size(); ++i) s += (i == 0 ? "|" : ",") + given[i];
  return s + ")";
}

}  // namespace

std::string FactorEntry::describe(const std::string& label) const {
  if (scenario == Scenario::C && factors.size() > 1) {
    std::string s = "P(";
    for (std::size_t i = 0; i < factors.size(); ++i) s += (i ? "," : "") + factors[i].target;
    return s + ")";
  }
  std::string s;
  for (std::size_t i = 1; i < factors.size(); ++i) s += render_conditional(factors[i], label);
  return s + render_conditional(factors.front(), label);
}

const FactorEntry* FactorPlan::entry_for(const std::string& id) const {
  for (const auto& e : entries)
    if (e.covers(id)) return &e;
  return nullptr;
}

bool FactorPlan::has_scenario(Scenario s) const {
  return std::any_of(entries.begin(), entries.end(),
                     [s](const FactorEntry& e) { return e.scenario == s; });
}

FactorPlan classify_disjoint(const CausalGraph& g) {
  FactorPlan plan;
  plan.mode = PlanMode::Disjoint;
  plan.order = topological_order(g);
  const auto& y = g.label();
  for (const auto& v : plan.order) {
    const auto& pa = g.parents(v);
    Scenario s;
    if (v == y)
      s = pa.empty() ? Scenario::A : Scenario::B;
    else if (pa.empty())
      s = Scenario::C;
    else if (std::binary_search(pa.begin(), pa.end(), y))
      s = Scenario::E;
    else
      s = Scenario::D;
    plan.entries.push_back({s, {{v, pa}}});
  }
  return plan;
}

FactorPlan classify_joint(const CausalGraph& g) {
  FactorPlan plan = classify_disjoint(g);
  plan.mode = PlanMode::Joint;
  if (!plan.has_scenario(Scenario::B) || !plan.has_scenario(Scenario::E)) {
    plan.same_as_disjoint = true;
    return plan;
  }
  std::vector<FactorEntry> merged;
  FactorEntry joint{Scenario::F, {}};
  std::size_t joint_slot = 0;
  for (const auto& e : plan.entries) {
    if (e.scenario == Scenario::B) {
      joint.factors.insert(joint.factors.begin(), e.factors.front());
      joint_slot = merged.size();
    } else if (e.scenario == Scenario::E) {
      joint.factors.push_back(e.factors.front());
    } else {
      merged.push_back(e);
    }
  }
  merged.insert(merged.begin() + static_cast<std::ptrdiff_t>(joint_slot), std::move(joint));
  plan.entries = std::move(merged);
  return plan;
}

CausalGraph graph_from_json(const nlohmann::json& j) {
  try {
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<std::string>();
      const auto kind = jn.value("kind", std::string("feature"));
      if (kind != "feature" && kind != "label")
        throw Error(ErrorCode::ParseError, "node kind must be feature|label, got " + kind);
      n.kind = kind == "label" ? NodeKind::Label : NodeKind::Feature;
      n.dim = jn.value("dim", 1);
      if (jn.contains("columns")) n.columns = jn.at("columns").get<std::vector<std::string>>();
      nodes.push_back(std::move(n));
    }
    std::vector<Edge> edges;
    for (const auto& je : j.at("edges")) {
      if (!je.is_array() || je.size() != 2) throw Error(ErrorCode::ParseError, "edge must be [src,dst]");
      edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
    }
    return build_graph(std::move(nodes), std::move(edges), j.at("label").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

nlohmann::json graph_to_json(const CausalGraph& g) {
  nlohmann::json j;
  j["label"] = g.label();
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : g.nodes()) {
    nlohmann::json jn{{"id", n.id},
                      {"kind", n.kind == NodeKind::Label ? "label" : "feature"},
                      {"dim", n.dim}};
    if (!n.columns.empty()) jn["columns"] = n.columns;
    j["nodes"].push_back(std::move(jn));
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) j["edges"].push_back({a, b});
  return j;
}

CausalGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open graph file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return graph_from_json(j);
}

nlohmann::json plan_to_json(const FactorPlan& plan, const std::string& label) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : plan.entries)
    arr.push_back({{"scenario", std::string(1, to_char(e.scenario))}, {"factor", e.describe(label)}});
  return arr;
}

}  // namespace cssl
