#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cssl {

enum class NodeKind { Feature, Label };

/// A graph vertex. `dim` is the width of the variable's value block; `columns`
/// optionally names the source table columns backing it (real data).
struct Node {
  std::string id;
  NodeKind kind = NodeKind::Feature;
  int dim = 1;
  std::vector<std::string> columns;

  [[nodiscard]] std::vector<std::string> column_names() const;
};

using Edge = std::pair<std::string, std::string>;

/// Validated DAG over named variables with exactly one label node.
/// Immutable after construction; all neighbour queries return ids in
/// lexicographic order.
class CausalGraph {
 public:
  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
  [[nodiscard]] const std::string& label() const noexcept { return label_; }

  [[nodiscard]] bool has_node(const std::string& id) const { return index_.count(id) != 0; }
  [[nodiscard]] const Node& node(const std::string& id) const;
  [[nodiscard]] bool has_edge(const std::string& from, const std::string& to) const;
  [[nodiscard]] const std::vector<std::string>& parents(const std::string& id) const;
  [[nodiscard]] const std::vector<std::string>& children(const std::string& id) const;
  [[nodiscard]] bool is_root(const std::string& id) const { return parents(id).empty(); }

  friend CausalGraph build_graph(std::vector<Node> nodes, std::vector<Edge> edges,
                                 const std::string& label_id);

 private:
  CausalGraph() = default;

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::string label_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::string>> parents_;
  std::map<std::string, std::vector<std::string>> children_;
};

/// Throws Error{UnknownNode | DuplicateNode | InvalidEdge | MultipleLabels | CycleDetected}.
/// `label_id` must name the unique node of kind Label; nodes listed with kind
/// Feature but matching `label_id` are promoted to Label.
CausalGraph build_graph(std::vector<Node> nodes, std::vector<Edge> edges,
                        const std::string& label_id);

std::set<std::string> markov_blanket(const CausalGraph& g);

enum class Role { Cause, Effect, Spouse, Outside };

std::string_view to_string(Role role);

/// Role of every feature node relative to the label (label itself omitted).
using RoleAssignment = std::map<std::string, Role>;

RoleAssignment assign_roles(const CausalGraph& g);

/// Kahn's algorithm with a lexicographic ready-queue.
std::vector<std::string> topological_order(const CausalGraph& g);

enum class Scenario { A, B, C, D, E, F };
enum class PlanMode { Disjoint, Joint };

char to_char(Scenario s);
std::string_view to_string(PlanMode mode);

/// One conditional P(target | parents).
struct Factor {
  std::string target;
  std::vector<std::string> parents;

  friend bool operator==(const Factor&, const Factor&) = default;
};

/// A modelling unit. Usually one factor; a merged root block (scenario C over
/// several roots) or a joint label/effect unit (scenario F, label factor first)
/// carries several.
struct FactorEntry {
  Scenario scenario = Scenario::C;
  std::vector<Factor> factors;

  [[nodiscard]] std::vector<std::string> targets() const;
  [[nodiscard]] bool covers(const std::string& id) const;
  /// Rendering such as "P(X_E|Y,X_S)P(Y|X_C)".
  [[nodiscard]] std::string describe(const std::string& label) const;

  friend bool operator==(const FactorEntry&, const FactorEntry&) = default;
};

struct FactorPlan {
  PlanMode mode = PlanMode::Disjoint;
  std::vector<FactorEntry> entries;
  std::vector<std::string> order;
  /// Joint plans only: true when no B/E pair existed and the plan equals the disjoint one.
  bool same_as_disjoint = false;

  [[nodiscard]] const FactorEntry* entry_for(const std::string& id) const;
  [[nodiscard]] bool has_scenario(Scenario s) const;
};

FactorPlan classify_disjoint(const CausalGraph& g);
FactorPlan classify_joint(const CausalGraph& g);

/// Graph description file: {"nodes":[{"id","kind","dim"[, "columns"]}], "edges":[[src,dst]], "label"}.
CausalGraph graph_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const CausalGraph& g);
CausalGraph load_graph_file(const std::string& path);

/// Render a plan entry list as a json array of {"scenario", "factor"}.
nlohmann::json plan_to_json(const FactorPlan& plan, const std::string& label);

}  // namespace cssl
