#include <doctest.h>

#include <algorithm>
#include <random>

#include "cssl/causal_graph.hpp"
#include "cssl/error.hpp"
#include "cssl/synthetic.hpp"

using namespace cssl;

namespace {

Node feat(const std::string& id) { return {id, NodeKind::Feature, 1, {}}; }
Node lab(const std::string& id) { return {id, NodeKind::Label, 1, {}}; }

// X1 -> Y -> X4 <- {X2, X5}; X3 -> X1, X4 -> X6.
CausalGraph blanket_example() {
  return build_graph({lab("Y"), feat("X1"), feat("X2"), feat("X3"), feat("X4"), feat("X5"), feat("X6")},
                     {{"X1", "Y"}, {"Y", "X4"}, {"X2", "X4"}, {"X5", "X4"}, {"X3", "X1"}, {"X4", "X6"}}, "Y");
}

std::vector<std::string> listing(const FactorPlan& p, const std::string& label) {
  std::vector<std::string> out;
  for (const auto& e : p.entries) out.push_back(std::string(1, to_char(e.scenario)) + " " + e.describe(label));
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("build_graph validation") {
  CHECK(build_graph({lab("Y"), feat("X1")}, {{"X1", "Y"}}, "Y").nodes().size() == 2);
  CHECK(code_of([] { build_graph({lab("Y"), feat("A"), feat("B")}, {{"A", "B"}, {"B", "A"}}, "Y"); }) ==
        ErrorCode::CycleDetected);
  CHECK(code_of([] { build_graph({lab("Y"), lab("Z")}, {}, "Y"); }) == ErrorCode::MultipleLabels);
  CHECK(code_of([] { build_graph({lab("Y")}, {{"Q", "Y"}}, "Y"); }) == ErrorCode::UnknownNode);
  CHECK(code_of([] { build_graph({lab("Y"), feat("Y")}, {}, "Y"); }) == ErrorCode::DuplicateNode);
  CHECK(code_of([] { build_graph({lab("Y")}, {{"Y", "Y"}}, "Y"); }) == ErrorCode::CycleDetected);
  CHECK(code_of([] { build_graph({lab("Y"), feat("A")}, {{"A", "Y"}, {"A", "Y"}}, "Y"); }) == ErrorCode::InvalidEdge);
  CHECK(blanket_example().nodes().size() == 7);
}

TEST_CASE("markov blanket") {
  CHECK(markov_blanket(blanket_example()) == std::set<std::string>{"X1", "X2", "X4", "X5"});
  CHECK(markov_blanket(build_graph({lab("Y"), feat("A")}, {}, "Y")).empty());
  auto chain = build_graph({lab("Y"), feat("X1"), feat("X2"), feat("X3")}, {{"X1", "Y"}, {"Y", "X2"}, {"X3", "X2"}}, "Y");
  CHECK(markov_blanket(chain) == std::set<std::string>{"X1", "X2", "X3"});
}

TEST_CASE("roles") {
  auto r = assign_roles(benchmark_graph(BenchmarkGraph::CG6));
  CHECK(r.at("X_C") == Role::Cause);
  CHECK(r.at("X_E") == Role::Effect);
  CHECK(r.at("X_S") == Role::Spouse);
  auto f = assign_roles(blanket_example());
  CHECK(f.at("X3") == Role::Outside);
  CHECK(f.at("X6") == Role::Outside);
  CHECK(assign_roles(build_graph({lab("Y"), feat("X1")}, {{"Y", "X1"}}, "Y")).at("X1") == Role::Effect);
}

TEST_CASE("topological order") {
  CHECK(topological_order(benchmark_graph(BenchmarkGraph::CG3)) == std::vector<std::string>{"X_C", "Y", "X_E"});
  auto cg4 = topological_order(benchmark_graph(BenchmarkGraph::CG4));
  CHECK(cg4.back() == "X_E");
  CHECK(topological_order(build_graph({lab("Y"), feat("B"), feat("A")}, {}, "Y")) ==
        std::vector<std::string>{"A", "B", "Y"});
}

TEST_CASE("disjoint plan examples") {
  using V = std::vector<std::string>;
  CHECK(listing(classify_disjoint(benchmark_graph(BenchmarkGraph::CG4)), "Y") ==
        V{"C P(X_S)", "A P(Y)", "E P(X_E|Y,X_S)"});
  CHECK(listing(classify_disjoint(benchmark_graph(BenchmarkGraph::CG1)), "Y") == V{"C P(X_C)", "B P(Y|X_C)"});
  CHECK(listing(classify_disjoint(benchmark_graph(BenchmarkGraph::CG7)), "Y") ==
        V{"C P(X_C)", "C P(X_S)", "B P(Y|X_C)", "E P(X_E|Y,X_S)"});
  auto d = build_graph({lab("Y"), feat("A"), feat("B")}, {{"A", "B"}}, "Y");
  CHECK(listing(classify_disjoint(d), "Y") == V{"C P(A)", "D P(B|A)", "A P(Y)"});
}

TEST_CASE("joint plan examples") {
  using V = std::vector<std::string>;
  CHECK(listing(classify_joint(benchmark_graph(BenchmarkGraph::CG5)), "Y") ==
        V{"C P(X_C)", "F P(X_E|Y,X_C)P(Y|X_C)"});
  auto cg2 = classify_joint(benchmark_graph(BenchmarkGraph::CG2));
  CHECK(cg2.same_as_disjoint);
  CHECK(listing(cg2, "Y") == V{"A P(Y)", "E P(X_E|Y)"});
  CHECK(listing(classify_joint(benchmark_graph(BenchmarkGraph::CG3)), "Y") == V{"C P(X_C)", "F P(X_E|Y)P(Y|X_C)"});
  CHECK_FALSE(classify_joint(benchmark_graph(BenchmarkGraph::CG3)).same_as_disjoint);
}

TEST_CASE("graph json round trip") {
  auto g = blanket_example();
  auto back = graph_from_json(graph_to_json(g));
  CHECK(back.edges().size() == g.edges().size());
  CHECK(classify_disjoint(back).entries == classify_disjoint(g).entries);
}

// Random DAGs: nodes ordered by index, edges only forward.
TEST_CASE("plan and blanket properties on random graphs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 9);
    const int y = static_cast<int>(rng() % n);
    std::vector<Node> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back(i == y ? lab("V" + std::to_string(i)) : feat("V" + std::to_string(i)));
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng() % 3 == 0) edges.emplace_back("V" + std::to_string(i), "V" + std::to_string(j));
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const std::string label = "V" + std::to_string(y);
    auto g = build_graph(nodes, edges, label);

    std::set<std::string> brute;
    for (const auto& [a, b] : edges) {
      if (b == label) brute.insert(a);
      if (a == label) brute.insert(b);
    }
    for (const auto& [a, b] : edges)
      if (a != label && std::find(edges.begin(), edges.end(), Edge{label, b}) != edges.end()) brute.insert(a);
    CHECK(markov_blanket(g) == brute);

    const auto order = topological_order(g);
    REQUIRE(order.size() == static_cast<std::size_t>(n));
    auto pos = [&](const std::string& id) { return std::find(order.begin(), order.end(), id) - order.begin(); };
    for (const auto& [a, b] : edges) CHECK(pos(a) < pos(b));

    const auto dis = classify_disjoint(g);
    const auto joint = classify_joint(g);
    for (const auto* plan : {&dis, &joint}) {
      std::multiset<std::string> covered;
      long last = -1;
      for (const auto& e : plan->entries) {
        for (const auto& t : e.targets()) covered.insert(t);
        const long p = pos(e.factors.front().target);
        CHECK(p > last);
        last = p;
      }
      CHECK(covered.size() == static_cast<std::size_t>(n));
      CHECK(std::set<std::string>(covered.begin(), covered.end()).size() == static_cast<std::size_t>(n));
    }
    for (const auto& e : dis.entries) CHECK(e.scenario != Scenario::F);
    if (dis.has_scenario(Scenario::B) && dis.has_scenario(Scenario::E)) {
      int f = 0;
      for (const auto& e : joint.entries) {
        CHECK(e.scenario != Scenario::B);
        CHECK(e.scenario != Scenario::E);
        f += e.scenario == Scenario::F;
      }
      CHECK(f == 1);
    }
    if (!(dis.has_scenario(Scenario::B) && dis.has_scenario(Scenario::E))) {
      CHECK(joint.same_as_disjoint);
      CHECK(joint.entries == dis.entries);
    }
  }
}
