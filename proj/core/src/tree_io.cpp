#include "bekrep/tree.hpp"

#include <json.hpp>

namespace bekrep {

std::string tree_to_json(const ScenarioTree& tree) {
  nlohmann::ordered_json j;
  j["grid"] = {{"T", tree.grid().horizon}, {"N", tree.grid().steps}};
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : tree.nodes()) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["t"] = n.t;
    if (n.parent < 0)
      jn["parent"] = nullptr;
    else
      jn["parent"] = n.parent;
    jn["children"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n.children.size(); ++i)
      jn["children"].push_back({{"id", n.children[i]}, {"p", n.prob[i]}});
    j["nodes"].push_back(std::move(jn));
  }
  nlohmann::ordered_json atoms = nlohmann::ordered_json::object();
  for (int leaf : tree.leaves())
    atoms[std::to_string(leaf)] = tree.atom_of_leaf(leaf);
  j["atoms"] = std::move(atoms);
  return j.dump(2);
}

ScenarioTree tree_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TimeGrid grid;
  grid.horizon = j.at("grid").at("T").get<double>();
  grid.steps = j.at("grid").at("N").get<int>();
  std::vector<TreeNode> nodes;
  for (const auto& jn : j.at("nodes")) {
    TreeNode n;
    n.id = jn.at("id").get<int>();
    n.t = jn.at("t").get<int>();
    n.parent = jn.at("parent").is_null() ? -1 : jn.at("parent").get<int>();
    for (const auto& jc : jn.at("children")) {
      n.children.push_back(jc.at("id").get<int>());
      n.prob.push_back(jc.at("p").get<double>());
    }
    nodes.push_back(std::move(n));
  }
  std::map<int, int> atoms;
  if (j.contains("atoms")) {
    for (auto it = j["atoms"].begin(); it != j["atoms"].end(); ++it)
      atoms[std::stoi(it.key())] = it.value().get<int>();
  }
  return ScenarioTree(grid, std::move(nodes), std::move(atoms));
}

}  // namespace bekrep
