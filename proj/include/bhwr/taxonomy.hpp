#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bhwr/vocabulary.hpp"

namespace bhwr {

// Parent/child maps over the word index set. Edges point child -> parent and
// the graph must be acyclic. Both directions are stored and kept transposed.
struct Taxonomy {
  std::vector<std::vector<std::uint32_t>> parents;   // parents[i] sorted ascending
  std::vector<std::vector<std::uint32_t>> children;  // children[i] sorted ascending

  std::size_t size() const { return parents.size(); }

  bool empty() const {
    for (const auto& p : parents) {
      if (!p.empty()) return false;
    }
    return true;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& p : parents) n += p.size();
    return n;
  }
};

enum class OovPolicy {
  extend_vocab,  // append unseen endpoint words with count 0
  drop_edge,     // discard edges touching unseen words, counting them
};

namespace detail {

// Walks child->parent edges from `start` until it revisits a node, then
// renders the cycle for the error message.
inline std::string describe_cycle(const Taxonomy& tax, const Vocabulary& vocab,
                                  std::uint32_t start) {
  std::vector<std::uint32_t> path;
  std::vector<int> state(tax.size(), 0);
  std::uint32_t node = start;
  while (state[node] == 0) {
    state[node] = 1;
    path.push_back(node);
    bool advanced = false;
    for (std::uint32_t p : tax.parents[node]) {
      if (state[p] != 2) {
        node = p;
        advanced = true;
        break;
      }
    }
    if (!advanced) {
      for (std::uint32_t n : path) state[n] = 2;
      return "";
    }
  }
  auto it = std::find(path.begin(), path.end(), node);
  std::ostringstream msg;
  for (; it != path.end(); ++it) {
    msg << vocab.words[*it] << " -> ";
  }
  msg << vocab.words[node];
  return msg.str();
}

}  // namespace detail

// Order in which every word appears before all of its parents (children
// first), ties broken by ascending index. Throws if the graph has a cycle.
inline std::vector<std::uint32_t> child_first_order(const Taxonomy& tax) {
  const std::size_t n = tax.size();
  std::vector<std::size_t> pending(n);
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>,
                      std::greater<>> ready;
  for (std::uint32_t i = 0; i < n; ++i) {
    pending[i] = tax.children[i].size();
    if (pending[i] == 0) ready.push(i);
  }
  std::vector<std::uint32_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::uint32_t node = ready.top();
    ready.pop();
    order.push_back(node);
    for (std::uint32_t parent : tax.parents[node]) {
      if (--pending[parent] == 0) ready.push(parent);
    }
  }
  if (order.size() != n) {
    throw std::runtime_error("taxonomy contains a cycle");
  }
  return order;
}

// Builds the taxonomy from (child word, parent word) edges. Under
// extend_vocab, endpoints missing from the vocabulary are appended with count
// zero and receive full model factors; under drop_edge such edges are
// discarded and counted in *dropped_edges. Duplicate edges deduplicate.
inline Taxonomy load_taxonomy(
    const std::vector<std::pair<std::string, std::string>>& edges,
    Vocabulary& vocab, OovPolicy policy = OovPolicy::extend_vocab,
    std::uint64_t* dropped_edges = nullptr) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set;
  std::uint64_t dropped = 0;
  for (const auto& [child_word, parent_word] : edges) {
    if (child_word == parent_word) {
      throw std::runtime_error("taxonomy self-edge: " + child_word);
    }
    std::int64_t child = vocab.find(child_word);
    std::int64_t parent = vocab.find(parent_word);
    if (child < 0 || parent < 0) {
      if (policy == OovPolicy::drop_edge) {
        ++dropped;
        continue;
      }
      if (child < 0) child = vocab.append(child_word);
      if (parent < 0) parent = vocab.append(parent_word);
    }
    edge_set.emplace(static_cast<std::uint32_t>(child),
                     static_cast<std::uint32_t>(parent));
  }
  if (dropped_edges) *dropped_edges = dropped;

  Taxonomy tax;
  tax.parents.resize(vocab.size());
  tax.children.resize(vocab.size());
  for (const auto& [child, parent] : edge_set) {
    tax.parents[child].push_back(parent);
    tax.children[parent].push_back(child);
  }
  for (auto& v : tax.parents) std::sort(v.begin(), v.end());
  for (auto& v : tax.children) std::sort(v.begin(), v.end());

  // Cycle check; name one concrete cycle in the error.
  std::vector<std::size_t> pending(tax.size());
  std::queue<std::uint32_t> ready;
  std::size_t seen = 0;
  for (std::uint32_t i = 0; i < tax.size(); ++i) {
    pending[i] = tax.children[i].size();
    if (pending[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const std::uint32_t node = ready.front();
    ready.pop();
    ++seen;
    for (std::uint32_t parent : tax.parents[node]) {
      if (--pending[parent] == 0) ready.push(parent);
    }
  }
  if (seen != tax.size()) {
    for (std::uint32_t i = 0; i < tax.size(); ++i) {
      if (pending[i] > 0) {
        const std::string cycle = detail::describe_cycle(tax, vocab, i);
        if (!cycle.empty()) {
          throw std::runtime_error("taxonomy cycle: " + cycle);
        }
      }
    }
    throw std::runtime_error("taxonomy contains a cycle");
  }
  return tax;
}

// Empty hierarchy over `n` words; every parent set is empty. Training with
// this taxonomy is the taxonomy-free Bayesian skip-gram configuration.
inline Taxonomy empty_taxonomy(std::size_t n) {
  Taxonomy tax;
  tax.parents.resize(n);
  tax.children.resize(n);
  return tax;
}

// Reads `child<TAB>parent` lines; '#' lines and blank lines are ignored.
inline std::vector<std::pair<std::string, std::string>> read_taxonomy_edges(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open taxonomy file: " + path);
  }
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw std::runtime_error("taxonomy file " + path + " line " +
                               std::to_string(line_no) +
                               ": expected child<TAB>parent");
    }
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return edges;
}

// Mean of the parents' factor means, or zero when the word has no parents.
// `mean_at(n)` must yield the mean vector of factor n in the chosen family.
template <typename MeanAt>
Eigen::VectorXd prior_mean(const Taxonomy& tax, std::uint32_t i, int dim,
                           MeanAt&& mean_at) {
  const auto& parents = tax.parents[i];
  Eigen::VectorXd s = Eigen::VectorXd::Zero(dim);
  if (parents.empty()) {
    return s;
  }
  for (std::uint32_t n : parents) {
    s += mean_at(n);
  }
  return s / static_cast<double>(parents.size());
}

}  // namespace bhwr
