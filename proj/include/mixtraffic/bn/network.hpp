#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mixtraffic/random.hpp"

namespace mixtraffic::bn {

struct Variable {
  std::string name;
  std::vector<std::string> states;

  std::optional<std::size_t> state_index(std::string_view label) const;
};

/// Conditional probability table of `child` given `parents`.
/// Rows are keyed by the parents' state indices, in `parents` order.
struct Cpt {
  std::string child;
  std::vector<std::string> parents;
  std::map<std::vector<std::size_t>, std::vector<double>> rows;
};

/// Complete assignment: one state index per variable, in declaration order.
using Assignment = std::vector<std::size_t>;

/// Partial assignment by name: variable -> state label.
using Evidence = std::map<std::string, std::string>;

struct Violation {
  std::string kind;  // "cycle", "row sum", "coverage", "range", "unknown variable", ...
  std::string message;
};

/// Discrete Bayesian network. Holds arbitrary (possibly invalid) content;
/// run validate() before using the inference operations, which assume a
/// well-formed network and throw std::invalid_argument otherwise.
class BayesianNetwork {
 public:
  BayesianNetwork() = default;
  BayesianNetwork(std::vector<Variable> variables, std::vector<Cpt> cpts);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Cpt>& cpts() const { return cpts_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  const Variable& variable(std::string_view name) const;
  const Cpt& cpt_for(std::string_view child) const;

  /// P(child = state | parents = given), all by index.
  double conditional(std::size_t var, std::size_t state, const Assignment& full) const;

  /// Variable indices with every parent ahead of its children. Ties keep
  /// declaration order. Throws if the parent graph has a cycle.
  const std::vector<std::size_t>& topological_order() const { return order_; }

  /// Returns a copy with one CPT row replaced (used by tests and fitting).
  BayesianNetwork with_row(std::string_view child, const std::vector<std::size_t>& given,
                           std::vector<double> distribution) const;

 private:
  void index();

  std::vector<Variable> variables_;
  std::vector<Cpt> cpts_;
  // Resolved after construction; empty when the structure is malformed.
  std::vector<std::size_t> cpt_of_var_;
  std::vector<std::vector<std::size_t>> parent_idx_;
  std::vector<std::size_t> order_;
  bool structure_ok_ = false;
};

std::vector<Violation> validate(const BayesianNetwork& net);
inline bool is_valid(const BayesianNetwork& net) { return validate(net).empty(); }

/// Product of the CPT entries selected by a complete assignment.
double joint_probability(const BayesianNetwork& net, const Assignment& full);
/// Name-based variant. Throws std::invalid_argument("missing variable ...")
/// when the assignment does not cover every variable.
double joint_probability(const BayesianNetwork& net, const Evidence& full);

/// Exact marginal of `query` given evidence, by enumeration of the joint.
/// Throws std::domain_error("impossible evidence") when P(evidence) = 0.
std::vector<double> posterior(const BayesianNetwork& net, std::string_view query,
                              const Evidence& evidence);

/// Ancestral sample in topological order.
Assignment sample(const BayesianNetwork& net, Rng& rng);

/// Converts (and checks) a name-based evidence map into per-variable indices.
std::vector<std::optional<std::size_t>> resolve_evidence(const BayesianNetwork& net,
                                                         const Evidence& evidence);

BayesianNetwork network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const BayesianNetwork& net);

}  // namespace mixtraffic::bn
