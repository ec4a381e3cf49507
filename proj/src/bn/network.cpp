#include "mixtraffic/bn/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mixtraffic/error.hpp"

namespace mixtraffic::bn {

namespace {

constexpr double kRowTolerance = 1e-9;

std::size_t row_count(const std::vector<std::size_t>& radices) {
  std::size_t n = 1;
  for (auto r : radices) n *= r;
  return n;
}

// Mixed-radix decode, first digit most significant.
std::vector<std::size_t> decode(std::size_t code, const std::vector<std::size_t>& radices) {
  std::vector<std::size_t> digits(radices.size());
  for (std::size_t i = radices.size(); i > 0; --i) {
    digits[i - 1] = code % radices[i - 1];
    code /= radices[i - 1];
  }
  return digits;
}

std::string join(const std::vector<std::string>& parts) {
  std::ostringstream out;
  for (std::size_t i = 0; i < parts.size(); ++i) out << (i ? "," : "") << parts[i];
  return out.str();
}

}  // namespace

std::optional<std::size_t> Variable::state_index(std::string_view label) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == label) return i;
  return std::nullopt;
}

BayesianNetwork::BayesianNetwork(std::vector<Variable> variables, std::vector<Cpt> cpts)
    : variables_(std::move(variables)), cpts_(std::move(cpts)) {
  index();
}

void BayesianNetwork::index() {
  structure_ok_ = false;
  cpt_of_var_.assign(variables_.size(), cpts_.size());
  parent_idx_.assign(variables_.size(), {});
  order_.clear();

  std::vector<std::size_t> hits(variables_.size(), 0);
  for (std::size_t c = 0; c < cpts_.size(); ++c) {
    auto v = index_of(cpts_[c].child);
    if (!v) return;
    cpt_of_var_[*v] = c;
    ++hits[*v];
    for (const auto& p : cpts_[c].parents) {
      auto pi = index_of(p);
      if (!pi) return;
      parent_idx_[*v].push_back(*pi);
    }
  }
  if (std::any_of(hits.begin(), hits.end(), [](std::size_t h) { return h != 1; })) return;

  // Kahn's algorithm, always releasing the lowest declared index first.
  std::vector<std::size_t> pending(variables_.size());
  std::vector<std::vector<std::size_t>> children(variables_.size());
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    pending[v] = parent_idx_[v].size();
    for (auto p : parent_idx_[v]) children[p].push_back(v);
  }
  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < variables_.size(); ++v)
    if (pending[v] == 0) ready.insert(v);
  while (!ready.empty()) {
    const auto v = *ready.begin();
    ready.erase(ready.begin());
    order_.push_back(v);
    for (auto c : children[v])
      if (--pending[c] == 0) ready.insert(c);
  }
  if (order_.size() != variables_.size()) {
    order_.clear();
    return;
  }
  structure_ok_ = true;
}

std::optional<std::size_t> BayesianNetwork::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i].name == name) return i;
  return std::nullopt;
}

const Variable& BayesianNetwork::variable(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw std::invalid_argument("unknown variable '" + std::string(name) + "'");
  return variables_[*i];
}

const Cpt& BayesianNetwork::cpt_for(std::string_view child) const {
  auto i = index_of(child);
  if (!i || !structure_ok_)
    throw std::invalid_argument("no CPT for '" + std::string(child) + "'");
  return cpts_[cpt_of_var_[*i]];
}

double BayesianNetwork::conditional(std::size_t var, std::size_t state,
                                    const Assignment& full) const {
  if (!structure_ok_) throw std::invalid_argument("network structure is malformed");
  const auto& cpt = cpts_[cpt_of_var_[var]];
  std::vector<std::size_t> given;
  given.reserve(parent_idx_[var].size());
  for (auto p : parent_idx_[var]) given.push_back(full[p]);
  auto row = cpt.rows.find(given);
  if (row == cpt.rows.end() || state >= row->second.size())
    throw std::invalid_argument("CPT of '" + cpt.child + "' lacks a row for an assignment");
  return row->second[state];
}

BayesianNetwork BayesianNetwork::with_row(std::string_view child,
                                          const std::vector<std::size_t>& given,
                                          std::vector<double> distribution) const {
  BayesianNetwork copy = *this;
  for (auto& cpt : copy.cpts_)
    if (cpt.child == child) cpt.rows[given] = std::move(distribution);
  copy.index();
  return copy;
}

std::vector<Violation> validate(const BayesianNetwork& net) {
  std::vector<Violation> out;
  const auto& vars = net.variables();

  std::set<std::string> names;
  for (const auto& v : vars) {
    if (!names.insert(v.name).second)
      out.push_back({"duplicate variable", "variable '" + v.name + "' declared twice"});
    if (v.states.size() < 2)
      out.push_back({"states", "variable '" + v.name + "' needs at least two states"});
    std::set<std::string> labels(v.states.begin(), v.states.end());
    if (labels.size() != v.states.size())
      out.push_back({"duplicate state", "variable '" + v.name + "' repeats a state label"});
  }

  std::vector<int> cpt_count(vars.size(), 0);
  bool refs_ok = true;
  for (const auto& cpt : net.cpts()) {
    auto child = net.index_of(cpt.child);
    if (!child) {
      out.push_back({"unknown variable", "CPT child '" + cpt.child + "' is not declared"});
      refs_ok = false;
      continue;
    }
    ++cpt_count[*child];
    std::vector<std::size_t> radices;
    bool parents_ok = true;
    for (const auto& p : cpt.parents) {
      auto pi = net.index_of(p);
      if (!pi) {
        out.push_back({"unknown variable",
                       "CPT of '" + cpt.child + "' lists undeclared parent '" + p + "'"});
        parents_ok = refs_ok = false;
      } else {
        radices.push_back(vars[*pi].states.size());
      }
    }
    if (!parents_ok) continue;

    const auto child_states = vars[*child].states.size();
    const auto expected = row_count(radices);
    for (std::size_t code = 0; code < expected; ++code) {
      const auto given = decode(code, radices);
      auto row = cpt.rows.find(given);
      if (row == cpt.rows.end()) {
        out.push_back({"coverage", "CPT of '" + cpt.child + "' has no row for parent combination #" +
                                       std::to_string(code)});
        continue;
      }
      const auto& dist = row->second;
      if (dist.size() != child_states) {
        out.push_back({"row size", "CPT of '" + cpt.child + "' row #" + std::to_string(code) +
                                       " has the wrong number of entries"});
        continue;
      }
      double sum = 0.0;
      for (double p : dist) {
        if (!(p >= 0.0 && p <= 1.0))
          out.push_back({"range", "CPT of '" + cpt.child + "' has an entry outside [0,1]"});
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance)
        out.push_back({"row sum", "CPT of '" + cpt.child + "' row #" + std::to_string(code) +
                                      " sums to " + std::to_string(sum)});
    }
    if (cpt.rows.size() > expected)
      out.push_back({"coverage", "CPT of '" + cpt.child + "' has rows for unknown parent states"});
  }
  for (std::size_t v = 0; v < vars.size(); ++v)
    if (cpt_count[v] != 1)
      out.push_back({"coverage", "variable '" + vars[v].name + "' has " +
                                     std::to_string(cpt_count[v]) + " CPTs (expected 1)"});

  if (refs_ok && net.topological_order().size() != vars.size() &&
      std::all_of(cpt_count.begin(), cpt_count.end(), [](int c) { return c == 1; }))
    out.push_back({"cycle", "parent edges do not form a directed acyclic graph"});
  return out;
}

double joint_probability(const BayesianNetwork& net, const Assignment& full) {
  if (full.size() != net.variables().size())
    throw std::invalid_argument("missing variable: assignment is incomplete");
  double p = 1.0;
  for (std::size_t v = 0; v < full.size() && p != 0.0; ++v)
    p *= net.conditional(v, full[v], full);
  return p;
}

std::vector<std::optional<std::size_t>> resolve_evidence(const BayesianNetwork& net,
                                                         const Evidence& evidence) {
  std::vector<std::optional<std::size_t>> fixed(net.variables().size());
  for (const auto& [name, label] : evidence) {
    auto v = net.index_of(name);
    if (!v) throw std::invalid_argument("unknown variable '" + name + "' in evidence");
    auto s = net.variables()[*v].state_index(label);
    if (!s)
      throw std::invalid_argument("unknown state '" + label + "' of variable '" + name + "'");
    fixed[*v] = *s;
  }
  return fixed;
}

double joint_probability(const BayesianNetwork& net, const Evidence& full) {
  const auto fixed = resolve_evidence(net, full);
  Assignment a(fixed.size());
  for (std::size_t v = 0; v < fixed.size(); ++v) {
    if (!fixed[v])
      throw std::invalid_argument("missing variable '" + net.variables()[v].name + "'");
    a[v] = *fixed[v];
  }
  return joint_probability(net, a);
}

std::vector<double> posterior(const BayesianNetwork& net, std::string_view query,
                              const Evidence& evidence) {
  auto q = net.index_of(query);
  if (!q) throw std::invalid_argument("unknown query variable '" + std::string(query) + "'");
  if (evidence.count(std::string(query)))
    throw std::invalid_argument("query variable '" + std::string(query) + "' is in the evidence");
  const auto fixed = resolve_evidence(net, evidence);
  const auto& vars = net.variables();

  std::vector<std::size_t> free_vars;
  std::vector<std::size_t> radices;
  for (std::size_t v = 0; v < vars.size(); ++v)
    if (v != *q && !fixed[v]) {
      free_vars.push_back(v);
      radices.push_back(vars[v].states.size());
    }

  Assignment a(vars.size(), 0);
  for (std::size_t v = 0; v < vars.size(); ++v)
    if (fixed[v]) a[v] = *fixed[v];

  std::vector<double> dist(vars[*q].states.size(), 0.0);
  const auto combos = row_count(radices);
  for (std::size_t s = 0; s < dist.size(); ++s) {
    a[*q] = s;
    for (std::size_t code = 0; code < combos; ++code) {
      std::size_t rest = code;
      for (std::size_t i = free_vars.size(); i > 0; --i) {
        a[free_vars[i - 1]] = rest % radices[i - 1];
        rest /= radices[i - 1];
      }
      dist[s] += joint_probability(net, a);
    }
  }
  double z = 0.0;
  for (double p : dist) z += p;
  if (!(z > 0.0)) throw std::domain_error("impossible evidence");
  for (double& p : dist) p /= z;
  return dist;
}

Assignment sample(const BayesianNetwork& net, Rng& rng) {
  const auto& order = net.topological_order();
  if (order.size() != net.variables().size())
    throw std::invalid_argument("cannot sample from a malformed network");
  Assignment a(order.size(), 0);
  std::vector<double> weights;
  for (auto v : order) {
    const auto n = net.variables()[v].states.size();
    weights.resize(n);
    for (std::size_t s = 0; s < n; ++s) weights[s] = net.conditional(v, s, a);
    a[v] = rng.categorical(weights);
  }
  return a;
}

BayesianNetwork network_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("network document must be an object");
  for (const auto& [key, value] : doc.items())
    if (key != "variables" && key != "cpts") throw ConfigError("unknown network key '" + key + "'");
  try {
    std::vector<Variable> vars;
    for (const auto& jv : doc.at("variables"))
      vars.push_back({jv.at("name").get<std::string>(),
                      jv.at("states").get<std::vector<std::string>>()});
    auto find_var = [&](const std::string& name) -> const Variable& {
      for (const auto& v : vars)
        if (v.name == name) return v;
      throw ConfigError("unknown variable '" + name + "'");
    };
    auto find_state = [&](const Variable& v, const std::string& label) {
      auto s = v.state_index(label);
      if (!s) throw ConfigError("unknown state '" + label + "' of variable '" + v.name + "'");
      return *s;
    };

    std::vector<Cpt> cpts;
    for (const auto& jc : doc.at("cpts")) {
      Cpt cpt;
      cpt.child = jc.at("child").get<std::string>();
      cpt.parents = jc.value("parents", std::vector<std::string>{});
      const auto& child = find_var(cpt.child);
      for (const auto& jr : jc.at("rows")) {
        std::vector<std::size_t> given;
        const auto& jg = jr.value("given", nlohmann::json::object());
        if (jg.size() != cpt.parents.size())
          throw ConfigError("CPT row of '" + cpt.child + "' must assign exactly its parents (" +
                            join(cpt.parents) + ")");
        for (const auto& p : cpt.parents) {
          if (!jg.contains(p)) throw ConfigError("CPT row of '" + cpt.child + "' misses parent " + p);
          given.push_back(find_state(find_var(p), jg.at(p).get<std::string>()));
        }
        std::vector<double> dist(child.states.size(), 0.0);
        std::vector<bool> seen(child.states.size(), false);
        for (const auto& [label, value] : jr.at("p").items()) {
          const auto s = find_state(child, label);
          dist[s] = value.get<double>();
          seen[s] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
          throw ConfigError("CPT row of '" + cpt.child + "' must give every child state");
        if (!cpt.rows.emplace(std::move(given), std::move(dist)).second)
          throw ConfigError("CPT of '" + cpt.child + "' repeats a row");
      }
      cpts.push_back(std::move(cpt));
    }
    return BayesianNetwork(std::move(vars), std::move(cpts));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network document: ") + e.what());
  }
}

nlohmann::json network_to_json(const BayesianNetwork& net) {
  nlohmann::json doc;
  doc["variables"] = nlohmann::json::array();
  for (const auto& v : net.variables())
    doc["variables"].push_back({{"name", v.name}, {"states", v.states}});
  doc["cpts"] = nlohmann::json::array();
  for (const auto& cpt : net.cpts()) {
    nlohmann::json jc{{"child", cpt.child}, {"parents", cpt.parents}, {"rows", nlohmann::json::array()}};
    const auto& child = net.variable(cpt.child);
    for (const auto& [given, dist] : cpt.rows) {
      nlohmann::json jg = nlohmann::json::object();
      for (std::size_t i = 0; i < cpt.parents.size(); ++i)
        jg[cpt.parents[i]] = net.variable(cpt.parents[i]).states.at(given[i]);
      nlohmann::json jp = nlohmann::json::object();
      for (std::size_t s = 0; s < dist.size(); ++s) jp[child.states.at(s)] = dist[s];
      jc["rows"].push_back({{"given", jg}, {"p", jp}});
    }
    doc["cpts"].push_back(std::move(jc));
  }
  return doc;
}

}  // namespace mixtraffic::bn
