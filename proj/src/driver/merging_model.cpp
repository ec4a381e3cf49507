#include "mixtraffic/driver/merging_model.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mixtraffic/error.hpp"

namespace mixtraffic::driver {

namespace {

// Declaration order of the network; parents come first.
constexpr std::size_t kTlIdx = 0, kIpIdx = 1, kGIdx = 2, kMIdx = 3;

std::vector<double> bernoulli_row(double p_first) { return {p_first, 1.0 - p_first}; }

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(what + " must lie in [0,1]");
}

const char* tl_key(int tl) { return tl == 0 ? "t" : "f"; }
const char* ip_key(int ip) { return ip == 0 ? "AV" : "H"; }
const char* g_key(int g) { return g == 0 ? "M" : "F"; }

}  // namespace

MergingParams MergingParams::defaults() {
  MergingParams p;
  // Short-gap acceptance of male drivers under time pressure: 0.97 facing an
  // HAV, 0.37 facing a human driver. The remaining six entries are calibrated:
  // marginal merge rate ~0.55, preference for the HAV reverses under time
  // pressure, and the evidence masks rank as in the model-selection study.
  p.set_merge_probability(true, Partner::AV, Gender::Male, 0.97);
  p.set_merge_probability(true, Partner::Human, Gender::Male, 0.37);
  p.set_merge_probability(true, Partner::AV, Gender::Female, 0.80);
  p.set_merge_probability(true, Partner::Human, Gender::Female, 0.75);
  p.set_merge_probability(false, Partner::AV, Gender::Male, 0.45);
  p.set_merge_probability(false, Partner::Human, Gender::Male, 0.60);
  p.set_merge_probability(false, Partner::AV, Gender::Female, 0.05);
  p.set_merge_probability(false, Partner::Human, Gender::Female, 0.45);
  return p;
}

MergingParams params_from_json(const nlohmann::json& doc) {
  MergingParams p = MergingParams::defaults();
  if (!doc.is_object()) throw ConfigError("driver parameters must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "p_time_limit") {
      p.p_time_limit = value.get<double>();
    } else if (key == "p_female") {
      p.p_female = value.get<double>();
    } else if (key == "p_av") {
      p.p_av = value.get<double>();
    } else if (key == "merge") {
      // {"t": {"AV": {"M": 0.97, "F": 0.8}, "H": {...}}, "f": {...}}
      for (const auto& [tl, by_ip] : value.items()) {
        if (tl != "t" && tl != "f") throw ConfigError("merge table: unknown TL key '" + tl + "'");
        for (const auto& [ip, by_g] : by_ip.items()) {
          if (ip != "AV" && ip != "H") throw ConfigError("merge table: unknown IP key '" + ip + "'");
          for (const auto& [g, prob] : by_g.items()) {
            if (g != "M" && g != "F") throw ConfigError("merge table: unknown G key '" + g + "'");
            p.set_merge_probability(tl == "t", ip == "AV" ? Partner::AV : Partner::Human,
                                    g == "M" ? Gender::Male : Gender::Female, prob.get<double>());
          }
        }
      }
    } else {
      throw ConfigError("unknown driver parameter '" + key + "'");
    }
  }
  check_probability(p.p_time_limit, "p_time_limit");
  check_probability(p.p_female, "p_female");
  check_probability(p.p_av, "p_av");
  for (const auto& a : p.merge)
    for (const auto& b : a)
      for (double x : b) check_probability(x, "merge probability");
  return p;
}

nlohmann::json params_to_json(const MergingParams& params) {
  nlohmann::json merge;
  for (int tl = 0; tl < 2; ++tl)
    for (int ip = 0; ip < 2; ++ip)
      for (int g = 0; g < 2; ++g) merge[tl_key(tl)][ip_key(ip)][g_key(g)] = params.merge[tl][ip][g];
  return {{"p_time_limit", params.p_time_limit},
          {"p_female", params.p_female},
          {"p_av", params.p_av},
          {"merge", merge}};
}

EvidenceMask EvidenceMask::parse(const std::string& text) {
  EvidenceMask m;
  if (text.empty() || text == "none") return m;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, '+')) {
    std::istringstream parts(token);
    std::string name;
    while (std::getline(parts, name, ',')) {
      if (name == "TL") m.bits_[0] = true;
      else if (name == "IP") m.bits_[1] = true;
      else if (name == "G") m.bits_[2] = true;
      else throw ConfigError("unknown evidence variable '" + name + "' in mask '" + text + "'");
    }
  }
  return m;
}

std::string EvidenceMask::label() const {
  std::string s = "p(M";
  std::string sep = "|";
  for (auto [on, name] : {std::pair{time_limit(), "TL"}, {partner(), "IP"}, {gender(), "G"}})
    if (on) {
      s += sep + name;
      sep = ",";
    }
  return s + ")";
}

MergingModel build_model(const MergingParams& params, double threshold) {
  using bn::Cpt;
  using bn::Variable;
  std::vector<Variable> vars{{kTimeLimit, {"true", "false"}},
                             {kPartner, {"AV", "H"}},
                             {kGender, {"M", "F"}},
                             {kMerge, {"true", "false"}}};
  std::vector<Cpt> cpts(4);
  cpts[0] = {kTimeLimit, {}, {{{}, bernoulli_row(params.p_time_limit)}}};
  cpts[1] = {kPartner, {}, {{{}, bernoulli_row(params.p_av)}}};
  cpts[2] = {kGender, {}, {{{}, bernoulli_row(1.0 - params.p_female)}}};
  cpts[3].child = kMerge;
  cpts[3].parents = {kTimeLimit, kPartner, kGender};
  for (std::size_t tl = 0; tl < 2; ++tl)
    for (std::size_t ip = 0; ip < 2; ++ip)
      for (std::size_t g = 0; g < 2; ++g)
        cpts[3].rows[{tl, ip, g}] = bernoulli_row(params.merge[tl][ip][g]);
  return {bn::BayesianNetwork(std::move(vars), std::move(cpts)), threshold};
}

MergingModel build_default_model() { return build_model(MergingParams::defaults()); }

MergingParams MergingModel::params() const {
  MergingParams p;
  bn::Assignment a(4, 0);
  p.p_time_limit = network.conditional(kTlIdx, 0, a);
  p.p_av = network.conditional(kIpIdx, 0, a);
  p.p_female = network.conditional(kGIdx, 1, a);
  for (std::size_t tl = 0; tl < 2; ++tl)
    for (std::size_t ip = 0; ip < 2; ++ip)
      for (std::size_t g = 0; g < 2; ++g) {
        a = {tl, ip, g, 0};
        p.merge[tl][ip][g] = network.conditional(kMIdx, 0, a);
      }
  return p;
}

bn::Evidence evidence_for(const MergingRecord& r, const EvidenceMask& mask) {
  bn::Evidence e;
  if (mask.time_limit()) e[kTimeLimit] = r.time_limit ? "true" : "false";
  if (mask.partner()) e[kPartner] = r.partner == Partner::AV ? "AV" : "H";
  if (mask.gender()) e[kGender] = r.gender == Gender::Male ? "M" : "F";
  return e;
}

Prediction predict_merge(const MergingModel& model, const bn::Evidence& evidence) {
  for (const auto& [name, _] : evidence)
    if (name != kTimeLimit && name != kPartner && name != kGender)
      throw std::invalid_argument("evidence may only assign TL, IP and G (got '" + name + "')");
  const double p = bn::posterior(model.network, kMerge, evidence)[0];
  return {p, p >= model.threshold};
}

Prediction predict_merge(const MergingModel& model, const MergingRecord& record,
                         const EvidenceMask& mask) {
  return predict_merge(model, evidence_for(record, mask));
}

std::vector<MergingRecord> generate_dataset(const MergingModel& model, std::size_t n, Rng& rng) {
  std::vector<MergingRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = bn::sample(model.network, rng);
    out.push_back({a[kTlIdx] == 0, static_cast<Partner>(a[kIpIdx]),
                   static_cast<Gender>(a[kGIdx]), a[kMIdx] == 0});
  }
  return out;
}

MergingModel fit_cpt(const std::vector<MergingRecord>& records, double alpha, double threshold) {
  if (records.empty()) throw std::invalid_argument("fit_cpt needs at least one record");
  if (!(alpha >= 0.0)) throw std::invalid_argument("pseudocount must be non-negative");
  const double n = static_cast<double>(records.size());
  double tl = 0, av = 0, female = 0;
  double cell_total[2][2][2] = {};
  double cell_merged[2][2][2] = {};
  for (const auto& r : records) {
    tl += r.time_limit;
    av += r.partner == Partner::AV;
    female += r.gender == Gender::Female;
    const int i = r.time_limit ? 0 : 1, j = static_cast<int>(r.partner),
              k = static_cast<int>(r.gender);
    cell_total[i][j][k] += 1;
    cell_merged[i][j][k] += r.merged;
  }
  MergingParams p;
  p.p_time_limit = (tl + alpha) / (n + 2 * alpha);
  p.p_av = (av + alpha) / (n + 2 * alpha);
  p.p_female = (female + alpha) / (n + 2 * alpha);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double denom = cell_total[i][j][k] + 2 * alpha;
        if (denom == 0.0) throw std::domain_error("empty cell");
        p.merge[i][j][k] = (cell_merged[i][j][k] + alpha) / denom;
      }
  return build_model(p, threshold);
}

void write_records_csv(std::ostream& out, const std::vector<MergingRecord>& records) {
  out << "tl,ip,g,merged\n";
  for (const auto& r : records)
    out << (r.time_limit ? 't' : 'f') << ',' << (r.partner == Partner::AV ? "AV" : "H") << ','
        << (r.gender == Gender::Male ? 'M' : 'F') << ',' << (r.merged ? 't' : 'f') << '\n';
}

std::vector<MergingRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "tl,ip,g,merged")
    throw ConfigError("records CSV must start with header 'tl,ip,g,merged'");
  std::vector<MergingRecord> out;
  std::size_t lineno = 1;
  auto flag = [&](const std::string& v) {
    if (v == "t") return true;
    if (v == "f") return false;
    throw ConfigError("line " + std::to_string(lineno) + ": expected t/f, got '" + v + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tl, ip, g, m, extra;
    if (!std::getline(fields, tl, ',') || !std::getline(fields, ip, ',') ||
        !std::getline(fields, g, ',') || !std::getline(fields, m, ',') || std::getline(fields, extra))
      throw ConfigError("line " + std::to_string(lineno) + ": expected 4 fields");
    MergingRecord r;
    r.time_limit = flag(tl);
    if (ip == "AV") r.partner = Partner::AV;
    else if (ip == "H") r.partner = Partner::Human;
    else throw ConfigError("line " + std::to_string(lineno) + ": ip must be AV or H");
    if (g == "M") r.gender = Gender::Male;
    else if (g == "F") r.gender = Gender::Female;
    else throw ConfigError("line " + std::to_string(lineno) + ": g must be M or F");
    r.merged = flag(m);
    out.push_back(r);
  }
  return out;
}

}  // namespace mixtraffic::driver
