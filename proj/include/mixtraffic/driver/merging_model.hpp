#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtraffic/bn/network.hpp"
#include "mixtraffic/random.hpp"

namespace mixtraffic::driver {

// Variable names and state labels of the merging network.
inline constexpr const char* kMerge = "M";
inline constexpr const char* kTimeLimit = "TL";
inline constexpr const char* kPartner = "IP";
inline constexpr const char* kGender = "G";

enum class Partner { AV = 0, Human = 1 };
enum class Gender { Male = 0, Female = 1 };

/// Parameterization of the four-node merging network.
/// `merge[tl][ip][g]` is P(M = true | TL, IP, G) with tl: 0 = true, 1 = false.
struct MergingParams {
  double p_time_limit = 0.50;
  double p_female = 0.59;
  double p_av = 0.50;
  std::array<std::array<std::array<double, 2>, 2>, 2> merge{};

  double merge_probability(bool time_limit, Partner ip, Gender g) const {
    return merge[time_limit ? 0 : 1][static_cast<int>(ip)][static_cast<int>(g)];
  }
  void set_merge_probability(bool time_limit, Partner ip, Gender g, double p) {
    merge[time_limit ? 0 : 1][static_cast<int>(ip)][static_cast<int>(g)] = p;
  }

  static MergingParams defaults();
};

MergingParams params_from_json(const nlohmann::json& doc);
nlohmann::json params_to_json(const MergingParams& params);

/// Which of the parent variables (TL, IP, G) are observed.
class EvidenceMask {
 public:
  EvidenceMask() = default;
  EvidenceMask(bool tl, bool ip, bool g) {
    bits_[0] = tl;
    bits_[1] = ip;
    bits_[2] = g;
  }
  static EvidenceMask full() { return {true, true, true}; }
  static EvidenceMask parse(const std::string& text);  // e.g. "TL,IP,G", "IP+G", "" or "none"

  bool time_limit() const { return bits_[0]; }
  bool partner() const { return bits_[1]; }
  bool gender() const { return bits_[2]; }

  /// Column label in the style "p(M|TL,IP)".
  std::string label() const;
  bool operator==(const EvidenceMask&) const = default;

 private:
  std::bitset<3> bits_;
};

struct MergingRecord {
  bool time_limit = false;
  Partner partner = Partner::AV;
  Gender gender = Gender::Male;
  bool merged = false;
  bool operator==(const MergingRecord&) const = default;
};

struct MergingModel {
  bn::BayesianNetwork network;
  double threshold = 0.5;

  /// The per-cell probabilities the network was built from.
  MergingParams params() const;
};

MergingModel build_model(const MergingParams& params, double threshold = 0.5);
MergingModel build_default_model();

struct Prediction {
  double probability = 0.0;
  bool merge = false;
};

/// Posterior P(M = true | evidence). Evidence may only assign TL, IP, G.
Prediction predict_merge(const MergingModel& model, const bn::Evidence& evidence);
/// Restricts the record's parent values to `mask` and predicts.
Prediction predict_merge(const MergingModel& model, const MergingRecord& record,
                         const EvidenceMask& mask);

bn::Evidence evidence_for(const MergingRecord& record, const EvidenceMask& mask);

/// n ancestral samples. n = 0 yields an empty list.
std::vector<MergingRecord> generate_dataset(const MergingModel& model, std::size_t n, Rng& rng);

/// Laplace-smoothed maximum likelihood: (count + alpha) / (total + 2 alpha).
/// With alpha = 0 an unobserved parent combination throws std::domain_error("empty cell").
MergingModel fit_cpt(const std::vector<MergingRecord>& records, double alpha = 1.0,
                     double threshold = 0.5);

// CSV with header `tl,ip,g,merged`, values t/f, AV/H, M/F, t/f.
void write_records_csv(std::ostream& out, const std::vector<MergingRecord>& records);
std::vector<MergingRecord> read_records_csv(std::istream& in);

}  // namespace mixtraffic::driver
