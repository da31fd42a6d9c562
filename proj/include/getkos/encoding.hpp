#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "getkos/dataset.hpp"
#include "getkos/error.hpp"
#include "getkos/matrix.hpp"

namespace getkos {

enum class ColumnKind : std::uint8_t { categorical = 0, numeric = 1 };

struct Column {
  std::string_view name;
  ColumnKind kind;
};

inline constexpr std::size_t kNumFeatures = 4;

/// Feature order is fixed: kota, type_kos, area, facility_score.
inline constexpr std::array<Column, kNumFeatures> kColumnSchema = {{
    {"kota", ColumnKind::categorical},
    {"type_kos", ColumnKind::categorical},
    {"area", ColumnKind::categorical},
    {"facility_score", ColumnKind::numeric},
}};

inline constexpr double kNormEpsilon = 1e-7;

/// Integer vocabulary in first-seen order. Index 0 is out-of-vocabulary, so
/// tokens[i] encodes as i + 1.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) {
    for (auto& t : tokens) add(std::move(t));
  }

  std::uint32_t add(std::string token) {
    auto [it, inserted] = index_.try_emplace(token, 0);
    if (inserted) {
      tokens_.push_back(std::move(token));
      it->second = static_cast<std::uint32_t>(tokens_.size());
    }
    return it->second;
  }

  std::uint32_t lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? 0 : it->second;
  }

  bool contains(std::string_view token) const { return lookup(token) != 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct NormalizationStats {
  std::array<double, kNumFeatures> means{};
  std::array<double, kNumFeatures> variances{};
  std::uint64_t count = 0;

  /// means + variances + count, the frozen scalars of the normalization step.
  static constexpr std::size_t kStoredScalars = 2 * kNumFeatures + 1;

  bool operator==(const NormalizationStats&) const = default;
};

using FeatureRow = std::array<double, kNumFeatures>;

struct FeatureEncoder {
  Vocabulary kota;
  Vocabulary type_kos;
  Vocabulary area;
  /// For each area token (by vocabulary position), the kota indices it was
  /// seen with during fitting, in first-seen order.
  std::vector<std::vector<std::uint32_t>> area_cities;
  NormalizationStats norm;

  const Vocabulary& vocabulary(std::size_t column) const {
    switch (column) {
      case 0: return kota;
      case 1: return type_kos;
      default: return area;
    }
  }

  bool operator==(const FeatureEncoder&) const = default;
};

/// Column indices before normalization, plus which categoricals hit OOV.
struct CategoricalCodes {
  FeatureRow raw{};
  std::vector<std::string> oov_fields;
};

inline CategoricalCodes integer_codes(const FeatureEncoder& enc,
                                      std::string_view kota,
                                      std::string_view type_kos,
                                      std::string_view area,
                                      std::int64_t facility_score) {
  CategoricalCodes out;
  const std::array<std::string_view, 3> values = {kota, type_kos, area};
  for (std::size_t c = 0; c < 3; ++c) {
    const auto code = enc.vocabulary(c).lookup(values[c]);
    if (code == 0) out.oov_fields.emplace_back(kColumnSchema[c].name);
    out.raw[c] = static_cast<double>(code);
  }
  out.raw[3] = static_cast<double>(facility_score);
  return out;
}

inline FeatureRow normalize(const NormalizationStats& norm, const FeatureRow& raw) {
  FeatureRow z{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    z[j] = norm.variances[j] == 0.0
               ? 0.0
               : (raw[j] - norm.means[j]) /
                     std::sqrt(norm.variances[j] + kNormEpsilon);
  }
  return z;
}

inline FeatureEncoder fit_encoder(const CleanDataset& train) {
  if (train.empty()) {
    throw Error(ErrorKind::empty_dataset, "cannot fit an encoder on no records");
  }
  FeatureEncoder enc;
  std::vector<FeatureRow> raw;
  raw.reserve(train.size());
  for (const auto& r : train.records) {
    const auto k = enc.kota.add(r.kota);
    enc.type_kos.add(r.type_kos);
    const auto a = enc.area.add(r.area);
    if (enc.area_cities.size() < a) enc.area_cities.resize(a);
    auto& cities = enc.area_cities[a - 1];
    if (std::find(cities.begin(), cities.end(), k) == cities.end()) {
      cities.push_back(k);
    }
    raw.push_back(
        integer_codes(enc, r.kota, r.type_kos, r.area, r.facility_score).raw);
  }

  const auto n = static_cast<double>(raw.size());
  auto& norm = enc.norm;
  norm.count = raw.size();
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0;
    for (const auto& row : raw) sum += row[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& row : raw) ss += (row[j] - mean) * (row[j] - mean);
    norm.means[j] = mean;
    norm.variances[j] = ss / n;
  }
  return enc;
}

inline FeatureRow encode_row(const FeatureEncoder& enc, std::string_view kota,
                             std::string_view type_kos, std::string_view area,
                             std::int64_t facility_score) {
  return normalize(enc.norm,
                   integer_codes(enc, kota, type_kos, area, facility_score).raw);
}

struct EncodedData {
  Matrix X;
  std::vector<double> y;
};

inline EncodedData encode_matrix(const FeatureEncoder& enc,
                                 const CleanDataset& data) {
  EncodedData out{Matrix(data.size(), kNumFeatures), {}};
  out.y.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    const auto z = encode_row(enc, r.kota, r.type_kos, r.area, r.facility_score);
    std::copy(z.begin(), z.end(), out.X.row(i).begin());
    out.y.push_back(static_cast<double>(r.harga_nominal));
  }
  return out;
}

}  // namespace getkos
