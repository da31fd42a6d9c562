#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "getkos/csv.hpp"
#include "getkos/error.hpp"
#include "getkos/rng.hpp"

namespace getkos {

/// One scraped boarding-house listing. Parsing never coerces: empty strings
/// survive, and unparsable numerics set `malformed` so cleansing can judge.
struct RawRecord {
  std::string kost_name;
  std::string kota;
  std::string type_kos;
  std::string area;
  std::int64_t facility_score = 0;
  std::int64_t harga_nominal = 0;
  bool malformed = false;

  bool operator==(const RawRecord&) const = default;
};

struct Provenance {
  std::string source;
  std::size_t rows_read = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t nulls_dropped = 0;
};

struct CleanDataset {
  std::vector<RawRecord> records;
  Provenance provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 42;
};

struct StatsReport {
  std::map<std::string, std::size_t> city_counts;
  std::map<std::string, std::size_t> areas_per_city;
  std::map<std::string, std::size_t> type_counts;
  /// (price, count), count descending then price ascending.
  std::vector<std::pair<std::int64_t, std::size_t>> price_ranking;
  std::size_t total_records = 0;
};

inline constexpr std::array<const char*, 6> kCsvColumns = {
    "kost_name", "kota", "type_kos", "area", "facility_score", "harga_nominal"};

namespace detail {

inline std::optional<std::int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads the six-column listing CSV. Extra columns (such as a leading row
/// index) are ignored; `harga_nomina` is accepted as an alias for the price.
inline std::vector<RawRecord> parse_raw_csv(std::istream& source) {
  const auto rows = csv::read(source);
  if (rows.empty()) {
    throw Error(ErrorKind::schema, "missing header row");
  }

  const auto& header = rows.front();
  std::array<std::size_t, 6> col{};
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
    std::string_view want = kCsvColumns[c];
    auto it = std::find(header.begin(), header.end(), want);
    if (it == header.end() && want == "harga_nominal") {
      it = std::find(header.begin(), header.end(), "harga_nomina");
    }
    if (it == header.end()) {
      throw Error(ErrorKind::schema,
                  "missing required column '" + std::string(want) + "'");
    }
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<RawRecord> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto field = [&](std::size_t c) -> std::string {
      return col[c] < row.size() ? row[col[c]] : std::string{};
    };
    RawRecord rec;
    rec.kost_name = field(0);
    rec.kota = field(1);
    rec.type_kos = field(2);
    rec.area = field(3);
    const auto fs = detail::parse_int(field(4));
    const auto price = detail::parse_int(field(5));
    rec.facility_score = fs.value_or(0);
    rec.harga_nominal = price.value_or(0);
    // empty numerics count as malformed too
    rec.malformed = !fs || !price;
    out.push_back(std::move(rec));
  }
  return out;
}

/// Malformed records are written with an "n/a" price so they stay malformed
/// when read back.
inline void write_csv(std::ostream& out, const std::vector<RawRecord>& records) {
  csv::write_row(out, csv::Row(kCsvColumns.begin(), kCsvColumns.end()));
  for (const auto& r : records) {
    csv::write_row(out, {r.kost_name, r.kota, r.type_kos, r.area,
                         std::to_string(r.facility_score),
                         r.malformed ? std::string("n/a")
                                     : std::to_string(r.harga_nominal)});
  }
}

/// True when the record survives the null rule.
inline bool is_complete(const RawRecord& r) {
  return !r.malformed && !r.kost_name.empty() && !r.kota.empty() &&
         !r.type_kos.empty() && !r.area.empty() && r.harga_nominal > 0 &&
         r.facility_score >= 0;
}

/// Exact duplicates first, then listings sharing (kost_name, kota, area),
/// then the null rule. First occurrences win; order is otherwise preserved.
inline CleanDataset cleanse(const std::vector<RawRecord>& records,
                            std::string source = {}) {
  CleanDataset out;
  out.provenance.source = std::move(source);
  out.provenance.rows_read = records.size();

  std::vector<const RawRecord*> unique_rows;
  {
    std::set<std::tuple<std::string_view, std::string_view, std::string_view,
                        std::string_view, std::int64_t, std::int64_t, bool>>
        seen;
    for (const auto& r : records) {
      if (seen.emplace(r.kost_name, r.kota, r.type_kos, r.area,
                       r.facility_score, r.harga_nominal, r.malformed)
              .second) {
        unique_rows.push_back(&r);
      }
    }
  }

  std::vector<const RawRecord*> unique_listings;
  {
    std::set<std::tuple<std::string_view, std::string_view, std::string_view>>
        seen;
    for (const auto* r : unique_rows) {
      if (seen.emplace(r->kost_name, r->kota, r->area).second) {
        unique_listings.push_back(r);
      }
    }
  }
  out.provenance.duplicates_dropped = records.size() - unique_listings.size();

  for (const auto* r : unique_listings) {
    if (is_complete(*r)) {
      out.records.push_back(*r);
    } else {
      ++out.provenance.nulls_dropped;
    }
  }
  if (out.records.empty()) {
    throw Error(ErrorKind::empty_dataset, "no records left after cleansing");
  }
  return out;
}

inline std::pair<CleanDataset, CleanDataset> split(const CleanDataset& data,
                                                   const SplitSpec& spec) {
  if (data.empty()) {
    throw Error(ErrorKind::split, "cannot split an empty dataset");
  }
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw Error(ErrorKind::split, "test_fraction must lie in (0, 1)");
  }
  const std::size_t n = data.size();
  // The epsilon absorbs representation error such as 0.8 * 1205.
  const auto n_train = static_cast<std::size_t>(
      std::ceil((1.0 - spec.test_fraction) * static_cast<double>(n) - 1e-9));
  if (n_train == 0 || n_train >= n) {
    throw Error(ErrorKind::split,
                "test_fraction " + std::to_string(spec.test_fraction) +
                    " leaves an empty side for " + std::to_string(n) +
                    " records");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order.begin(), order.end());

  CleanDataset train, test;
  train.provenance = test.provenance = data.provenance;
  train.records.reserve(n_train);
  test.records.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).records.push_back(data.records[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

inline StatsReport describe(const CleanDataset& data, std::size_t top_k = 25) {
  StatsReport rep;
  rep.total_records = data.size();
  std::map<std::string, std::set<std::string>> areas;
  std::map<std::int64_t, std::size_t> prices;
  for (const auto& r : data.records) {
    ++rep.city_counts[r.kota];
    ++rep.type_counts[r.type_kos];
    areas[r.kota].insert(r.area);
    ++prices[r.harga_nominal];
  }
  for (const auto& [city, set] : areas) rep.areas_per_city[city] = set.size();

  rep.price_ranking.assign(prices.begin(), prices.end());
  std::stable_sort(rep.price_ranking.begin(), rep.price_ranking.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  if (rep.price_ranking.size() > top_k) rep.price_ranking.resize(top_k);
  return rep;
}

inline nlohmann::json to_json(const StatsReport& rep) {
  nlohmann::json ranking = nlohmann::json::array();
  for (const auto& [price, count] : rep.price_ranking) {
    ranking.push_back({{"price", price}, {"count", count}});
  }
  return {{"city_counts", rep.city_counts},
          {"areas_per_city", rep.areas_per_city},
          {"type_counts", rep.type_counts},
          {"price_ranking", ranking},
          {"total_records", rep.total_records}};
}

}  // namespace getkos
