#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "getkos/dataset.hpp"
#include "getkos/error.hpp"
#include "getkos/rng.hpp"

namespace getkos::synth {

struct CitySpec {
  const char* name;
  std::int64_t base_price;
  std::size_t rows;  // row share at the reference corpus size
  std::vector<const char*> areas;
};

struct TypeSpec {
  const char* name;
  std::int64_t offset;
  std::size_t rows;
};

// Six cities with 23/7/24/23/15/29 areas (121 total).
inline const std::vector<CitySpec>& mirror_cities() {
  static const std::vector<CitySpec> cities = {
      {"jogja", 650'000, 260,
       {"depok", "gondokusuman", "umbulharjo", "mlati", "ngaglik", "kasihan",
        "sewon", "banguntapan", "gamping", "jetis", "mergangsan", "wirobrajan",
        "kotagede", "tegalrejo", "danurejan", "gedongtengen", "ngampilan",
        "pakualaman", "mantrijeron", "kraton", "godean", "kalasan",
        "berbah"}},
      {"malang", 550'000, 150,
       {"lowokwaru", "klojen", "blimbing", "sukun", "kedungkandang", "dau",
        "singosari"}},
      {"jakarta", 1'150'000, 230,
       {"tebet", "setiabudi", "kebayoran baru", "kebayoran lama",
        "mampang prapatan", "pancoran", "pasar minggu", "cilandak",
        "jagakarsa", "grogol petamburan", "palmerah", "tanah abang", "menteng",
        "senen", "cempaka putih", "johar baru", "kemayoran", "sawah besar",
        "gambir", "kelapa gading", "tanjung priok", "pulo gadung", "matraman",
        "kebon jeruk"}},
      {"surabaya", 800'000, 215,
       {"rungkut", "gubeng", "sukolilo", "mulyorejo", "tambaksari",
        "wonokromo", "wonocolo", "tenggilis mejoyo", "gunung anyar", "wiyung",
        "karang pilang", "jambangan", "gayungan", "sawahan", "tegalsari",
        "genteng", "bubutan", "simokerto", "kenjeran", "dukuh pakis",
        "lakarsantri", "sambikerep", "benowo"}},
      {"semarang", 600'000, 140,
       {"tembalang", "banyumanik", "gajahmungkur", "candisari",
        "semarang selatan", "semarang tengah", "semarang barat",
        "semarang timur", "semarang utara", "pedurungan", "gayamsari", "genuk",
        "ngaliyan", "gunungpati", "mijen"}},
      {"bandung", 750'000, 210,
       {"coblong", "sukajadi", "sukasari", "cidadap", "bandung wetan",
        "sumur bandung", "cibeunying kaler", "cibeunying kidul", "cicendo",
        "andir", "astana anyar", "bojongloa kaler", "bojongloa kidul",
        "babakan ciparay", "bandung kulon", "regol", "lengkong", "batununggal",
        "kiaracondong", "antapani", "arcamanik", "mandalajati", "ujung berung",
        "cibiru", "panyileukan", "cinambo", "gedebage", "rancasari",
        "buahbatu"}},
  };
  return cities;
}

// campur/putri/putra carry the reference counts; two minor types fill the
// remaining 39 rows of the 1,205-row corpus.
inline const std::vector<TypeSpec>& mirror_types() {
  static const std::vector<TypeSpec> types = {
      {"campur", 100'000, 511}, {"putri", 50'000, 441},
      {"putra", 0, 214},        {"pasutri", 200'000, 25},
      {"keluarga", 250'000, 14},
  };
  return types;
}

inline constexpr std::size_t kReferenceRows = 1205;
inline constexpr std::int64_t kPricePerFacility = 75'000;
inline constexpr double kNoiseSigma = 50'000.0;
inline constexpr std::int64_t kAreaOffsetSpan = 100'000;
inline constexpr std::int64_t kPriceGrid = 10'000;
inline constexpr std::int64_t kMinPrice = 100'000;
inline constexpr std::int64_t kModePrice = 1'000'000;
inline constexpr std::size_t kModeCount = 68;
inline constexpr std::int64_t kMaxFacilityScore = 10;

struct Options {
  std::uint64_t seed = 7;
  std::size_t rows = kReferenceRows;
  /// Extra rows (duplicates and null rows) appended for cleansing to remove.
  std::size_t dirty_rows = 0;
};

namespace detail {

/// Largest-remainder apportionment of `total` over `weights`, each share at
/// least `floor_each`.
inline std::vector<std::size_t> apportion(const std::vector<std::size_t>& weights,
                                          std::size_t total,
                                          std::size_t floor_each = 0) {
  const std::size_t n = weights.size();
  const double wsum = static_cast<double>(
      std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
  std::vector<std::size_t> out(n, 0);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = static_cast<double>(total) * weights[i] / wsum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    rema.emplace_back(exact - std::floor(exact), i);
    assigned += out[i];
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    ++out[rema[k % n].second];
  }
  for (std::size_t i = 0; i < n; ++i) {
    while (out[i] < floor_each) {
      auto donor = std::max_element(out.begin(), out.end());
      if (*donor <= floor_each) break;
      --*donor;
      ++out[i];
    }
  }
  return out;
}

inline std::string title_case(std::string s) {
  bool start = true;
  for (char& c : s) {
    if (start && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    start = (c == ' ');
  }
  return s;
}

}  // namespace detail

/// Mirror corpus: city, area and type counts match the reference marginals;
/// prices follow a known additive rule so learned models can be graded.
/// price = city base + area offset + type offset + 75,000 * facility_score
///         + N(0, 50,000), rounded to 10,000; then the rows nearest to
/// 1,000,000 are pinned there so it is the modal price with 68 listings.
inline std::vector<RawRecord> generate(const Options& opt) {
  if (opt.rows < 121) {
    throw Error(ErrorKind::empty_dataset,
                "synthetic corpus needs at least 121 rows (one per area)");
  }
  const auto& cities = mirror_cities();
  const auto& types = mirror_types();
  Rng rng(opt.seed);

  std::vector<std::size_t> city_weights, type_weights;
  for (const auto& c : cities) city_weights.push_back(c.rows);
  for (const auto& t : types) type_weights.push_back(t.rows);
  const auto city_rows = detail::apportion(city_weights, opt.rows);
  const auto type_rows = detail::apportion(type_weights, opt.rows);

  std::vector<std::size_t> type_of_row;
  for (std::size_t t = 0; t < types.size(); ++t) {
    type_of_row.insert(type_of_row.end(), type_rows[t], t);
  }
  rng.shuffle(type_of_row.begin(), type_of_row.end());

  static const char* const kNamePrefix[] = {
      "Griya", "Wisma", "Pondok", "Graha", "Rumah", "Omah", "Puri", "Asrama"};
  static const char* const kNameWord[] = {
      "Melati", "Mawar", "Nirwana", "Sejahtera", "Indah", "Asri", "Cozy",
      "Harmoni", "Barokah", "Sakinah", "Bahagia", "Permata"};

  std::vector<RawRecord> rows;
  std::vector<double> noisy;
  rows.reserve(opt.rows + opt.dirty_rows);
  std::size_t row_idx = 0;
  for (std::size_t c = 0; c < cities.size(); ++c) {
    const auto& city = cities[c];
    const std::size_t n_area = city.areas.size();
    std::vector<std::int64_t> area_offset(n_area);
    for (auto& off : area_offset) {
      const auto steps = static_cast<std::int64_t>(
          rng.below(2 * kAreaOffsetSpan / kPriceGrid + 1));
      off = -kAreaOffsetSpan + steps * kPriceGrid;
    }
    // every area gets one listing, the remainder lands uniformly
    std::vector<std::size_t> area_of_row(n_area);
    std::iota(area_of_row.begin(), area_of_row.end(), std::size_t{0});
    while (area_of_row.size() < city_rows[c]) {
      area_of_row.push_back(rng.below(n_area));
    }
    rng.shuffle(area_of_row.begin(), area_of_row.end());

    for (std::size_t k = 0; k < city_rows[c]; ++k, ++row_idx) {
      const std::size_t a = area_of_row[k];
      const auto& type = types[type_of_row[row_idx]];
      RawRecord r;
      r.kota = city.name;
      r.area = city.areas[a];
      r.type_kos = type.name;
      r.facility_score =
          static_cast<std::int64_t>(rng.below(kMaxFacilityScore + 1));
      r.kost_name = std::string("Kost ") + kNamePrefix[rng.below(8)] + " " +
                    kNameWord[rng.below(12)] + " " + std::to_string(k + 1) +
                    " " + detail::title_case(r.area) + " " +
                    detail::title_case(r.kota);
      const double mean = static_cast<double>(
          city.base_price + area_offset[a] + type.offset +
          kPricePerFacility * r.facility_score);
      const double price = mean + kNoiseSigma * rng.normal();
      noisy.push_back(price);
      const auto rounded = static_cast<std::int64_t>(
          std::llround(price / static_cast<double>(kPriceGrid)) * kPriceGrid);
      r.harga_nominal = std::max(kMinPrice, rounded);
      rows.push_back(std::move(r));
    }
  }

  // Pin the modal price.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::abs(noisy[a] - kModePrice) < std::abs(noisy[b] - kModePrice);
  });
  const std::size_t pinned = std::min(kModeCount, rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& r = rows[order[i]];
    if (i < pinned) {
      r.harga_nominal = kModePrice;
    } else if (r.harga_nominal == kModePrice) {
      r.harga_nominal += noisy[order[i]] < kModePrice ? -kPriceGrid : kPriceGrid;
    }
  }

  for (std::size_t d = 0; d < opt.dirty_rows; ++d) {
    const auto& src = rows[rng.below(opt.rows)];
    RawRecord r;
    switch (d % 4) {
      case 0:  // byte-identical rescrape
        r = src;
        break;
      case 1:  // same listing seen from a neighbouring area page
        r = src;
        r.harga_nominal += kPriceGrid;
        break;
      case 2:
        r = src;
        r.kost_name = "Kost Tanpa Kota " + std::to_string(d);
        r.kota.clear();
        break;
      default:
        r = src;
        r.kost_name = "Kost Harga Rusak " + std::to_string(d);
        r.malformed = true;
        r.harga_nominal = 0;
        break;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace getkos::synth
