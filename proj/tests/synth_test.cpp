#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "getkos/dataset.hpp"
#include "getkos/synth.hpp"

using namespace getkos;

TEST(Synth, MirrorMarginals) {
  const auto data = cleanse(synth::generate({7, 1205, 0}));
  const auto rep = describe(data, 25);
  EXPECT_EQ(rep.total_records, 1205u);

  const std::map<std::string, std::size_t> areas = {
      {"jogja", 23}, {"malang", 7},    {"jakarta", 24},
      {"surabaya", 23}, {"semarang", 15}, {"bandung", 29}};
  EXPECT_EQ(rep.areas_per_city, areas);
  std::size_t total_areas = 0;
  for (const auto& [_, n] : rep.areas_per_city) total_areas += n;
  EXPECT_EQ(total_areas, 121u);

  EXPECT_EQ(rep.type_counts.at("campur"), 511u);
  EXPECT_EQ(rep.type_counts.at("putri"), 441u);
  EXPECT_EQ(rep.type_counts.at("putra"), 214u);

  ASSERT_FALSE(rep.price_ranking.empty());
  EXPECT_EQ(rep.price_ranking[0].first, 1'000'000);
  EXPECT_EQ(rep.price_ranking[0].second, 68u);
  ASSERT_GT(rep.price_ranking.size(), 1u);
  EXPECT_LT(rep.price_ranking[1].second, 68u);

  std::size_t city_sum = 0, type_sum = 0;
  for (const auto& [_, n] : rep.city_counts) city_sum += n;
  for (const auto& [_, n] : rep.type_counts) type_sum += n;
  EXPECT_EQ(city_sum, 1205u);
  EXPECT_EQ(type_sum, 1205u);
}

TEST(Synth, DeterministicBytesPerSeed) {
  auto bytes = [](std::uint64_t seed) {
    std::ostringstream os;
    write_csv(os, synth::generate({seed, 1205, 0}));
    return os.str();
  };
  EXPECT_EQ(bytes(7), bytes(7));
  EXPECT_NE(bytes(7), bytes(8));
}

TEST(Synth, DirtyRowsAreRemovedByCleansing) {
  const auto clean = synth::generate({7, 1205, 0});
  auto dirty = synth::generate({7, 1205, 40});
  ASSERT_EQ(dirty.size(), 1245u);
  // CSV round trip, the path the CLI takes
  std::ostringstream os;
  write_csv(os, dirty);
  std::istringstream in(os.str());
  const auto data = cleanse(parse_raw_csv(in));
  EXPECT_EQ(data.size(), 1205u);
  EXPECT_EQ(data.records, clean);
  EXPECT_EQ(data.provenance.duplicates_dropped, 20u);
  EXPECT_EQ(data.provenance.nulls_dropped, 20u);
}

TEST(Synth, PricesFollowTheAdditiveRule) {
  // Mean residual of price against the noiseless rule should be small; the
  // pinned-mode adjustment and rounding only add a few thousand IDR of bias.
  const auto rows = synth::generate({7, 1205, 0});
  const auto& cities = synth::mirror_cities();
  double max_dev = 0.0;
  for (const auto& r : rows) {
    const auto it = std::find_if(cities.begin(), cities.end(),
                                 [&](const auto& c) { return r.kota == c.name; });
    ASSERT_NE(it, cities.end());
    EXPECT_GE(r.facility_score, 0);
    EXPECT_LE(r.facility_score, synth::kMaxFacilityScore);
    EXPECT_GT(r.harga_nominal, 0);
    const double lo = static_cast<double>(it->base_price - synth::kAreaOffsetSpan +
                                          synth::kPricePerFacility * r.facility_score);
    max_dev = std::max(max_dev, lo - static_cast<double>(r.harga_nominal));
  }
  // nothing more than ~6 sigma below the lowest possible mean
  EXPECT_LT(max_dev, 6 * synth::kNoiseSigma);
}

TEST(Synth, TooFewRowsIsError) {
  EXPECT_THROW(synth::generate({7, 50, 0}), Error);
}
