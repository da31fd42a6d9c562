#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "getkos/dataset.hpp"
#include "getkos/rng.hpp"

using namespace getkos;

namespace {

const char* kHeader = "kost_name,kota,type_kos,area,facility_score,harga_nominal\n";

std::vector<RawRecord> parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_raw_csv(in);
}

RawRecord rec(std::string name, std::string kota, std::string area,
              std::int64_t price, std::string type = "putri", std::int64_t fs = 4) {
  return {std::move(name), std::move(kota), std::move(type), std::move(area), fs,
          price, false};
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

}  // namespace

TEST(ParseRawCsv, ReferenceRow) {
  const auto rows = parse_text(std::string(kHeader) +
      "Kost Pondok Nirwana Merr Tipe C Surabaya,surabaya,putri,rungkut,6,1600000\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].kost_name, "Kost Pondok Nirwana Merr Tipe C Surabaya");
  EXPECT_EQ(rows[0].kota, "surabaya");
  EXPECT_EQ(rows[0].facility_score, 6);
  EXPECT_EQ(rows[0].harga_nominal, 1'600'000);
  EXPECT_FALSE(rows[0].malformed);
}

TEST(ParseRawCsv, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(parse_text(kHeader).empty());
}

TEST(ParseRawCsv, NonIntegerScoreIsFlaggedNotDropped) {
  const auto rows = parse_text(std::string(kHeader) + "K,jogja,putra,depok,abc,900000\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].malformed);
}

TEST(ParseRawCsv, MissingColumnNamesIt) {
  std::istringstream in("kost_name,kota,type_kos,area,harga_nominal\nK,a,b,c,1\n");
  try {
    parse_raw_csv(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::schema);
    EXPECT_NE(std::string(e.what()).find("facility_score"), std::string::npos);
  }
}

TEST(ParseRawCsv, TruncatedPriceHeaderAndExtraIndexColumn) {
  const auto rows = parse_text(
      "no,kost_name,kota,type_kos,area,facility_score,harga_nomina\n"
      "0,\"Kost A, Tipe B\",surabaya,putri,rungkut,4,1500000\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].kost_name, "Kost A, Tipe B");
  EXPECT_EQ(rows[0].harga_nominal, 1'500'000);
}

TEST(ParseRawCsv, UnreadableStreamIsIoError) {
  std::istringstream in;
  in.setstate(std::ios::badbit);
  EXPECT_EQ(kind_of([&] { parse_raw_csv(in); }), ErrorKind::io);
}

TEST(Cleanse, ExactDuplicateCollapses) {
  const auto a = rec("A", "jogja", "depok", 800'000);
  const auto b = rec("B", "jogja", "sleman", 900'000);
  const auto out = cleanse({a, b, a});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.provenance.duplicates_dropped, 1u);
  EXPECT_EQ(out.records[0], a);
  EXPECT_EQ(out.records[1], b);
}

TEST(Cleanse, SameListingDifferentPriceKeepsFirst) {
  const auto a = rec("A", "jogja", "depok", 800'000);
  auto a2 = a;
  a2.harga_nominal = 850'000;
  const auto out = cleanse({a, a2});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.records[0].harga_nominal, 800'000);
}

TEST(Cleanse, NullRule) {
  auto no_city = rec("A", "", "depok", 800'000);
  auto bad_price = rec("B", "jogja", "depok", 0);
  auto malformed = rec("C", "jogja", "depok", 700'000);
  malformed.malformed = true;
  auto negative_fs = rec("D", "jogja", "depok", 700'000, "putra", -1);
  const auto ok = rec("E", "jogja", "depok", 600'000);
  const auto out = cleanse({no_city, bad_price, malformed, negative_fs, ok});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.provenance.nulls_dropped, 4u);
  EXPECT_EQ(out.records[0], ok);
}

TEST(Cleanse, EmptyResultIsError) {
  EXPECT_EQ(kind_of([] { cleanse({}); }), ErrorKind::empty_dataset);
  EXPECT_EQ(kind_of([] { cleanse({rec("A", "", "x", 1)}); }), ErrorKind::empty_dataset);
}

// Random dirty inputs: counters balance, output is a subset, idempotent, and
// no listing key repeats.
TEST(Cleanse, Properties) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RawRecord> in;
    const auto n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = rec("K" + std::to_string(rng.below(8)),
                   rng.below(10) == 0 ? "" : "c" + std::to_string(rng.below(3)),
                   "a" + std::to_string(rng.below(3)),
                   static_cast<std::int64_t>(rng.below(4)) * 100'000);
      r.malformed = rng.below(15) == 0;
      in.push_back(r);
      if (rng.below(4) == 0) in.push_back(in[rng.below(in.size())]);
    }
    CleanDataset out;
    try {
      out = cleanse(in);
    } catch (const Error& e) {
      ASSERT_EQ(e.kind(), ErrorKind::empty_dataset);
      continue;
    }
    const auto& p = out.provenance;
    EXPECT_EQ(p.rows_read, out.size() + p.duplicates_dropped + p.nulls_dropped);
    std::set<std::tuple<std::string, std::string, std::string>> keys;
    for (const auto& r : out.records) {
      EXPECT_NE(std::find(in.begin(), in.end(), r), in.end());
      EXPECT_TRUE(keys.emplace(r.kost_name, r.kota, r.area).second);
      EXPECT_TRUE(is_complete(r));
    }
    const auto again = cleanse(out.records);
    EXPECT_EQ(again.records, out.records);
  }
}

TEST(Split, SizesAndDisjointness) {
  std::vector<RawRecord> in;
  for (int i = 0; i < 10; ++i) in.push_back(rec("K" + std::to_string(i), "c", "a", 100'000 + i));
  const auto data = cleanse(in);
  const auto [train, test] = split(data, {0.2, 7});
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  for (const auto& r : test.records) {
    EXPECT_EQ(std::find(train.records.begin(), train.records.end(), r), train.records.end());
  }
  const auto [train2, test2] = split(data, {0.2, 7});
  EXPECT_EQ(train.records, train2.records);
  EXPECT_EQ(test.records, test2.records);
}

TEST(Split, ReferenceSizeRoundsCleanly) {
  std::vector<RawRecord> in;
  for (int i = 0; i < 1205; ++i) in.push_back(rec("K" + std::to_string(i), "c", "a", 100'000));
  const auto [train, test] = split(cleanse(in), {});
  EXPECT_EQ(train.size(), 964u);
  EXPECT_EQ(test.size(), 241u);
}

TEST(Split, EmptySideIsError) {
  const auto one = cleanse({rec("A", "c", "a", 1)});
  EXPECT_EQ(kind_of([&] { split(one, {0.5, 1}); }), ErrorKind::split);
  const auto two = cleanse({rec("A", "c", "a", 1), rec("B", "c", "a", 1)});
  EXPECT_EQ(kind_of([&] { split(two, {0.0, 1}); }), ErrorKind::split);
  EXPECT_EQ(kind_of([&] { split(two, {1.0, 1}); }), ErrorKind::split);
}

TEST(Split, PartitionProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawRecord> in;
    const auto n = 2 + rng.below(100);
    for (std::size_t i = 0; i < n; ++i) in.push_back(rec("K" + std::to_string(i), "c", "a", 1));
    const auto data = cleanse(in);
    const double f = 0.05 + 0.9 * rng.uniform();
    try {
      auto [train, test] = split(data, {f, rng.next_u64()});
      EXPECT_EQ(train.size() + test.size(), data.size());
      std::set<std::string> names;
      for (const auto& r : train.records) names.insert(r.kost_name);
      for (const auto& r : test.records) EXPECT_TRUE(names.insert(r.kost_name).second);
      EXPECT_EQ(names.size(), data.size());
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::split);
    }
  }
}

TEST(Describe, CountsAndRanking) {
  const auto data = cleanse({
      rec("A", "jogja", "depok", 1'000'000, "Campur"),
      rec("B", "jogja", "depok", 1'000'000, "Putri"),
      rec("C", "jogja", "mlati", 900'000, "Putri"),
      rec("D", "malang", "dau", 900'000, "Putra"),
      rec("E", "malang", "dau", 500'000, "Putra"),
  });
  const auto rep = describe(data, 2);
  EXPECT_EQ(rep.total_records, 5u);
  EXPECT_EQ(rep.city_counts.at("jogja"), 3u);
  EXPECT_EQ(rep.areas_per_city.at("jogja"), 2u);
  EXPECT_EQ(rep.areas_per_city.at("malang"), 1u);
  EXPECT_EQ(rep.type_counts.at("Putri"), 2u);
  ASSERT_EQ(rep.price_ranking.size(), 2u);
  // tie on count 2: lower price first
  EXPECT_EQ(rep.price_ranking[0], std::make_pair(std::int64_t{900'000}, std::size_t{2}));
  EXPECT_EQ(rep.price_ranking[1], std::make_pair(std::int64_t{1'000'000}, std::size_t{2}));

  const auto j = to_json(rep);
  EXPECT_EQ(j["total_records"], 5);
  EXPECT_EQ(j["price_ranking"][0]["price"], 900'000);
  EXPECT_EQ(j.size(), 5u);
}
