#include <thread>

#include <gtest/gtest.h>

#include "getkos/rng.hpp"
#include "getkos/service.hpp"
#include "test_support.hpp"

using namespace getkos;
using getkos::testing::small_bundle;
using nlohmann::json;

namespace {

class LiveServer : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    server_ = service::make_server(small_bundle()).release();
    port_ = server_->bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = new std::thread([] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    server_->stop();
    thread_->join();
    delete thread_;
    delete server_;
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(10, 0);
    return c;
  }

  static inline httplib::Server* server_ = nullptr;
  static inline std::thread* thread_ = nullptr;
  static inline int port_ = 0;
};

const char* kGood = R"({"kota":"jogja","area":"depok","type_kos":"putri","facilities":["wifi","ac"]})";

}  // namespace

TEST(Handlers, MetadataListsVocabularies) {
  const auto& b = small_bundle();
  const auto m = service::metadata(b);
  EXPECT_EQ(m["cities"].get<std::vector<std::string>>(), b.encoder.kota.tokens());
  EXPECT_EQ(m["types"].get<std::vector<std::string>>(), b.encoder.type_kos.tokens());
  EXPECT_EQ(m["facilities"].get<std::vector<std::string>>(), b.facility_catalog);
  EXPECT_EQ(m["model"]["arch"], b.metadata.arch_summary);
  EXPECT_EQ(m["model"]["validation_mae_idr"], b.metadata.val_mae);
  std::size_t areas = 0;
  for (const auto& [city, list] : m["areas_by_city"].items()) areas += list.size();
  EXPECT_EQ(areas, b.encoder.area.size());
  const auto malang = m["areas_by_city"]["malang"].get<std::vector<std::string>>();
  EXPECT_NE(std::find(malang.begin(), malang.end(), "lowokwaru"), malang.end());
  EXPECT_EQ(service::metadata(b), m);
}

TEST(Handlers, FacilitiesCatalogPassesThrough) {
  auto b = small_bundle();
  b.facility_catalog = {"kolam renang", "gym"};
  EXPECT_EQ(service::metadata(b)["facilities"], json({"kolam renang", "gym"}));
  const auto r = service::handle_predict(
      b, R"({"kota":"jogja","area":"depok","type_kos":"putri","facilities":["gym","wifi"]})");
  EXPECT_EQ(r.body["facility_score_used"], 1);
  EXPECT_EQ(r.body["unknown_facilities"], json({"wifi"}));
}

TEST(Handlers, PredictMatchesLibrary) {
  const auto& b = small_bundle();
  const auto r = service::handle_predict(b, kGood);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body, bundle::to_json(bundle::predict(b, "jogja", "depok", "putri", {"wifi", "ac"})));

  const auto none = service::handle_predict(
      b, R"({"kota":"jogja","area":"depok","type_kos":"putri","facilities":[]})");
  EXPECT_EQ(none.body["facility_score_used"], 0);
  const auto missing = service::handle_predict(
      b, R"({"kota":"jogja","area":"depok","type_kos":"putri"})");
  EXPECT_EQ(missing.body, none.body);

  const auto oov = service::handle_predict(
      b, R"({"kota":"atlantis","area":"depok","type_kos":"putri"})");
  ASSERT_EQ(oov.status, 200);
  EXPECT_EQ(oov.body["oov_fields"], json({"kota"}));
}

TEST(Handlers, RejectsBadBodies) {
  const auto& b = small_bundle();
  auto status = [&](std::string_view body) { return service::handle_predict(b, body).status; };
  EXPECT_EQ(status("not json"), 400);
  EXPECT_EQ(status("[1,2]"), 400);
  EXPECT_EQ(status(R"({"kota":"jogja","area":"depok"})"), 400);
  EXPECT_EQ(status(R"({"kota":1,"area":"depok","type_kos":"putri"})"), 400);
  EXPECT_EQ(status(R"({"kota":"jogja","area":"depok","type_kos":"putri","facilities":"wifi"})"), 400);
  EXPECT_EQ(status(R"({"kota":"jogja","area":"depok","type_kos":"putri","facilities":[1]})"), 400);
  EXPECT_EQ(service::handle_predict(b, R"({"kota":"jogja","area":"depok"})").body["field"], "type_kos");
  EXPECT_EQ(status(std::string(service::kMaxBodyBytes + 1, ' ')), 413);
}

TEST(Handlers, FuzzedBodiesGetStructuredReplies) {
  const auto& b = small_bundle();
  Rng rng(5);
  const std::string base = kGood;
  for (int i = 0; i < 1000; ++i) {
    auto body = base;
    for (int k = 0, n = 1 + static_cast<int>(rng.below(6)); k < n; ++k) {
      body[rng.below(body.size())] = static_cast<char>(rng.below(256));
    }
    const auto r = service::handle_predict(b, body);
    EXPECT_TRUE(r.status == 200 || r.status == 400) << body;
    if (r.status == 400) {
      EXPECT_TRUE(r.body.contains("error"));
    }
  }
}

TEST_F(LiveServer, HealthAndMetadata) {
  auto c = client();
  auto h = c.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(json::parse(h->body)["status"], "ok");

  auto m = c.Get("/api/metadata");
  ASSERT_TRUE(m);
  EXPECT_EQ(m->status, 200);
  EXPECT_EQ(json::parse(m->body), service::metadata(small_bundle()));
  EXPECT_EQ(m->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(m->get_header_value("Content-Type"), "application/json");
}

TEST_F(LiveServer, PredictOverHttpEqualsInProcess) {
  auto c = client();
  Rng rng(3);
  const auto& enc = small_bundle().encoder;
  for (int i = 0; i < 50; ++i) {
    json req = {{"kota", enc.kota.tokens()[rng.below(enc.kota.size())]},
                {"area", enc.area.tokens()[rng.below(enc.area.size())]},
                {"type_kos", enc.type_kos.tokens()[rng.below(enc.type_kos.size())]},
                {"facilities", {"wifi", "kasur", "lemari"}}};
    auto r = c.Post("/api/predict", req.dump(), "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(json::parse(r->body), service::handle_predict(small_bundle(), req.dump()).body);
  }
}

TEST_F(LiveServer, ErrorStatuses) {
  auto c = client();
  auto bad = c.Post("/api/predict", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(json::parse(bad->body).contains("error"));

  auto wrong_method = c.Get("/api/predict");
  ASSERT_TRUE(wrong_method);
  EXPECT_EQ(wrong_method->status, 405);
  auto wrong_method2 = c.Post("/api/metadata", "{}", "application/json");
  ASSERT_TRUE(wrong_method2);
  EXPECT_EQ(wrong_method2->status, 405);

  auto big = c.Post("/api/predict", std::string(service::kMaxBodyBytes + 10, 'x'), "application/json");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);

  auto missing = c.Get("/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_TRUE(json::parse(missing->body).contains("error"));

  auto pre = c.Options("/api/predict");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Origin"), "*");
}
