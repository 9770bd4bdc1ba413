#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "mcrf/service_http.hpp"
#include "oracles.hpp"

using namespace mcrf;

namespace {

using K = ModelKind;

constexpr int kRows = 60, kCols = 50;

Raster reference() {
  return generate_blob_reference(kRows, kCols, 3, ProportionVector({0.25, 0.35, 0.4}), 30, 17, 10.0);
}

FitSession session() {
  const auto ref = reference();
  auto s = random_sample(ref, 150, 5, 3);
  return make_session("small", ClassCatalog::anonymous(3), std::move(s), LagBinSpec{2.0, 30.0, 10.0}, 8.0, std::nullopt, ref);
}

// Common-range exponential set, always valid.
json valid_document() {
  const ProportionVector p({0.25, 0.35, 0.4});
  std::vector<ModelDescriptor> e;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      e.push_back(j == 2 ? ModelDescriptor::rest()
                         : ModelDescriptor::basic(i == j ? K::ExponentialAuto : K::ExponentialCross, p[static_cast<std::size_t>(j)], 12));
  return modelset_to_json(TransiogramModelSet(3, std::move(e), p));
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    path = std::filesystem::temp_directory_path() /
           ("mcrf_service_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + ".json");
    std::filesystem::remove(path);
    svc = std::make_unique<FitService>(path);
    svc->load(session());
  }
  void TearDown() override { std::filesystem::remove(path); }

  ServiceResponse call(const std::string& method, const std::string& route, const json& body = nullptr,
                       std::map<std::string, std::string> query = {}) {
    return svc->handle(method, route, query, body.is_null() ? std::string() : body.dump());
  }

  static bool has_field_error(const ServiceResponse& r, const std::string& field) {
    if (!r.body.contains("fields")) return false;
    for (const auto& f : r.body.at("fields"))
      if (f.at("field") == field) return true;
    return false;
  }

  std::filesystem::path path;
  std::unique_ptr<FitService> svc;
};

}  // namespace

TEST(ServiceNoSession, NotFound) {
  FitService svc(std::filesystem::temp_directory_path() / "mcrf_unused.json");
  const auto r = svc.handle("GET", "/session/summary", {}, "");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body["error"]["category"], "not_found");
}

TEST_F(ServiceTest, Summary) {
  const auto r = call("GET", "/session/summary");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["n_samples"], 150);
  EXPECT_EQ(r.body["classes"].size(), 3u);
  EXPECT_EQ(r.body["validation_lag"], 16.0);
  EXPECT_EQ(r.body["has_reference"], true);
  double sum = 0.0;
  for (const auto& v : r.body["proportions"]) sum += v.get<double>();
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST_F(ServiceTest, TransiogramMatchesEstimator) {
  const auto s = session();
  const auto m = estimate_experimental(s.samples, s.spec);
  for (int t = 0; t < 3; ++t)
    for (int h = 0; h < 3; ++h) {
      const auto r = call("GET", "/transiogram", nullptr, {{"tail", std::to_string(t)}, {"head", std::to_string(h)}});
      ASSERT_EQ(r.status, 200);
      const auto& bins = r.body["bins"];
      ASSERT_EQ(bins.size(), static_cast<std::size_t>(m.bin_count()));
      for (int b = 0; b < m.bin_count(); ++b) {
        const auto& bin = bins[static_cast<std::size_t>(b)];
        EXPECT_EQ(bin["lag"].get<double>(), m.lag(b));
        EXPECT_EQ(bin["count"].get<std::uint64_t>(), m.count(t, h, b));
        if (m.missing(t, h, b)) {
          EXPECT_TRUE(bin["probability"].is_null());
        } else {
          EXPECT_EQ(bin["probability"].get<double>(), *m.probability(t, h, b));
        }
      }
    }
  const auto bad = call("GET", "/transiogram", nullptr, {{"tail", "3"}});
  EXPECT_EQ(bad.status, 422);
  EXPECT_TRUE(has_field_error(bad, "tail"));
  EXPECT_TRUE(has_field_error(bad, "head"));
}

TEST_F(ServiceTest, EvaluateGammaCurve) {
  const json d{{"kind", "gamma_exponential"}, {"sill", 0.1765}, {"range", 80}, {"alpha", 4.0}, {"theta", 0.3}, {"weight", 1.4}};
  const int rest = call("GET", "/modelset").body["document"]["rest_head"][0];
  const int head = rest == 1 ? 2 : 1;
  const auto r = call("POST", "/model/evaluate", {{"tail", 0}, {"head", head}, {"descriptor", d}, {"lag_max", 200}, {"step", 0.5}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  double peak = 0.0;
  for (const auto& pt : r.body["curve"]) {
    const double h = pt[0], v = pt[1];
    EXPECT_NEAR(v, oracle::gamma_composite(0, 0.1765, 80, 4.0, 0.3, 1.4, h), 1e-12);
    peak = std::max(peak, v);
  }
  EXPECT_GT(peak, 0.1765);
  EXPECT_EQ(r.body["curve"].size(), 401u);
  EXPECT_EQ(r.body["rest_head"], rest);
  for (std::size_t i = 0; i < r.body["rest"].size(); ++i)
    EXPECT_NEAR(r.body["rest"][i][1].get<double>() + r.body["row_sum"][i][1].get<double>(), 1.0, 1e-12);
}

TEST_F(ServiceTest, EvaluateZeroWeightIsBaseShape) {
  const int rest = call("GET", "/modelset").body["document"]["rest_head"][0];
  const int head = rest == 1 ? 2 : 1;
  const json g{{"kind", "gamma_exponential"}, {"sill", 0.3}, {"range", 20}, {"alpha", 2.0}, {"theta", 0.5}, {"weight", 0.0}};
  const json e{{"kind", "exponential_cross"}, {"sill", 0.3}, {"range", 20}};
  const auto a = call("POST", "/model/evaluate", {{"tail", 0}, {"head", head}, {"descriptor", g}});
  const auto b = call("POST", "/model/evaluate", {{"tail", 0}, {"head", head}, {"descriptor", e}});
  ASSERT_EQ(a.status, 200);
  ASSERT_EQ(a.body["curve"].size(), b.body["curve"].size());
  for (std::size_t i = 0; i < a.body["curve"].size(); ++i)
    EXPECT_NEAR(a.body["curve"][i][1].get<double>(), b.body["curve"][i][1].get<double>(), 1e-15);
  EXPECT_TRUE(a.body["rmse_all"].is_number());
}

TEST_F(ServiceTest, EvaluateRejectsBadFields) {
  const int rest = call("GET", "/modelset").body["document"]["rest_head"][0];
  const int head = rest == 1 ? 2 : 1;
  const json e{{"kind", "exponential_cross"}, {"sill", 0.3}, {"range", 20}};
  auto r = call("POST", "/model/evaluate", {{"tail", 0}, {"head", head}, {"descriptor", e}, {"step", 0}});
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(has_field_error(r, "step"));
  r = call("POST", "/model/evaluate", {{"tail", 0}, {"head", rest}, {"descriptor", e}});
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(has_field_error(r, "descriptor.kind"));
  r = call("POST", "/model/evaluate", {{"tail", 0}, {"head", head}, {"descriptor", {{"kind", "gamma_gaussian"}, {"sill", 0.2}}}});
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(has_field_error(r, "descriptor.range"));
  EXPECT_TRUE(has_field_error(r, "descriptor.alpha"));
  EXPECT_EQ(svc->handle("POST", "/model/evaluate", {}, "{oops").status, 400);
}

TEST_F(ServiceTest, EntryEditsAreDirtyUntilPersisted) {
  const int rest = call("GET", "/modelset").body["document"]["rest_head"][0];
  const int head = rest == 1 ? 2 : 1;
  const json e{{"kind", "exponential_cross"}, {"sill", 0.3}, {"range", 20}};
  ASSERT_EQ(call("PUT", "/draft/entry", {{"tail", 0}, {"head", head}, {"descriptor", e}}).status, 200);
  const auto m = call("GET", "/modelset");
  EXPECT_EQ(m.body["dirty"], json::array({{0, head}}));
  EXPECT_EQ(m.body["persisted"], false);
  bool seen = false;
  for (const auto& entry : m.body["document"]["entries"])
    if (entry["tail"] == 0 && entry["head"] == head) {
      seen = true;
      EXPECT_EQ(entry["sill"], 0.3);
    }
  EXPECT_TRUE(seen);
}

TEST_F(ServiceTest, PersistValidDocument) {
  const auto r = call("PUT", "/modelset", {{"document", valid_document()}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["persisted"], true);
  EXPECT_EQ(r.body["report"]["valid"], true);
  ASSERT_TRUE(std::filesystem::exists(path));
  const auto back = read_modelset(path);
  EXPECT_TRUE(back.report.valid);
  EXPECT_EQ(back.set.validated_lag_max(), 16.0);
  EXPECT_EQ(back.set.value(1, 0, 7.0), TransiogramModelSet(modelset_from_json(valid_document())).value(1, 0, 7.0));
  const auto m = call("GET", "/modelset");
  EXPECT_EQ(m.body["persisted"], true);
  EXPECT_TRUE(m.body["dirty"].empty());
}

TEST_F(ServiceTest, InvalidDocumentNamesRowAndLag) {
  auto doc = valid_document();
  for (auto& e : doc["entries"])
    if (e["tail"] == 1 && e["head"] == 0) e["sill"] = 0.9;  // row 1 closure goes negative
  const auto r = call("PUT", "/modelset", {{"document", doc}});
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["persisted"], false);
  EXPECT_FALSE(std::filesystem::exists(path));
  const auto& rep = r.body["report"];
  EXPECT_EQ(rep["valid"], false);
  ASSERT_FALSE(rep["issues"].empty());
  EXPECT_EQ(rep["issues"][0]["tail"], 1);
  EXPECT_TRUE(rep["issues"][0]["lag"].is_number());
  EXPECT_EQ(rep["min"]["tail"], 1);
  EXPECT_LT(rep["min"]["value"].get<double>(), 0.0);
}

TEST_F(ServiceTest, PreviewDeterministicAndConditioned) {
  ASSERT_EQ(call("PUT", "/modelset", {{"document", valid_document()}}).status, 200);
  const auto a = call("POST", "/preview", {{"seed", 11}});
  ASSERT_EQ(a.status, 200) << a.body.dump();
  EXPECT_EQ(a.body["downscale"], 1);
  EXPECT_EQ(a.body["grid"], call("POST", "/preview", {{"seed", 11}}).body["grid"]);
  EXPECT_NE(a.body["grid"], call("POST", "/preview", {{"seed", 12}}).body["grid"]);
  const auto s = session();
  const auto& grid = a.body["grid"];
  for (const auto& p : s.samples.points()) {
    const auto c = cell_of(s.geometry, {p.x, p.y});
    EXPECT_EQ(grid[static_cast<std::size_t>(kRows - 1 - c->row)][static_cast<std::size_t>(c->col)], p.cls);
  }
  EXPECT_TRUE(a.body["accuracy"]["overall"].is_number());
}

TEST_F(ServiceTest, PreviewDownscaleIsCapped) {
  ASSERT_EQ(call("PUT", "/modelset", {{"document", valid_document()}}).status, 200);
  const auto r = call("POST", "/preview", {{"seed", 3}, {"downscale", 1000}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const int f = r.body["downscale"];
  EXPECT_EQ(f, std::min(kRows, kCols) / kPreviewMinCells);
  EXPECT_EQ(r.body["nrows"], (kRows + f - 1) / f);
  ASSERT_FALSE(r.body["notices"].empty());
  EXPECT_NE(r.body["notices"][0].get<std::string>().find("capped"), std::string::npos);
  EXPECT_EQ(call("POST", "/preview", {{"seed", 3}, {"downscale", 0}}).status, 422);
  EXPECT_EQ(call("POST", "/preview", json::object()).status, 422);
}

TEST_F(ServiceTest, OverHttp) {
  httplib::Server srv;
  mount(srv, *svc);
  const int port = srv.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);
  const auto sum = cli.Get("/session/summary", {{"Origin", "http://localhost:5173"}});
  ASSERT_TRUE(sum);
  EXPECT_EQ(sum->status, 200);
  EXPECT_EQ(json::parse(sum->body)["dataset"], "small");
  EXPECT_EQ(sum->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  const auto remote = cli.Get("/session/summary", {{"Origin", "http://example.com"}});
  EXPECT_FALSE(remote->has_header("Access-Control-Allow-Origin"));
  const auto put = cli.Put("/modelset", json{{"document", valid_document()}}.dump(), "application/json");
  ASSERT_TRUE(put);
  EXPECT_EQ(put->status, 200);
  const auto missing = cli.Get("/nowhere");
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["error"]["category"], "not_found");
  srv.stop();
  t.join();
}
