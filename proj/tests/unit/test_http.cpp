// The ebr binary end to end: HTTP routes, bearer token, CLI vs HTTP output,
// exit codes.

#include <doctest.h>
#include <httplib.h>

#include <fstream>
#include <random>

#include "ebr/trainer.hpp"
#include "process.hpp"
#include "service_fixture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = EBR_BIN;
const std::string kToken = "s3cret";

struct Setup {
  fs::path dir;
  fs::path config;
};

Setup make_setup(const std::string& tag, const std::string& token = kToken) {
  Setup s;
  s.dir = fixture::fresh_dir(tag);
  for (const auto& [name, m] : fixture::models()) ebr::save_model(s.dir / "models", name, m);
  s.config = s.dir / "service.json";
  std::ofstream(s.config) << json{{"data_dir", (s.dir / "data").string()},
                                  {"model_manifest", (s.dir / "models" / "manifest.json").string()},
                                  {"api_token", token}}
                                 .dump();
  return s;
}

httplib::Headers auth() { return {{"Authorization", "Bearer " + kToken}}; }

json post(httplib::Client& c, const std::string& path, const std::string& body, int want) {
  const auto r = c.Post(path, auth(), body, "application/json");
  REQUIRE(r);
  CHECK_MESSAGE(r->status == want, path << " -> " << r->body);
  return json::parse(r->body);
}

json get(httplib::Client& c, const std::string& path) {
  const auto r = c.Get(path);
  REQUIRE(r);
  REQUIRE_MESSAGE(r->status == 200, path << " -> " << r->body);
  return json::parse(r->body);
}

// Three prototypes with a dozen near copies each, two seeds on the first.
void populate(httplib::Client& c) {
  std::mt19937_64 rng(3);
  for (int g = 0; g < 3; ++g) {
    const auto p = fixture::prototype(rng);
    for (int i = 0; i < 12; ++i) {
      const auto id = "g" + std::to_string(g) + "_" + std::to_string(i);
      post(c, "/videos", fixture::near(id, p, 0.02, rng, g * 100 + i), 201);
    }
  }
  post(c, "/trends", fixture::body({{"id", "t"}, {"modality", "multimodal"}}), 201);
  post(c, "/trends/t/seeds", fixture::body({{"item_id", "g0_0"}}), 201);
  post(c, "/trends/t/seeds", fixture::body({{"item_id", "g0_1"}}), 201);
}

}  // namespace

TEST_CASE("mutations need the bearer token, reads do not") {
  const auto s = make_setup("http_auth");
  auto server = proc::start_server(kBin, {"--config", s.config.string()});
  httplib::Client c("127.0.0.1", server.port);
  std::mt19937_64 rng(1);
  const auto p = fixture::prototype(rng);
  const auto body = fixture::video("a", p.visual, p.text, 0);

  auto r = c.Post("/videos", body, "application/json");
  REQUIRE(r);
  CHECK(r->status == 401);
  CHECK(json::parse(r->body)["error"]["code"] == "unauthorized");
  r = c.Post("/videos", {{"Authorization", "Bearer wrong"}}, body, "application/json");
  CHECK(r->status == 401);
  post(c, "/videos", body, 201);
  post(c, "/videos", body, 200);

  CHECK(get(c, "/metrics")["videos"] == 1);
  CHECK(get(c, "/healthz")["status"] == "ok");

  r = c.Get("/nope");
  CHECK(r->status == 404);
  CHECK(json::parse(r->body)["error"]["code"] == "not_found");
  r = c.Post("/trends", auth(), "{not json", "application/json");
  CHECK(r->status == 400);
  CHECK(json::parse(r->body)["error"]["code"] == "malformed_json");
  r = c.Get("/trends/missing/candidates");
  CHECK(r->status == 404);
  r = c.Get("/trends/t/candidates?k=abc");
  CHECK(r->status == 422);

  CHECK(proc::stop(server, SIGTERM) == 0);
}

TEST_CASE("routes over one trend, and the CLI reads the same state") {
  const auto s = make_setup("http_routes");
  auto server = proc::start_server(kBin, {"--config", s.config.string()});
  httplib::Client c("127.0.0.1", server.port);
  populate(c);

  const auto cands = get(c, "/trends/t/candidates?k=20");
  REQUIRE(cands["candidates"].size() == 20);
  // Seeds themselves are not candidates.
  for (std::size_t i = 0; i < 10; ++i) CHECK(cands["candidates"][i]["video_id"].get<std::string>().rfind("g0_", 0) == 0);
  CHECK(get(c, "/trends/t/candidates?k=5&offset=3")["candidates"][0] == cands["candidates"][3]);

  const auto cli = proc::run(kBin, {"retrieve", "--config", s.config.string(), "--trend", "t", "-k", "20"});
  REQUIRE(cli.code == 0);
  CHECK(json::parse(cli.out) == cands);

  const auto cluster = get(c, "/trends/t/suggestions/cluster?eps=0.1&min_pts=3&m=2");
  const auto cli_cluster = proc::run(kBin, {"seed", "cluster", "--config", s.config.string(), "--trend", "t", "--eps", "0.1",
                                            "--min-pts", "3", "--m", "2"});
  REQUIRE(cli_cluster.code == 0);
  CHECK(json::parse(cli_cluster.out) == cluster);

  // Seed add goes through the running service.
  const auto url = "http://127.0.0.1:" + std::to_string(server.port);
  auto added = proc::run(kBin, {"seed", "add", "--url", url, "--token", kToken, "--trend", "t", "--item", "g1_0"});
  CHECK(added.code == 0);
  CHECK(get(c, "/trends/t")["seeds"].size() == 3);
  added = proc::run(kBin, {"seed", "add", "--url", url, "--trend", "t", "--item", "g1_1"});
  CHECK(added.code == 1);

  // Tiers, labels, the cycle, pause and resume.
  const auto tiers = json{{"flag_review", 0.5}, {"restrict", 0.6}, {"escalate", 0.7}};
  auto r = c.Put("/trends/t/tiers", auth(), tiers.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(get(c, "/trends/t")["tiers"] == tiers);
  r = c.Put("/trends/t/tiers", auth(), json{{"flag_review", 0.9}, {"restrict", 0.6}, {"escalate", 0.7}}.dump(),
            "application/json");
  CHECK(r->status == 422);

  const auto pre = get(c, "/trends/t/candidates?k=40")["candidates"];
  int labels = 0;
  for (const auto& e : pre) {
    if (e["decision"].is_null()) continue;
    post(c, "/feedback",
         fixture::body({{"video_id", e["video_id"]}, {"trend_id", "t"}, {"verdict", "true_positive"}, {"event_time", 1000}}),
         201);
    ++labels;
  }
  CHECK(labels > 0);
  const auto report = post(c, "/trends/t/feedback-cycle", fixture::body({{"event_time", 2000}}), 200);
  CHECK(report["removed"].empty());
  const auto metrics = get(c, "/metrics");
  CHECK(metrics["counters"]["labels"] == labels);
  CHECK(metrics["feedback_cycles"].size() == 1);
  CHECK(metrics["trends"]["t"]["seed_count"] == 3);
  CHECK(metrics.contains("latency_ms"));

  const auto hist = get(c, "/trends/t/suggestions/historical?at=2000&min_n=1&threshold=0.5");
  CHECK(hist.is_object());

  post(c, "/trends/t/pause", "{}", 200);
  CHECK(get(c, "/trends/t")["state"] == "paused");
  post(c, "/trends/t/resume", "{}", 200);
  CHECK(get(c, "/trends/t")["state"] == "active");

  const auto before = get(c, "/healthz")["state_hash"];
  CHECK(proc::stop(server, SIGTERM) == 0);
  auto again = proc::start_server(kBin, {"--config", s.config.string()});
  httplib::Client c2("127.0.0.1", again.port);
  CHECK(get(c2, "/healthz")["state_hash"] == before);
  CHECK(again.banner.find(before.get<std::string>()) != std::string::npos);
  proc::stop(again, SIGTERM);
}

TEST_CASE("exit codes") {
  const auto s = make_setup("http_exit");
  CHECK(proc::run(kBin, {"retrieve", "--config", (s.dir / "missing.json").string(), "--trend", "t"}).code == 2);
  CHECK(proc::run(kBin, {"serve", "--config", s.config.string(), "--listen", "nonsense"}).code == 2);

  auto server = proc::start_server(kBin, {"--config", s.config.string()});
  {
    httplib::Client c("127.0.0.1", server.port);
    populate(c);
  }
  proc::stop(server, SIGTERM);
  const auto log = s.dir / "data" / "events.jsonl";
  std::string text;
  {
    std::ifstream in(log);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto second_line = text.find('\n') + 1;
  text[second_line + 3] = '#';
  std::ofstream(log, std::ios::trunc) << text;
  CHECK(proc::run(kBin, {"retrieve", "--config", s.config.string(), "--trend", "t"}).code == 3);
  CHECK(proc::run(kBin, {"serve", "--config", s.config.string(), "--listen", "127.0.0.1:0"}).code == 3);
}
