#include <doctest.h>

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "ebr/errors.hpp"
#include "ebr/service.hpp"
#include "ebr/vector_io.hpp"
#include "service_fixture.hpp"

using namespace ebr;
using fixture::body;

namespace {

// 3 prototypes x 12 near copies, plus 20 unrelated videos.
struct Corpus {
  std::vector<std::vector<std::string>> groups;
  std::vector<std::string> others;
  std::vector<fixture::Prototype> group_protos;
  std::vector<fixture::Prototype> other_protos;
};

Corpus ingest_corpus(Service& svc, std::mt19937_64& rng, std::int64_t t0 = 1000) {
  Corpus c;
  std::int64_t t = t0;
  for (int g = 0; g < 3; ++g) {
    const auto p = fixture::prototype(rng);
    c.group_protos.push_back(p);
    c.groups.emplace_back();
    for (int i = 0; i < 12; ++i) {
      const auto id = "g" + std::to_string(g) + "_" + std::to_string(i);
      REQUIRE(svc.post_video(fixture::near(id, p, 0.05, rng, t++)).status == 201);
      c.groups.back().push_back(id);
    }
  }
  for (int i = 0; i < 20; ++i) {
    const auto p = fixture::prototype(rng);
    const auto id = "o" + std::to_string(i);
    REQUIRE(svc.post_video(fixture::video(id, p.visual, p.text, t++)).status == 201);
    c.others.push_back(id);
    c.other_protos.push_back(p);
  }
  return c;
}

const nlohmann::json kTightTiers{{"flag_review", 0.97}, {"restrict", 0.98}, {"escalate", 0.99}};

std::uint64_t seq(const Service& s) { return s.snapshot()->last_seq; }

nlohmann::json without_latency(nlohmann::json m) {
  m.erase("latency_ms");
  return m;
}

}  // namespace

TEST_CASE("trend lifecycle, decisions and candidates") {
  const auto dir = fixture::fresh_dir("svc");
  Service svc(fixture::config(dir), fixture::models());
  std::mt19937_64 rng(1);
  const auto c = ingest_corpus(svc, rng);

  auto r = svc.post_trend(body({{"id", "t1"}, {"name", "one"}, {"modality", "multimodal"}, {"tiers", kTightTiers}}));
  REQUIRE(r.status == 201);
  CHECK(r.body["state"] == "active");
  for (int i = 0; i < 2; ++i) {
    r = svc.post_seed("t1", body({{"item_id", c.groups[0][i]}, {"annotator", "a"}, {"event_time", 2000}}));
    REQUIRE(r.status == 201);
  }

  // Candidates come straight from retrieval over the live store.
  const auto snap = svc.snapshot();
  const Trend& t = snap->trends->at("t1");
  const auto expected = retrieve_trend(t, *snap->multimodal, kDefaultKPerSeed);
  r = svc.get_candidates("t1", 1000, 0);
  REQUIRE(r.status == 200);
  REQUIRE(r.body["candidates"].size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& e = r.body["candidates"][i];
    CHECK(e["video_id"] == expected[i].video_id);
    CHECK(e["score"].get<double>() == expected[i].score);
    CHECK(e["best_seed_id"] == expected[i].best_seed_id);
    CHECK(e["rank"] == i + 1);
    // Every candidate at or above the lowest tier got a decision when the seed was added.
    CHECK((expected[i].score >= 0.97) == !e["decision"].is_null());
    CHECK(e["label"] == "unlabeled");
  }
  // Paging is a window of the same ranking.
  const auto page = svc.get_candidates("t1", 5, 3).body;
  REQUIRE(page["candidates"].size() == std::min<std::size_t>(5, expected.size() - 3));
  CHECK(page["candidates"][0]["video_id"] == expected[3].video_id);
  CHECK(page["total"] == expected.size());

  std::size_t decided = 0;
  for (const auto& e : expected) decided += e.score >= 0.97;
  CHECK(snap->ledger->decision_count() >= decided);  // the second seed was decided before it became a seed
  CHECK(decided >= 10);  // near copies of the seeds

  const auto before = snap->ledger->decision_count();
  const auto& metrics = svc.get_metrics().body;
  CHECK(metrics["seed_count"] == 2);
  CHECK(metrics["trends"]["t1"]["precision_at_k"].is_null());
  CHECK(metrics["action_counts"]["flag_review"].get<std::uint64_t>() + metrics["action_counts"]["restrict"].get<std::uint64_t>() +
            metrics["action_counts"]["escalate"].get<std::uint64_t>() ==
        before);

  // Labels flow into P@k and seed stats.
  const auto first = expected[0].video_id;
  r = svc.post_feedback(body({{"video_id", first}, {"trend_id", "t1"}, {"verdict", "true_positive"}, {"event_time", 3000}}));
  REQUIRE(r.status == 201);
  CHECK(r.body["seed_id"] == expected[0].best_seed_id);
  CHECK(r.body["n"] == 1);
  CHECK(r.body["r"] == 1);
  const auto m2 = svc.get_metrics().body;
  CHECK(m2["trends"]["t1"]["precision_at_k"]["precision"] == 1.0);
  CHECK(m2["trends"]["t1"]["precision_at_k"]["effective_k"] == 1);
  CHECK(svc.get_candidates("t1", 1, 0).body["candidates"][0]["label"] == "true_positive");

  // Health carries the state hash.
  CHECK(svc.get_health().body["state_hash"] == svc.state_hash());
}

TEST_CASE("ingest decides against active trends") {
  const auto dir = fixture::fresh_dir("svc");
  Service svc(fixture::config(dir), fixture::models());
  std::mt19937_64 rng(2);
  const auto p = fixture::prototype(rng);
  REQUIRE(svc.post_video(fixture::near("s", p, 0.0, rng, 1)).status == 201);
  REQUIRE(svc.post_trend(body({{"id", "t"}, {"modality", "single"}, {"tiers", kTightTiers}})).status == 201);
  REQUIRE(svc.post_seed("t", body({{"item_id", "s"}})).status == 201);

  auto r = svc.post_video(fixture::near("copy", p, 0.001, rng, 5));
  REQUIRE(r.status == 201);
  REQUIRE(r.body["trend_scores"].size() == 1);
  CHECK(r.body["trend_scores"][0]["best_seed_id"] == "s");
  CHECK(r.body["trend_scores"][0]["tier"] == "escalate");
  const auto* d = svc.snapshot()->ledger->decision("t", "copy");
  REQUIRE(d);
  CHECK(d->tier == Tier::Escalate);
  CHECK(d->decided_at == 5);

  const auto q = fixture::prototype(rng);
  r = svc.post_video(fixture::video("far", q.visual, q.text, 6));
  REQUIRE(r.status == 201);
  CHECK(!svc.snapshot()->ledger->decision("t", "far"));

  // Paused trends do not decide.
  REQUIRE(svc.pause_trend("t", "").status == 200);
  REQUIRE(svc.post_video(fixture::near("copy2", p, 0.001, rng, 7)).status == 201);
  CHECK(!svc.snapshot()->ledger->decision("t", "copy2"));
}

TEST_CASE("identical requests replay without new events") {
  const auto dir = fixture::fresh_dir("svc");
  Service svc(fixture::config(dir), fixture::models());
  std::mt19937_64 rng(3);
  const auto p = fixture::prototype(rng);
  const auto v = fixture::near("a", p, 0.0, rng, 10);
  const auto v2 = fixture::near("b", p, 0.01, rng, 11);
  REQUIRE(svc.post_video(v).status == 201);
  REQUIRE(svc.post_video(v2).status == 201);
  const auto trend = body({{"name", "anon"}});
  const auto created = svc.post_trend(trend);
  REQUIRE(created.status == 201);
  const std::string id = created.body["id"];
  REQUIRE(svc.post_seed(id, body({{"item_id", "a"}})).status == 201);
  REQUIRE(svc.post_seed(id, body({{"item_id", "b"}})).status == 201);
  const auto tiers = body({{"flag_review", 0.9}, {"restrict", 0.95}, {"escalate", 0.99}});
  REQUIRE(svc.put_tiers(id, tiers).status == 200);
  const auto after_put = seq(svc);
  CHECK(svc.put_tiers(id, tiers).status == 200);
  CHECK(seq(svc) == after_put);
  REQUIRE(svc.pause_trend(id, "").status == 200);
  REQUIRE(svc.snapshot()->ledger->decision(id, "b"));
  const auto label = body({{"video_id", "b"}, {"trend_id", id}, {"verdict", "false_positive"}, {"event_time", 20}});
  REQUIRE(svc.post_feedback(label).status == 201);
  REQUIRE(svc.post_feedback_cycle(id, body({{"event_time", 30}})).status == 200);

  const auto s0 = seq(svc);
  const auto h0 = svc.state_hash();
  CHECK(svc.post_video(v).status == 200);
  CHECK(svc.post_trend(trend).status == 200);
  CHECK(svc.post_trend(trend).body["id"] == id);
  CHECK(svc.post_seed(id, body({{"item_id", "a"}})).status == 200);
  CHECK(svc.pause_trend(id, "").status == 200);
  CHECK(svc.post_feedback(label).status == 200);
  const auto cycle = svc.post_feedback_cycle(id, body({{"event_time", 30}}));
  CHECK(cycle.status == 200);
  CHECK(cycle.body["event_time"] == 30);
  CHECK(seq(svc) == s0);
  CHECK(svc.state_hash() == h0);

  // Same ids with different content conflict.
  CHECK(svc.post_video(fixture::near("a", p, 0.5, rng, 10)).status == 409);
  CHECK(svc.post_trend(body({{"id", id}, {"name", "other"}})).status == 409);
  CHECK(seq(svc) == s0);
}

TEST_CASE("error statuses") {
  const auto dir = fixture::fresh_dir("svc");
  Service svc(fixture::config(dir), fixture::models());
  std::mt19937_64 rng(4);
  const auto p = fixture::prototype(rng);
  REQUIRE(svc.post_video(fixture::near("a", p, 0.0, rng, 1)).status == 201);
  REQUIRE(svc.post_trend(body({{"id", "t"}})).status == 201);

  CHECK(svc.post_video("{not json").status == 400);
  CHECK(svc.post_video("[1,2]").status == 400);
  CHECK(svc.post_video(body({{"visual", p.visual}, {"text", p.text}})).status == 422);  // no id
  CHECK(svc.post_video(fixture::video("w", fixture::random_tokens(3, 5, rng), p.text, 1)).status == 422);
  CHECK(svc.post_video(body({{"id", "s"}, {"visual", {{1, "x"}}}, {"text", p.text}})).status == 422);
  auto r = svc.post_video(body({{"id", "e"}, {"visual", nlohmann::json::array()}, {"text", p.text}}));
  CHECK(r.status == 422);
  CHECK(r.body["error"]["code"] == "empty_tokens");

  CHECK(svc.get_trend("nope", std::nullopt).status == 404);
  CHECK(svc.post_seed("nope", body({{"item_id", "a"}})).status == 404);
  r = svc.post_seed("t", body({{"item_id", "missing"}}));
  CHECK(r.status == 404);
  CHECK(r.body["error"]["code"] == "unknown_item");
  CHECK(svc.delete_seed("t", "a", "").status == 404);
  CHECK(svc.get_candidates("nope", 10, 0).status == 404);
  CHECK(svc.put_tiers("t", body({{"flag_review", 0.9}, {"restrict", 0.8}, {"escalate", 0.95}})).status == 422);
  CHECK(svc.put_tiers("t", body({{"flag_review", 0.5}, {"restrict", 0.8}, {"escalate", 1.5}})).status == 422);
  r = svc.post_feedback(body({{"video_id", "a"}, {"trend_id", "t"}, {"verdict", "true_positive"}}));
  CHECK(r.status == 404);
  CHECK(r.body["error"]["code"] == "no_prior_decision");
  CHECK(svc.post_feedback(body({{"video_id", "a"}, {"trend_id", "t"}, {"verdict", "maybe"}})).status == 422);
  CHECK(svc.post_feedback(body({{"video_id", "a"}, {"trend_id", "zz"}, {"verdict", "true_positive"}})).status == 404);
  CHECK(svc.resume_trend("t", "").status == 200);  // already active

  // No seeds: empty candidate list rather than an error.
  r = svc.get_candidates("t", 10, 0);
  CHECK(r.status == 200);
  CHECK(r.body["candidates"].empty());
  CHECK(svc.get_candidates("t", 0, 0).status == 422);
}

TEST_CASE("last seed cannot be removed") {
  const auto dir = fixture::fresh_dir("svc");
  Service svc(fixture::config(dir), fixture::models());
  std::mt19937_64 rng(5);
  for (const auto* id : {"a", "b"}) {
    const auto p = fixture::prototype(rng);
    REQUIRE(svc.post_video(fixture::video(id, p.visual, p.text, 1)).status == 201);
  }
  REQUIRE(svc.post_trend(body({{"id", "t"}})).status == 201);
  REQUIRE(svc.post_seed("t", body({{"item_id", "a"}})).status == 201);
  REQUIRE(svc.post_seed("t", body({{"item_id", "b"}})).status == 201);
  CHECK(svc.delete_seed("t", "a", "").status == 200);
  auto r = svc.delete_seed("t", "b", "");
  CHECK(r.status == 409);
  CHECK(r.body["trend"]["state"] == "paused");
  CHECK(r.body["trend"]["needs_review"] == true);
  const auto t = svc.snapshot()->trends->at("t");
  CHECK(t.seeds.size() == 1);
  CHECK(t.state == TrendState::Paused);
  const auto s0 = seq(svc);
  CHECK(svc.delete_seed("t", "b", "").status == 409);
  CHECK(seq(svc) == s0);
  // Resume works once it has seeds; it still has "b".
  CHECK(svc.resume_trend("t", "").status == 200);
  CHECK(svc.snapshot()->trends->at("t").state == TrendState::Active);
}

TEST_CASE("restart folds the log to the same state") {
  const auto dir = fixture::fresh_dir("svc");
  std::string hash;
  nlohmann::json metrics, trends;
  std::mt19937_64 rng(6);
  {
    Service svc(fixture::config(dir), fixture::models());
    const auto c = ingest_corpus(svc, rng);
    REQUIRE(svc.post_trend(body({{"id", "t"}, {"modality", "multimodal"}, {"tiers", kTightTiers}})).status == 201);
    REQUIRE(svc.post_trend(body({{"id", "u"}, {"modality", "single"}, {"tiers", kTightTiers}})).status == 201);
    for (const auto& id : {c.groups[0][0], c.groups[0][1], c.others[0]}) svc.post_seed("t", body({{"item_id", id}, {"event_time", 5000}}));
    svc.post_seed("u", body({{"item_id", c.groups[1][0]}, {"event_time", 5000}}));
    for (const auto& e : svc.get_candidates("t", 100, 0).body["candidates"]) {
      if (e["decision"].is_null()) continue;
      const bool tp = e["video_id"].get<std::string>()[0] == 'g';
      svc.post_feedback(body({{"video_id", e["video_id"]}, {"trend_id", "t"}, {"verdict", tp ? "true_positive" : "false_positive"}, {"event_time", 6000}}));
    }
    svc.post_feedback_cycle("t", body({{"event_time", 7000}}));
    svc.delete_seed("u", c.groups[1][0], "");
    hash = svc.state_hash();
    metrics = without_latency(svc.get_metrics().body);
    trends = svc.get_trends().body;
  }
  {
    Service again(fixture::config(dir), fixture::models());
    CHECK(again.state_hash() == hash);
    CHECK(without_latency(again.get_metrics().body) == metrics);
    CHECK(again.get_trends().body == trends);
  }

  // A torn log tail and a vector record that never got its event are dropped.
  {
    std::ofstream log(dir / "events.jsonl", std::ios::app | std::ios::binary);
    log << R"({"seq":99999,"event_ti)";
  }
  append_vector_record(dir / "vectors_single.ebrv", fixture::small_config().out_dim, "ghost",
                       EmbeddingVector::from_unit(std::vector<float>(fixture::small_config().out_dim, 0.25f)));
  {
    Service again(fixture::config(dir), fixture::models());
    CHECK(again.state_hash() == hash);
    CHECK(!again.snapshot()->single->contains("ghost"));
    CHECK(again.get_trends().body == trends);
    // And new writes after recovery survive another restart.
    const auto p = fixture::prototype(rng);
    REQUIRE(again.post_video(fixture::video("after", p.visual, p.text, 9000)).status == 201);
    hash = again.state_hash();
  }
  Service third(fixture::config(dir), fixture::models());
  CHECK(third.state_hash() == hash);
  CHECK(read_vector_file(dir / "vectors_single.ebrv").size() == third.snapshot()->single->size());
}

TEST_CASE("a corrupt line before the tail aborts startup with its offset") {
  const auto dir = fixture::fresh_dir("svc");
  {
    Service svc(fixture::config(dir), fixture::models());
    std::mt19937_64 rng(7);
    for (int i = 0; i < 3; ++i) {
      const auto p = fixture::prototype(rng);
      svc.post_video(fixture::video("v" + std::to_string(i), p.visual, p.text, i));
    }
  }
  std::string text;
  {
    std::ifstream in(dir / "events.jsonl", std::ios::binary);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto second = text.find('\n') + 1;
  text[second + 2] = '@';
  {
    std::ofstream out(dir / "events.jsonl", std::ios::binary | std::ios::trunc);
    out << text;
  }
  try {
    Service svc(fixture::config(dir), fixture::models());
    FAIL("expected CorruptLogError");
  } catch (const CorruptLogError& e) {
    CHECK(e.byte_offset() == second);
  }
}

TEST_CASE("an event whose vector is missing is corruption") {
  const auto dir = fixture::fresh_dir("svc");
  {
    Service svc(fixture::config(dir), fixture::models());
    std::mt19937_64 rng(8);
    const auto p = fixture::prototype(rng);
    svc.post_video(fixture::video("v", p.visual, p.text, 1));
  }
  std::filesystem::remove(dir / "vectors_multimodal.ebrv");
  CHECK_THROWS_AS(Service(fixture::config(dir), fixture::models()), CorruptLogError);
}

TEST_CASE("concurrent seed additions are serialized") {
  const auto dir = fixture::fresh_dir("svc");
  Service svc(fixture::config(dir), fixture::models());
  std::mt19937_64 rng(9);
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) {
    const auto p = fixture::prototype(rng);
    ids.push_back("v" + std::to_string(i));
    REQUIRE(svc.post_video(fixture::video(ids.back(), p.visual, p.text, i)).status == 201);
  }
  REQUIRE(svc.post_trend(body({{"id", "t"}, {"tiers", kTightTiers}})).status == 201);
  std::vector<std::thread> workers;
  std::atomic<int> created{0};
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&, w] {
      for (int i = w; i < 40; i += 4) {  // pairs of workers overlap on items
        const auto r = svc.post_seed("t", body({{"item_id", ids[i % 40]}, {"event_time", 100}}));
        if (r.status == 201) ++created;
        (void)svc.get_candidates("t", 10, 0);
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(created == 40);
  CHECK(svc.snapshot()->trends->at("t").seeds.size() == 40);
  const auto hash = svc.state_hash();
  const auto log = read_event_log(dir / "events.jsonl");
  for (std::size_t i = 0; i < log.events.size(); ++i) CHECK(log.events[i].seq == i + 1);
  Service again(fixture::config(dir), fixture::models());
  CHECK(again.state_hash() == hash);
}

TEST_CASE("seed stats after many labels match an independent count") {
  const auto dir = fixture::fresh_dir("svc");
  auto cfg = fixture::config(dir);
  cfg.feedback.window = 400;
  Service svc(cfg, fixture::models());
  std::mt19937_64 rng(10);
  const auto c = ingest_corpus(svc, rng);
  const auto loose = nlohmann::json{{"flag_review", -1.0}, {"restrict", 0.5}, {"escalate", 0.9}};
  REQUIRE(svc.post_trend(body({{"id", "t"}, {"modality", "multimodal"}, {"tiers", loose}})).status == 201);
  for (const auto& id : {c.groups[0][0], c.groups[1][0], c.groups[2][0]}) {
    REQUIRE(svc.post_seed("t", body({{"item_id", id}, {"event_time", 0}})).status == 201);
  }
  const auto snap = svc.snapshot();
  std::vector<std::string> decided;
  std::map<std::string, std::string> seed_of;
  for (const auto& [key, d] : snap->ledger->decisions()) {
    decided.push_back(key.second);
    seed_of[key.second] = d.best_seed_id;
  }
  REQUIRE(decided.size() >= 50);

  // Oracle: the latest verdict per video, by label time, attributed to its decision's seed.
  struct L {
    bool tp;
    std::int64_t at;
  };
  std::map<std::string, L> latest;
  std::int64_t clock = 1000;
  for (int i = 0; i < 500; ++i) {
    const auto& v = decided[std::uniform_int_distribution<std::size_t>(0, decided.size() - 1)(rng)];
    const bool tp = std::bernoulli_distribution(0.6)(rng);
    clock += std::uniform_int_distribution<int>(0, 5)(rng);
    const auto r = svc.post_feedback(body({{"video_id", v}, {"trend_id", "t"}, {"verdict", tp ? "true_positive" : "false_positive"}, {"labeler", "l"}, {"event_time", clock}}));
    REQUIRE((r.status == 201 || r.status == 200));
    latest[v] = {tp, clock};
    std::uint64_t n = 0, rr = 0;
    for (const auto& [vid, l] : latest) {
      if (seed_of[vid] != r.body["seed_id"] || l.at < clock - 400 || l.at > clock) continue;
      ++n;
      rr += l.tp;
    }
    REQUIRE(r.body["n"] == n);
    REQUIRE(r.body["r"] == rr);
  }
  // Replay gives the same hash after all those relabels.
  const auto hash = svc.state_hash();
  Service again(cfg, fixture::models());
  CHECK(again.state_hash() == hash);
  CHECK(again.snapshot()->ledger->relabels().size() == svc.snapshot()->ledger->relabels().size());
}

TEST_CASE("feedback cycle prunes, tunes and replays") {
  const auto dir = fixture::fresh_dir("svc");
  auto cfg = fixture::config(dir);
  Service svc(cfg, fixture::models());
  std::mt19937_64 rng(11);
  const auto c = ingest_corpus(svc, rng);
  const auto strict = nlohmann::json{{"flag_review", 0.9997}, {"restrict", 0.9998}, {"escalate", 0.9999}};
  REQUIRE(svc.post_trend(body({{"id", "t"}, {"modality", "multimodal"}, {"tiers", strict}})).status == 201);
  REQUIRE(svc.post_seed("t", body({{"item_id", c.groups[0][0]}, {"event_time", 0}})).status == 201);
  REQUIRE(svc.post_seed("t", body({{"item_id", c.others[0]}, {"event_time", 0}})).status == 201);
  REQUIRE(svc.put_tiers("t", body(kTightTiers)).status == 200);
  // New near copies of both seeds are decided against the two-seed trend.
  for (int i = 0; i < 6; ++i) {
    svc.post_video(fixture::near("ng" + std::to_string(i), c.group_protos[0], 0.02, rng, 50));
    svc.post_video(fixture::near("no" + std::to_string(i), c.other_protos[0], 0.02, rng, 50));
  }
  // Everything attributed to the stray seed is a false positive, the rest true.
  const auto labeled = svc.snapshot();
  REQUIRE(labeled->ledger->decision_count() >= 8);
  for (const auto& [key, d] : labeled->ledger->decisions()) {
    const bool tp = d.best_seed_id == c.groups[0][0];
    svc.post_feedback(body({{"video_id", key.second}, {"trend_id", "t"}, {"verdict", tp ? "true_positive" : "false_positive"}, {"event_time", 100}}));
  }
  const auto r = svc.post_feedback_cycle("t", body({{"event_time", 200}}));
  REQUIRE(r.status == 200);
  CHECK(r.body["removed"] == nlohmann::json::array({c.others[0]}));
  const auto t = svc.snapshot()->trends->at("t");
  CHECK(t.seed_ids() == std::vector<std::string>{c.groups[0][0]});
  const auto m = svc.get_metrics().body;
  CHECK(m["feedback_cycles"].size() == 1);
  CHECK(m["seed_removals"].size() == 1);
  CHECK(m["seed_removals"][0]["reason"] == "feedback_prune");
  const auto hash = svc.state_hash();
  Service again(cfg, fixture::models());
  CHECK(again.state_hash() == hash);
  CHECK(again.snapshot()->trends->at("t") == t);
}

TEST_CASE("seed suggestions") {
  const auto dir = fixture::fresh_dir("svc");
  Service svc(fixture::config(dir), fixture::models());
  std::mt19937_64 rng(12);
  const auto c = ingest_corpus(svc, rng);
  REQUIRE(svc.post_trend(body({{"id", "t"}, {"modality", "multimodal"}})).status == 201);

  auto r = svc.get_cluster_suggestions("t", 0.02, 5, 3, "all");
  REQUIRE(r.status == 200);
  CHECK(r.body["items"] == 56);
  CHECK(r.body["clusters"].size() >= 3);
  std::set<char> groups;
  for (const auto& cl : r.body["clusters"]) {
    CHECK(cl["suggestions"].size() <= 3);
    for (const auto& s : cl["suggestions"]) groups.insert(s["item_id"].get<std::string>()[1]);
  }
  CHECK(groups.size() >= 3);
  CHECK(svc.get_cluster_suggestions("t", 0.02, 5, 3, "candidates").body["items"] == 0);
  CHECK(svc.get_cluster_suggestions("t", 0.02, 5, 3, "bogus").status == 422);
  CHECK(svc.get_cluster_suggestions("nope", 0.02, 5, 3, "all").status == 404);

  const auto loose = nlohmann::json{{"flag_review", -1.0}, {"restrict", 0.5}, {"escalate", 0.9}};
  REQUIRE(svc.put_tiers("t", body(loose)).status == 200);
  REQUIRE(svc.post_seed("t", body({{"item_id", c.groups[0][0]}, {"event_time", 0}})).status == 201);
  REQUIRE(svc.post_seed("t", body({{"item_id", c.others[0]}, {"event_time", 0}})).status == 201);
  const auto labeled = svc.snapshot();
  for (const auto& [key, d] : labeled->ledger->decisions()) {
    const bool tp = d.best_seed_id == c.groups[0][0];
    svc.post_feedback(body({{"video_id", key.second}, {"trend_id", "t"}, {"verdict", tp ? "true_positive" : "false_positive"}, {"event_time", 100}}));
  }
  r = svc.get_historical_suggestions("t", 200, 1000, 0.8, 3);
  REQUIRE(r.status == 200);
  CHECK(r.body["suggestions"] == nlohmann::json::array({c.groups[0][0]}));
  CHECK(r.body["candidates"].size() == 2);
  r = svc.get_historical_suggestions("t", 200, 1000, 0.8, 1000);
  CHECK(r.body["suggestions"].empty());
}

TEST_CASE("service config") {
  const auto dir = fixture::fresh_dir("cfg");
  const auto file = dir / "svc.json";
  {
    std::ofstream out(file);
    out << R"({"listen_addr": "0.0.0.0:9000", "data_dir": "/tmp/x", "model_manifest": "m.json", "k_per_seed": 50,
               "feedback": {"min_n": 7}})";
  }
  auto c = load_service_config(file, {});
  CHECK(c.listen_addr == "0.0.0.0:9000");
  CHECK(c.k_per_seed == 50);
  CHECK(c.feedback.min_n == 7);
  c = load_service_config(file, {{"DATA_DIR", "/d"}, {"LISTEN_ADDR", "1.2.3.4:5"}, {"MODEL_MANIFEST", "z"}});
  CHECK(c.data_dir == "/d");
  CHECK(c.listen_addr == "1.2.3.4:5");
  CHECK(c.model_manifest == "z");
  CHECK_THROWS_AS(load_service_config(std::nullopt, {}), Error);  // no manifest
  CHECK_THROWS_AS(load_service_config(dir / "missing.json", {}), Error);
  CHECK_THROWS_AS(load_service_config(file, {{"LISTEN_ADDR", "nocolon"}}), Error);
  {
    std::ofstream out(file);
    out << "{bad";
  }
  CHECK_THROWS_AS(load_service_config(file, {}), Error);
}
