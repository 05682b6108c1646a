// ebr: data generation, training, offline retrieval and evaluation, and the
// HTTP service.

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "ebr/errors.hpp"
#include "ebr/experiments.hpp"
#include "ebr/http_server.hpp"
#include "ebr/seed_select.hpp"
#include "ebr/service.hpp"
#include "ebr/synth.hpp"
#include "ebr/vector_io.hpp"

using namespace ebr;
namespace fs = std::filesystem;

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCorruptLog = 3;

nlohmann::json read_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

std::vector<std::string> split_ids(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const auto piece = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

SynthConfig synth_preset(const std::string& name) {
  if (name == "table1-train") return default_table1_config().train_data;
  if (name == "table1-eval") return default_table1_config().eval_data;
  if (name == "sweep-train") return default_sweep_config().train_data;
  if (name == "sweep-eval") return default_sweep_config().eval_data;
  if (name == "losses") return default_loss_config().data;
  if (name == "default") return SynthConfig{};
  throw Error(Errc::InvalidConfig, "unknown preset '" + name + "'");
}

struct ServiceArgs {
  std::string config_file;
  std::string data_dir;
  std::string manifest;
};

void add_service_args(CLI::App* cmd, ServiceArgs& a) {
  cmd->add_option("--config", a.config_file, "Service config JSON");
  cmd->add_option("--data-dir", a.data_dir, "Overrides data_dir and DATA_DIR");
  cmd->add_option("--manifest", a.manifest, "Overrides model_manifest and MODEL_MANIFEST");
}

ServiceConfig resolve_service_config(const ServiceArgs& a) {
  auto env = service_env();
  if (!a.data_dir.empty()) env["DATA_DIR"] = a.data_dir;
  if (!a.manifest.empty()) env["MODEL_MANIFEST"] = a.manifest;
  return load_service_config(a.config_file.empty() ? std::nullopt : std::optional<fs::path>(a.config_file), env);
}

std::map<std::string, Model> load_models(const ServiceConfig& c) {
  try {
    return load_manifest(c.model_manifest);
  } catch (const Error& e) {
    throw Error(Errc::InvalidConfig, std::string("model manifest: ") + e.what());
  }
}

Service open_read_only(const ServiceArgs& a) {
  auto cfg = resolve_service_config(a);
  cfg.read_only = true;
  return Service(cfg, load_models(cfg));
}

int print_response(const ApiResponse& r) {
  std::cout << r.body.dump(2) << '\n';
  return r.status < 400 ? 0 : kExitError;
}

// ---------------------------------------------------------------- commands

int cmd_gen(const std::string& preset, const std::string& config, const std::string& out,
            const std::optional<std::uint64_t>& seed) {
  auto j = to_json(synth_preset(preset));
  j.merge_patch(read_json(config));
  auto cfg = synth_config_from_json(j);
  if (seed) cfg.seed = *seed;
  const auto data = gen_synthetic(cfg);
  write_dataset_jsonl(out, data.records);
  std::cerr << "wrote " << data.records.size() << " records to " << out << '\n';
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& mode, const std::string& train_cfg,
              const std::string& model_cfg, const std::string& out_dir, std::string name) {
  const auto records = read_dataset_jsonl(data_path);
  const auto tc = train_config_from_json(read_json(train_cfg));
  auto mj = to_json(ModelConfig{});
  mj.merge_patch(read_json(model_cfg));
  const auto mc = model_config_from_json(mj);
  const auto m = train_mode_from_string(mode);
  const auto result = train(records, tc, m, mc);
  if (name.empty()) name = mode;
  save_model(out_dir, name, result.model);
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    std::cerr << "epoch " << e + 1 << " loss " << result.loss_history[e] << '\n';
  }
  std::cout << (fs::path(out_dir) / "manifest.json").string() << '\n';
  return 0;
}

int cmd_embed(const std::string& data_path, const std::string& manifest, const std::string& model, const std::string& out) {
  const auto models = load_manifest(manifest);
  const auto it = models.find(model);
  if (it == models.end()) throw Error(Errc::InvalidConfig, "no model '" + model + "' in " + manifest);
  const auto records = read_dataset_jsonl(data_path);
  write_vector_file(out, embed_dataset(records, it->second));
  std::cerr << "wrote " << records.size() << " vectors to " << out << '\n';
  return 0;
}

int cmd_cluster(const std::string& vectors, const ServiceArgs& svc, const std::string& trend, double eps,
                std::size_t min_pts, std::size_t m, const std::string& scope) {
  if (!vectors.empty()) {
    const auto store = read_vector_file(vectors);
    const auto a = dbscan(store, eps, min_pts);
    auto clusters = nlohmann::json::array();
    for (std::size_t c = 0; c < a.n_clusters; ++c) {
      clusters.push_back({{"cluster_id", c},
                          {"size", a.members(static_cast<int>(c)).size()},
                          {"suggestions", centroid_proximity_seeds(store, a, static_cast<int>(c), m)}});
    }
    std::cout << nlohmann::json{{"items", store.size()}, {"eps", eps}, {"min_pts", min_pts}, {"clusters", clusters}}.dump(2)
              << '\n';
    return 0;
  }
  if (trend.empty()) throw Error(Errc::InvalidConfig, "give --vectors, or --trend with a service config");
  return print_response(open_read_only(svc).get_cluster_suggestions(trend, eps, min_pts, m, scope));
}

int cmd_historical(const ServiceArgs& svc, const std::string& trend, std::optional<std::int64_t> at,
                   std::optional<std::int64_t> window, std::optional<double> threshold,
                   std::optional<std::uint64_t> min_n) {
  const auto s = open_read_only(svc);
  const auto& fb = s.config().feedback;
  return print_response(s.get_historical_suggestions(trend, at, window.value_or(fb.window),
                                                     threshold.value_or(fb.target_precision), min_n.value_or(fb.min_n)));
}

int cmd_seed_add(const std::string& url, const std::string& token, const std::string& trend, const std::string& item,
                 const std::string& annotator, std::optional<std::int64_t> event_time) {
  httplib::Client client(url);
  nlohmann::json body{{"item_id", item}, {"annotator", annotator}};
  if (event_time) body["event_time"] = *event_time;
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  const auto res = client.Post("/trends/" + trend + "/seeds", headers, body.dump(), "application/json");
  if (!res) throw Error(Errc::IoError, "request to " + url + " failed: " + httplib::to_string(res.error()));
  std::cout << res->body << '\n';
  return res->status < 400 ? 0 : kExitError;
}

int cmd_retrieve(const std::string& vectors, const std::string& seeds, const ServiceArgs& svc, const std::string& trend,
                 std::size_t k, std::size_t offset, std::size_t k_per_seed) {
  if (!vectors.empty()) {
    const auto store = read_vector_file(vectors);
    Trend t;
    t.id = trend.empty() ? "adhoc" : trend;
    for (const auto& id : split_ids(seeds)) t.add_seed(SeedRecord{id, SeedProvenance::Manual, "", 0});
    auto list = nlohmann::json::array();
    const auto ranked = retrieve_trend(t, store, k_per_seed);
    for (std::size_t i = offset; i < std::min(ranked.size(), offset + k); ++i) list.push_back(to_json(ranked[i]));
    std::cout << nlohmann::json{{"total", ranked.size()}, {"candidates", list}}.dump(2) << '\n';
    return 0;
  }
  if (trend.empty()) throw Error(Errc::InvalidConfig, "give --vectors and --seeds, or --trend with a service config");
  const auto s = open_read_only(svc);
  // Same body as GET /trends/{id}/candidates on this snapshot.
  return print_response(s.get_candidates(trend, k, offset));
}

template <class Report, class Config>
void write_methods(const fs::path& out, const std::string& name, const Report& r, const Config& c) {
  write_text(out / (name + ".csv"), metrics_csv(r));
  write_text(out / (name + ".json"), report_json(r, to_json(c), name).dump(2) + "\n");
  std::cout << metrics_csv(r);
}

int cmd_eval(const std::string& which, const std::string& config, const std::string& out, std::optional<std::size_t> repeats) {
  const auto overrides = read_json(config);
  if (which == "table1") {
    auto c = table1_config_from_json(overrides);
    if (repeats) c.repeats = *repeats;
    write_methods(out, "table1", run_table1_suite(c), c);
  } else if (which == "sweep") {
    auto c = sweep_config_from_json(overrides);
    if (repeats) c.repeats = *repeats;
    const auto r = run_sweep_suite(c);
    write_text(fs::path(out) / "sweep.csv", sweep_csv(r));
    write_text(fs::path(out) / "sweep.json", report_json(r, to_json(c)).dump(2) + "\n");
    write_text(fs::path(out) / "sweep.svg", sweep_svg(r));
    std::cout << sweep_csv(r);
  } else if (which == "losses") {
    auto c = loss_config_from_json(overrides);
    if (repeats) c.repeats = *repeats;
    write_methods(out, "losses", run_loss_suite(c), c);
  } else {
    throw Error(Errc::InvalidConfig, "unknown experiment " + which);
  }
  return 0;
}

int cmd_serve(const ServiceArgs& a, const std::string& listen) {
  auto cfg = resolve_service_config(a);
  if (!listen.empty()) cfg.listen_addr = listen;
  const auto [host, port] = split_listen_addr(cfg.listen_addr);

  // Signals are taken synchronously by a waiter thread; stop() is not signal-safe.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Service service(cfg, load_models(cfg));
  HttpServer server(service);
  const int bound = server.bind(host, port);
  std::cout << "listening on " << host << ":" << bound << " state_hash " << service.state_hash() << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  const bool ok = server.run();
  if (!ok) {
    // Listener died without a signal; unblock the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
  }
  waiter.join();
  return ok ? 0 : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-based trend retrieval"};
  app.require_subcommand(1);

  std::string preset = "default", config, out, data, mode = "single", train_cfg, model_cfg, name, manifest, model;
  std::optional<std::uint64_t> seed;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic labeled dataset (JSON lines)");
  gen->add_option("--preset", preset, "default, table1-train, table1-eval, sweep-train, sweep-eval, losses");
  gen->add_option("--config", config, "JSON merged over the preset");
  gen->add_option("--seed", seed, "RNG seed override");
  gen->add_option("--out", out, "Output path")->required();

  auto* tr = app.add_subcommand("train", "Train an encoder and write it to a model manifest");
  tr->add_option("--data", data, "Dataset (JSON lines)")->required();
  tr->add_option("--mode", mode, "single, multimodal, ntxent, classifier");
  tr->add_option("--train-config", train_cfg, "TrainConfig JSON");
  tr->add_option("--model-config", model_cfg, "ModelConfig JSON");
  tr->add_option("--out-dir", out, "Manifest directory")->required();
  tr->add_option("--name", name, "Manifest entry (default: mode)");

  auto* emb = app.add_subcommand("embed", "Embed a dataset into a vector file");
  emb->add_option("--data", data, "Dataset (JSON lines)")->required();
  emb->add_option("--manifest", manifest, "Model manifest")->required();
  emb->add_option("--model", model, "Manifest entry")->required();
  emb->add_option("--out", out, "Vector file")->required();

  ServiceArgs svc;
  std::string vectors, trend, scope = "all", url = "http://127.0.0.1:8080", token, item, annotator, seeds, listen;
  double eps = 0.2;
  std::size_t min_pts = 5, m = 3, k = kDefaultKPerSeed, offset = 0, k_per_seed = kDefaultKPerSeed;
  std::optional<std::int64_t> at, window, event_time;
  std::optional<double> threshold;
  std::optional<std::uint64_t> min_n;

  auto* seedcmd = app.add_subcommand("seed", "Seed selection");
  seedcmd->require_subcommand(1);
  auto* cluster = seedcmd->add_subcommand("cluster", "DBSCAN centroid-proximity suggestions");
  cluster->add_option("--vectors", vectors, "Vector file (standalone mode)");
  cluster->add_option("--trend", trend, "Trend id (service data dir mode)");
  add_service_args(cluster, svc);
  cluster->add_option("--eps", eps, "Neighbourhood radius, 1 - cosine");
  cluster->add_option("--min-pts", min_pts, "Core point threshold");
  cluster->add_option("--m", m, "Suggestions per cluster");
  cluster->add_option("--scope", scope, "all or candidates");

  auto* hist = seedcmd->add_subcommand("historical", "Seeds whose windowed precision passes a threshold");
  hist->add_option("--trend", trend, "Trend id")->required();
  add_service_args(hist, svc);
  hist->add_option("--at", at, "Window end (event time)");
  hist->add_option("--window", window, "Window length, seconds");
  hist->add_option("--threshold", threshold, "Minimum precision");
  hist->add_option("--min-n", min_n, "Minimum labeled retrievals");

  auto* add = seedcmd->add_subcommand("add", "Add a manual seed through a running service");
  add->add_option("--url", url, "Service base URL");
  add->add_option("--token", token, "API token");
  add->add_option("--trend", trend, "Trend id")->required();
  add->add_option("--item", item, "Item id")->required();
  add->add_option("--annotator", annotator, "Annotator");
  add->add_option("--event-time", event_time, "Event time");

  auto* ret = app.add_subcommand("retrieve", "Ranked candidates for a trend");
  ret->add_option("--vectors", vectors, "Vector file (standalone mode)");
  ret->add_option("--seeds", seeds, "Comma-separated seed ids (standalone mode)");
  ret->add_option("--trend", trend, "Trend id (service data dir mode)");
  add_service_args(ret, svc);
  ret->add_option("-k,--k", k, "Page size");
  ret->add_option("--offset", offset, "First rank, 0-based");
  ret->add_option("--k-per-seed", k_per_seed, "Neighbours per seed (standalone mode)");

  std::string which;
  std::optional<std::size_t> repeats;
  auto* ev = app.add_subcommand("eval", "Offline experiments: table1, sweep, losses");
  ev->add_option("experiment", which, "table1, sweep or losses")->required()->check(CLI::IsMember({"table1", "sweep", "losses"}));
  ev->add_option("--config", config, "JSON merged over the experiment defaults");
  ev->add_option("--out-dir", out, "Where CSV, JSON and SVG go")->required();
  ev->add_option("--repeats", repeats, "Override repeat count");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  add_service_args(serve, svc);
  serve->add_option("--listen", listen, "host:port, overrides the config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(preset, config, out, seed);
    if (*tr) return cmd_train(data, mode, train_cfg, model_cfg, out, name);
    if (*emb) return cmd_embed(data, manifest, model, out);
    if (*cluster) return cmd_cluster(vectors, svc, trend, eps, min_pts, m, scope);
    if (*hist) return cmd_historical(svc, trend, at, window, threshold, min_n);
    if (*add) return cmd_seed_add(url, token, trend, item, annotator, event_time);
    if (*ret) return cmd_retrieve(vectors, seeds, svc, trend, k, offset, k_per_seed);
    if (*ev) return cmd_eval(which, config, out, repeats);
    if (*serve) return cmd_serve(svc, listen);
  } catch (const CorruptLogError& e) {
    std::cerr << "corrupt event log at byte offset " << e.byte_offset() << ": " << e.what() << '\n';
    return kExitCorruptLog;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::InvalidConfig ? kExitConfig : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
