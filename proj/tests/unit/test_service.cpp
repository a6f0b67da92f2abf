#include <atomic>
#include <thread>

#include "doctest.h"
#include "hintbandit/errors.hpp"
#include "hintbandit/record_io.hpp"
#include "hintbandit/service.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace hintbandit;
using nlohmann::json;

namespace {

constexpr std::int64_t kStart = 1'700'000'000'000;

std::shared_ptr<const WordStore> mini_store() {
  static auto s = std::make_shared<const WordStore>(WordStore::load(
      hbtest::test_data("mini_vectors.txt"), hbtest::test_data("mini_freq.tsv")));
  return s;
}

ServiceConfig base_config(const std::filesystem::path& dir) {
  ServiceConfig c;
  c.embeddings = hbtest::test_data("mini_vectors.txt");
  c.frequencies = hbtest::test_data("mini_freq.tsv");
  c.corpus_dir = dir / "corpus";
  c.port = 0;
  return c;
}

struct Harness {
  explicit Harness(const std::string& name, std::shared_ptr<const WordStore> store = mini_store())
      : dir(hbtest::temp_dir(name)),
        now(std::make_shared<std::atomic<std::int64_t>>(kStart)),
        service(base_config(dir), std::move(store), nullptr, [n = now] { return n->load(); }, 7) {}

  std::string create(const std::string& condition, std::optional<std::uint64_t> seed = 11) {
    json body{{"participant_id", "p1"}, {"concept", "penguin"}, {"condition", condition}};
    if (seed) body["seed"] = *seed;
    auto r = service.create_session(body.dump());
    REQUIRE(r.status == 201);
    return json::parse(r.body).at("session_id").get<std::string>();
  }
  ServiceReply feature(const std::string& id, const std::string& phrase) {
    return service.submit_feature(id, json{{"phrase", phrase}}.dump());
  }
  void advance(std::int64_t ms) { *now += ms; }

  std::filesystem::path dir;
  std::shared_ptr<std::atomic<std::int64_t>> now;
  SessionService service;
};

}  // namespace

TEST_SUITE("service") {

TEST_CASE("create: valid, invalid and distinct ids") {
  Harness h("svc_create");
  auto r = h.service.create_session(
      R"({"participant_id":"p1","concept":"Penguin","condition":"hinted","seed":5})");
  CHECK(r.status == 201);
  auto j = json::parse(r.body);
  CHECK(j["config"]["concept"] == "penguin");
  CHECK(j["config"]["seed"] == 5);
  CHECK(j["config"]["start_ms"] == kStart);
  CHECK(j["config"]["source"] == "human");

  auto r2 = h.service.create_session(
      R"({"participant_id":"p1","concept":"penguin","condition":"unhinted"})");
  CHECK(r2.status == 201);
  CHECK(json::parse(r2.body)["session_id"] != j["session_id"]);
  CHECK(json::parse(r2.body)["config"]["seed"].get<std::uint64_t>() < (std::uint64_t(1) << 53));

  for (const char* bad :
       {R"({"participant_id":"p1","concept":"penguin","condition":"hintedd"})",
        R"({"participant_id":"p1","concept":"penguin"})",
        R"({"participant_id":"","concept":"penguin","condition":"hinted"})",
        R"({"participant_id":"p1","concept":"zebra","condition":"hinted"})",
        R"({"participant_id":"p1","concept":"penguin","condition":"hinted","seed":-1})",
        R"({"participant_id":"p1","concept":"penguin","condition":"hinted","seed":9007199254740992})",
        R"({"participant_id":"p1","concept":"penguin","condition":"hinted","extra":1})",
        R"({"participant_id":"p1","concept":"penguin","condition":"hinted","block":3})",
        R"([1,2])", "not json", "{\"participant_id\":\"\xff\"}"}) {
    CAPTURE(bad);
    auto e = h.service.create_session(bad);
    CHECK(e.status == 400);
    CHECK(json::parse(e.body).contains("error"));
  }
}

TEST_CASE("no store: 503") {
  Harness h("svc_nostore", nullptr);
  CHECK(h.service.health().status == 503);
  CHECK(h.service
            .create_session(R"({"participant_id":"p1","concept":"penguin","condition":"hinted"})")
            .status == 503);
  h.service.set_store(mini_store());
  CHECK(h.service.health().status == 200);
}

TEST_CASE("features: new, duplicate, unknown id, expiry") {
  Harness h("svc_features");
  const auto id = h.create("hinted");
  auto a = h.feature(id, "has feathers");
  CHECK(a.status == 200);
  CHECK(json::parse(a.body)["is_duplicate"] == false);
  auto b = h.feature(id, "Has Feathers!");
  CHECK(b.status == 200);
  CHECK(json::parse(b.body)["is_duplicate"] == true);
  CHECK(h.feature("0123456789abcdef", "x").status == 404);
  CHECK(h.service.submit_feature(id, R"({"text":"x"})").status == 400);

  h.advance((1200 + 5) * 1000);
  CHECK(h.feature(id, "lays eggs").status == 200);  // exactly at the deadline
  h.advance(1);
  CHECK(h.feature(id, "lays eggs").status == 409);
  CHECK(h.service.request_hint(id).status == 409);
  auto fin = h.service.finish(id);
  CHECK(fin.status == 200);
  CHECK(json::parse(fin.body)["events"].back()["reason"] == "time_up");
}

TEST_CASE("hints: size, arm, increasing t, unhinted") {
  Harness h("svc_hints");
  const auto id = h.create("hinted");
  h.feature(id, "black and white");
  std::uint64_t last_t = 0;
  for (int i = 0; i < 3; ++i) {
    h.advance(1000);
    auto r = h.service.request_hint(id);
    REQUIRE(r.status == 200);
    auto j = json::parse(r.body);
    CHECK(j["words"].size() == 5);
    const auto arm = j["arm"].get<std::string>();
    CHECK((arm == "semantic" || arm == "frequency" || arm == "diversity"));
    CHECK(j["t"].get<std::uint64_t>() > last_t);
    last_t = j["t"].get<std::uint64_t>();
  }
  const auto un = h.create("unhinted");
  CHECK(h.service.request_hint(un).status == 409);
  CHECK(h.service.request_hint("ffffffffffffffff").status == 404);
}

TEST_CASE("finish: record persisted, double finish, closed session") {
  Harness h("svc_finish");
  const auto id = h.create("hinted");
  h.feature(id, "swims");
  h.advance(500);
  h.service.request_hint(id);
  h.advance(500);
  h.feature(id, "eats fish");
  h.advance(500);
  auto r = h.service.finish(id);
  REQUIRE(r.status == 200);
  CHECK(h.service.finish(id).status == 409);
  CHECK(h.feature(id, "more").status == 409);
  CHECK(h.service.request_hint(id).status == 409);
  CHECK(h.service.finish("aaaaaaaaaaaaaaaa").status == 404);
  CHECK(h.service.finish(h.create("hinted"), R"({"reason":"bored"})").status == 400);

  auto corpus = read_corpus(h.service.corpus_path());
  REQUIRE(corpus.size() == 1);
  CHECK(dump_record(corpus[0]) == r.body);
  CHECK(json::parse(r.body) == json::parse(dump_record(corpus[0])));
  CHECK(corpus[0].hints().at(0)->loss == 0);
}

TEST_CASE("service records equal driving the engine directly") {
  Harness h("svc_adapter");
  const auto id = h.create("hinted", 2024);
  const std::vector<std::pair<std::int64_t, std::string>> script = {
      {4000, "is black and white"}, {9000, "has feathers"}, {15000, ""},
      {22000, "swims in the cold ocean"}, {30000, "eats fish"}, {41000, ""},
      {47000, "eats fish"}, {52000, ""}, {53000, ""}, {60000, "lays an egg"}};
  std::int64_t t = 0;
  for (const auto& [at, phrase] : script) {
    h.advance(at - t);
    t = at;
    if (phrase.empty()) {
      CHECK(h.service.request_hint(id).status == 200);
    } else {
      CHECK(h.feature(id, phrase).status == 200);
    }
  }
  h.advance(61000 - t);
  auto rec = parse_record(h.service.finish(id).body);

  SessionConfig c = rec.config;
  Session direct(c, *mini_store());
  for (const auto& [at, phrase] : script) {
    if (phrase.empty()) {
      direct.request_hint(kStart + at);
    } else {
      direct.submit_feature(phrase, kStart + at);
    }
  }
  CHECK(dump_record(direct.finalize(kStart + 61000)) == dump_record(rec));
  CHECK(dump_record(replay(rec, *mini_store())) == dump_record(rec));
}

TEST_CASE("concurrent requests to one session serialize") {
  Harness h("svc_concurrent");
  const auto id = h.create("hinted");
  h.feature(id, "black and white");
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      for (int k = 0; k < 10; ++k) {
        if (k % 3 == 0) {
          h.service.request_hint(id);
        } else {
          h.feature(id, "phrase " + std::to_string(i) + " " + std::to_string(k));
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  auto rec = parse_record(h.service.finish(id).body);
  CHECK(rec.features().size() == 1 + 8 * 6);
  const auto hints = rec.hints();
  for (std::size_t i = 0; i < hints.size(); ++i) {
    CHECK(hints[i]->t == i + 1);
    CHECK(hints[i]->loss.has_value());
  }
  CHECK(dump_record(replay(rec, *mini_store())) == dump_record(rec));
}

TEST_CASE("config file and environment overrides") {
  auto dir = hbtest::temp_dir("svc_config");
  std::filesystem::copy_file(hbtest::test_data("mini_vectors.txt"), dir / "v.txt");
  std::filesystem::copy_file(hbtest::test_data("mini_freq.tsv"), dir / "f.tsv");
  hbtest::write_text(dir / "service.json", R"({"port": 9001, "embeddings": "v.txt",
    "frequencies": "f.tsv", "corpus_dir": "out", "session": {"duration_s": 10}})");
  auto c = load_service_config(dir / "service.json");
  CHECK(c.port == 9001);
  CHECK(c.embeddings == dir / "v.txt");
  CHECK(c.corpus_dir == dir / "out");
  CHECK(c.duration_s == 10);
  CHECK_NOTHROW(c.validate());

  std::map<std::string, std::string> env = {{"HINTBANDIT_PORT", "9100"},
                                            {"HINTBANDIT_CORPUS_DIR", "/tmp/elsewhere"}};
  apply_env_overrides(c, [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.port == 9100);
  CHECK(c.corpus_dir == "/tmp/elsewhere");
  env["HINTBANDIT_PORT"] = "80a";
  CHECK_THROWS_AS(apply_env_overrides(c, [&](const char* name) -> const char* {
                    auto it = env.find(name);
                    return it == env.end() ? nullptr : it->second.c_str();
                  }),
                  Error);

  c.port = 70000;
  CHECK_THROWS_AS(c.validate(), Error);
  c.port = 80;
  c.embeddings = dir / "missing.txt";
  CHECK_THROWS_AS(c.validate(), IoError);

  hbtest::write_text(dir / "bad.json", R"({"prot": 1})");
  CHECK_THROWS_AS(load_service_config(dir / "bad.json"), SchemaError);
  hbtest::write_text(dir / "broken.json", "{");
  CHECK_THROWS_AS(load_service_config(dir / "broken.json"), ParseError);
}

TEST_CASE("HTTP routes and static assets") {
  auto dir = hbtest::temp_dir("svc_http");
  std::filesystem::create_directories(dir / "static");
  hbtest::write_text(dir / "static" / "index.html", "<!doctype html><title>hb</title>");
  auto cfg = base_config(dir);
  cfg.static_dir = dir / "static";
  SessionService service(cfg, mini_store());
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto index = client.Get("/");
  REQUIRE(index);
  CHECK(index->status == 200);
  CHECK(index->body.find("<title>hb</title>") != std::string::npos);

  auto created = client.Post(
      "/sessions", R"({"participant_id":"web","concept":"penguin","condition":"hinted"})",
      "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto id = json::parse(created->body)["session_id"].get<std::string>();
  auto f = client.Post("/sessions/" + id + "/features", R"({"phrase":"has a beak"})",
                       "application/json");
  REQUIRE(f);
  CHECK(f->status == 200);
  CHECK(f->get_header_value("Content-Type").find("application/json") == 0);
  auto hint = client.Post("/sessions/" + id + "/hints", "", "application/json");
  REQUIRE(hint);
  CHECK(hint->status == 200);
  CHECK(json::parse(hint->body)["words"].size() == 5);
  auto fin = client.Post("/sessions/" + id + "/finish", "", "application/json");
  REQUIRE(fin);
  CHECK(fin->status == 200);
  auto again = client.Post("/sessions/" + id + "/finish", "", "application/json");
  REQUIRE(again);
  CHECK(again->status == 409);
  auto missing = client.Post("/sessions/0000000000000000/hints", "", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  th.join();
  CHECK(read_corpus(service.corpus_path()).size() == 1);
}

}  // TEST_SUITE
