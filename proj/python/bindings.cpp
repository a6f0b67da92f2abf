#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hintbandit/analysis.hpp"
#include "hintbandit/arms.hpp"
#include "hintbandit/bandit.hpp"
#include "hintbandit/embedding_store.hpp"
#include "hintbandit/errors.hpp"
#include "hintbandit/record_io.hpp"
#include "hintbandit/session.hpp"
#include "hintbandit/simulant.hpp"
#include "hintbandit/text_normalizer.hpp"

namespace py = pybind11;
namespace hb = hintbandit;

namespace {

// Records cross the boundary as their JSONL line; the Python side decodes.
std::string event_json(const hb::SessionEvent& e) { return hb::to_json(e).dump(); }

std::vector<hb::SessionRecord> records_from_lines(const std::vector<std::string>& lines) {
  std::vector<hb::SessionRecord> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(hb::parse_record(l));
  return out;
}

hb::SessionConfig make_config(const std::string& participant_id, const std::string& concept_word,
                              const std::string& condition, std::uint64_t seed,
                              std::int64_t duration_s, std::uint32_t horizon,
                              std::size_t hint_size, int block, bool practice,
                              const std::string& source, std::int64_t start_ms) {
  hb::SessionConfig c;
  c.participant_id = participant_id;
  c.concept_word = concept_word;
  c.condition = hb::condition_from_string(condition);
  c.seed = seed;
  c.duration_s = duration_s;
  c.horizon = horizon;
  c.hint_size = hint_size;
  c.block = block;
  c.practice = practice;
  c.source = source;
  c.start_ms = start_ms;
  c.validate();
  return c;
}

py::tuple action_tuple(const hb::Action& a) {
  if (a.kind == hb::ActionKind::kFeature) return py::make_tuple("feature", a.text);
  return py::make_tuple(std::string(hb::to_string(a.kind)));
}

// Calls back into Python for each turn.
class PyChatClient : public hb::ChatClient {
 public:
  explicit PyChatClient(py::function fn) : fn_(std::move(fn)) {}
  std::string complete(const std::vector<hb::ChatMessage>& messages, std::size_t turn) override {
    py::list msgs;
    for (const auto& m : messages) {
      py::dict d;
      d["role"] = m.role;
      d["content"] = m.content;
      msgs.append(d);
    }
    try {
      return fn_(msgs, turn).cast<std::string>();
    } catch (const py::error_already_set& e) {
      throw hb::IoError(std::string("chat callback failed: ") + e.what());
    }
  }

 private:
  py::function fn_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive hint selection for feature listing";

  auto base = py::register_exception<hb::Error>(m, "HintbanditError");
  py::register_exception<hb::SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<hb::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<hb::UnknownWord>(m, "UnknownWord", base.ptr());
  py::register_exception<hb::ArmUnavailable>(m, "ArmUnavailable", base.ptr());
  auto state = py::register_exception<hb::StateError>(m, "StateError", base.ptr());
  py::register_exception<hb::SessionExpired>(m, "SessionExpired", state.ptr());
  py::register_exception<hb::IoError>(m, "IoError", base.ptr());

  py::class_<hb::Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform01", &hb::Rng::uniform01)
      .def("uniform_index", &hb::Rng::uniform_index, py::arg("n"));
  m.def("derive_seed", &hb::derive_seed, py::arg("base"), py::arg("stream"));

  py::class_<hb::Exp3Bandit>(m, "Exp3Bandit")
      .def(py::init<std::size_t, double>(), py::arg("arm_count"), py::arg("horizon"))
      .def_static("step_size", &hb::Exp3Bandit::step_size, py::arg("arm_count"),
                  py::arg("horizon"))
      .def_property_readonly("eta", &hb::Exp3Bandit::eta)
      .def_property_readonly("arm_count", &hb::Exp3Bandit::arm_count)
      .def_property_readonly("t", &hb::Exp3Bandit::t)
      .def("weights", &hb::Exp3Bandit::weights)
      .def("probabilities", &hb::Exp3Bandit::probabilities)
      .def(
          "sample",
          [](hb::Exp3Bandit& b, hb::Rng& rng, std::vector<bool> available) {
            std::unique_ptr<bool[]> mask(new bool[available.size()]);
            std::copy(available.begin(), available.end(), mask.get());
            return b.sample(rng, std::span<const bool>(mask.get(), available.size()));
          },
          py::arg("rng"), py::arg("available") = std::vector<bool>{})
      .def("cancel_pending", &hb::Exp3Bandit::cancel_pending)
      .def(
          "record_loss",
          [](hb::Exp3Bandit& b, std::size_t arm, int loss) {
            b.record_loss(arm, hb::Loss::from_int(loss));
          },
          py::arg("arm"), py::arg("loss"));

  py::class_<hb::WordStore>(m, "WordStore")
      .def_static("load", &hb::WordStore::load, py::arg("embeddings"), py::arg("frequencies"))
      .def_static(
          "synthetic",
          [](std::uint64_t seed, const std::vector<std::string>& concepts) {
            return hb::make_synthetic_world(seed, concepts);
          },
          py::arg("seed"), py::arg("concepts"))
      .def_property_readonly("size", [](const hb::WordStore& s) { return s.space.size(); })
      .def_property_readonly("dim", [](const hb::WordStore& s) { return s.space.dim(); })
      .def_property_readonly("candidates",
                             [](const hb::WordStore& s) { return s.candidates.words(); })
      .def("contains", [](const hb::WordStore& s, const std::string& w) {
        return s.space.contains(w);
      })
      .def(
          "nearest_neighbors",
          [](const hb::WordStore& s, const std::string& query, std::size_t k,
             const std::vector<std::string>& exclude) {
            return hb::nearest_neighbors(s.space, s.candidates, query, k,
                                         hb::WordSet(exclude.begin(), exclude.end()));
          },
          py::arg("query"), py::arg("k"), py::arg("exclude") = std::vector<std::string>{})
      .def(
          "distance",
          [](const hb::WordStore& s, const std::string& a, const std::string& b) {
            return hb::distance(s.space, a, b);
          },
          py::arg("a"), py::arg("b"));

  m.def("porter_stem", &hb::porter_stem, py::arg("word"));
  m.def("normalize_phrase", &hb::normalize_phrase, py::arg("phrase"));

  py::class_<hb::Session>(m, "Session")
      .def(py::init([](const hb::WordStore& store, const std::string& participant_id,
                       const std::string& concept_word, const std::string& condition,
                       std::uint64_t seed, std::int64_t duration_s, std::uint32_t horizon,
                       std::size_t hint_size, int block, bool practice,
                       const std::string& source, std::int64_t start_ms) {
             return std::make_unique<hb::Session>(
                 make_config(participant_id, concept_word, condition, seed, duration_s, horizon,
                             hint_size, block, practice, source, start_ms),
                 store);
           }),
           py::arg("store"), py::arg("participant_id"), py::arg("concept"),
           py::arg("condition"), py::arg("seed") = 0, py::arg("duration_s") = 1200,
           py::arg("horizon") = 20, py::arg("hint_size") = hb::kDefaultHintSize,
           py::arg("block") = 0, py::arg("practice") = false, py::arg("source") = "human",
           py::arg("start_ms") = 0, py::keep_alive<1, 2>())
      .def("submit_feature",
           [](hb::Session& s, const std::string& phrase, std::int64_t now_ms) {
             return event_json(s.submit_feature(phrase, now_ms));
           },
           py::arg("phrase"), py::arg("now_ms"))
      .def("request_hint",
           [](hb::Session& s, std::int64_t now_ms) { return event_json(s.request_hint(now_ms)); },
           py::arg("now_ms"))
      .def("finalize",
           [](hb::Session& s, std::int64_t now_ms, const std::string& reason) {
             return hb::dump_record(s.finalize(now_ms, reason));
           },
           py::arg("now_ms"), py::arg("reason") = "finished")
      .def_property_readonly("is_open", &hb::Session::is_open)
      .def("is_expired", &hb::Session::is_expired, py::arg("now_ms"));

  m.def(
      "replay_record",
      [](const std::string& line, const hb::WordStore& store) {
        return hb::dump_record(hb::replay(hb::parse_record(line), store));
      },
      py::arg("line"), py::arg("store"));
  m.def("validate_record", [](const std::string& line) {
    return hb::dump_record(hb::parse_record(line));
  });

  m.def(
      "session_metrics",
      [](const std::string& line) {
        const auto r = hb::parse_record(line);
        py::dict d;
        d["features"] = hb::feature_count(r);
        d["tokens"] = hb::token_count(r);
        d["types"] = hb::word_type_count(r);
        d["density"] = hb::token_count(r) ? py::cast(hb::type_density(r)) : py::none();
        return d;
      },
      py::arg("line"));
  m.def(
      "export_csv",
      [](const std::vector<std::string>& lines) {
        std::ostringstream out;
        hb::export_csv(hb::analysis_records(records_from_lines(lines)), out);
        return out.str();
      },
      py::arg("lines"));
  m.def(
      "pearson",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto c = hb::pearson(x, y);
        return py::make_tuple(c.r, c.p);
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "paired_t_test",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto t = hb::paired_t_test(x, y);
        return py::make_tuple(t.t, t.df, t.p);
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "welch_t_test",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto t = hb::welch_t_test(x, y);
        return py::make_tuple(t.t, t.df, t.p);
      },
      py::arg("x"), py::arg("y"));
  m.def("binomial_test_greater", &hb::binomial_test_greater, py::arg("successes"),
        py::arg("trials"), py::arg("p") = 1.0 / 3);

  m.def(
      "build_prompt",
      [](const std::string& condition, const std::string& concept_word, const std::string& phase,
         const std::vector<std::string>& hints) {
        if (phase != "initial" && phase != "subsequent") {
          throw hb::Error("phase must be 'initial' or 'subsequent'");
        }
        return hb::build_prompt(hb::condition_from_string(condition), concept_word,
                                phase == "initial" ? hb::PromptPhase::kInitial
                                                   : hb::PromptPhase::kSubsequent,
                                hints);
      },
      py::arg("condition"), py::arg("concept"), py::arg("phase"),
      py::arg("hints") = std::vector<std::string>{});
  m.def(
      "parse_llm_reply",
      [](const std::string& text) {
        py::list out;
        for (const auto& a : hb::parse_llm_reply(text)) out.append(action_tuple(a));
        return out;
      },
      py::arg("text"));
  m.def(
      "run_mock_session",
      [](const hb::WordStore& world, const std::string& concept_word,
         const std::string& condition, std::uint64_t seed, std::uint64_t profile_seed,
         const std::string& participant_id) {
        auto c = make_config(participant_id, concept_word, condition, seed, 1200, 20,
                             hb::kDefaultHintSize, 0, false, "mock", 0);
        const auto profile = hb::clustered_profile(world, concept_word, profile_seed);
        return hb::dump_record(hb::run_mock_session(profile, c, world));
      },
      py::arg("world"), py::arg("concept"), py::arg("condition"), py::arg("seed"),
      py::arg("profile_seed"), py::arg("participant_id") = "mock");
  m.def(
      "run_chat_session",
      [](py::function reply, const hb::WordStore& store, const std::string& concept_word,
         const std::string& condition, std::uint64_t seed, std::size_t max_turns,
         const std::string& participant_id) {
        PyChatClient client(std::move(reply));
        auto c = make_config(participant_id, concept_word, condition, seed, 1200, 20,
                             hb::kDefaultHintSize, 0, false, "llm", 0);
        return hb::dump_record(hb::run_llm_session(client, c, store, {max_turns}));
      },
      py::arg("reply"), py::arg("store"), py::arg("concept"), py::arg("condition"),
      py::arg("seed") = 0, py::arg("max_turns") = 30, py::arg("participant_id") = "llm");
}
