#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hintbandit/bandit.hpp"
#include "hintbandit/session.hpp"

namespace hintbandit {

// Key order is preserved so that serialized records are byte-stable.
using Json = nlohmann::ordered_json;

inline constexpr std::string_view kRecordSchema = "hintbandit.session/1";

Json to_json(const SessionConfig& config);
Json to_json(const FeatureEvent& event);
Json to_json(const HintEvent& event);
Json to_json(const EndEvent& event);
Json to_json(const SessionEvent& event);
// {"eta", "weights", "log_weights", "pulls": [{"t","arm","probs","loss"}]}
Json to_json(const Exp3Bandit& bandit);
Json to_json(const SessionRecord& record);

// All parsers throw SchemaError with a short description of the offending
// field.
SessionConfig config_from_json(const Json& j);
SessionEvent event_from_json(const Json& j);
Exp3Bandit bandit_from_json(const Json& j);
SessionRecord record_from_json(const Json& j);

// One record as a single JSON line (no trailing newline).
std::string dump_record(const SessionRecord& record);
SessionRecord parse_record(std::string_view line);

// JSONL corpus. Blank lines are skipped; SchemaError messages carry the
// 1-based line number.
std::vector<SessionRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path,
                  const std::vector<SessionRecord>& records);
void append_record(const std::filesystem::path& path, const SessionRecord& record);

}  // namespace hintbandit
