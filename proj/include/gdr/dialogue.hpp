#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdr/adapter.hpp"
#include "gdr/corpus.hpp"

namespace gdr {

struct GroundingRef {
    std::string doc_id;
    std::string span_id;
    std::optional<CharRange> char_range;

    friend bool operator==(const GroundingRef&, const GroundingRef&) = default;
};

enum class Role { User, Agent };

struct DialTurn {
    int turn_id = 0;
    Role role = Role::User;
    std::string da;
    std::string utterance;
    std::vector<GroundingRef> references;
};

struct Dialogue {
    std::string dial_id;
    std::string domain;
    std::vector<DialTurn> turns;  // ascending turn_id, non-empty
};

/// One agent-turn prediction instance.
struct DialQuery {
    std::string query_id;  // dial_id + ":" + agent turn_id
    std::string current_turn;
    std::vector<std::string> history;  // latest -> earliest
    std::vector<GroundingRef> gold_grounding;
    std::string gold_span_text;
    std::string gold_response;
    std::string domain;
    /// Set when the agent turn carried no grounding reference.
    bool ungrounded = false;

    friend bool operator==(const DialQuery&, const DialQuery&) = default;
};

/// Loads dialogues. For upstream layouts, references are resolved against
/// `spans` (when given) to fill in char ranges and the grounding text is
/// available through the corpus. Throws IngestError on invalid records.
std::vector<Dialogue> load_dialogues(const std::filesystem::path& path, const SchemaAdapter& adapter,
                                     const SpanLookup* spans = nullptr);

void validate_dialogue(const Dialogue& d);

/// One query per agent turn preceded by at least one user turn.
/// `documents` (optional) supplies bodies for gold_span_text.
std::vector<DialQuery> build_queries(const std::vector<Dialogue>& dialogues,
                                     const std::vector<SourceDocument>* documents = nullptr);

inline constexpr std::size_t kDefaultQueryTokens = 128;

/// current_turn, then " <separator> <item>" for each history item, cut to
/// the first `max_tokens` index tokens.
std::string render_query(const DialQuery& q, std::size_t max_tokens = kDefaultQueryTokens,
                         const std::string& separator = "[SEP]");
std::string render_current_turn(const DialQuery& q, std::size_t max_tokens = kDefaultQueryTokens);

nlohmann::json to_json(const GroundingRef& r);
nlohmann::json to_json(const Dialogue& d);
nlohmann::json to_json(const DialQuery& q);
Dialogue dialogue_from_json(const nlohmann::json& j, const SchemaAdapter& adapter = {});
DialQuery query_from_json(const nlohmann::json& j);

std::vector<DialQuery> load_queries(const std::filesystem::path& path);
void save_queries(const std::filesystem::path& path, const std::vector<DialQuery>& queries);
void save_dialogues(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues);

const char* to_string(Role r);

}  // namespace gdr
