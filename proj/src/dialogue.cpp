#include "gdr/dialogue.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "gdr/error.hpp"
#include "gdr/io.hpp"
#include "gdr/text.hpp"

namespace gdr {
namespace {

using json = nlohmann::json;

std::string scalar_str(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    return {};
}

std::string get_str(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? std::string{} : scalar_str(*it);
}

Role parse_role(const std::string& label, const SchemaAdapter& a, const std::string& ctx) {
    if (label == a.user_role) return Role::User;
    if (label == a.agent_role) return Role::Agent;
    throw IngestError(ctx + ": unknown role label '" + label + "'");
}

std::optional<CharRange> parse_range(const json& j) {
    if (!j.is_array() || j.size() != 2) return std::nullopt;
    return CharRange{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

Dialogue parse_dialogue(const json& j, const std::string& domain_hint, const SchemaAdapter& a,
                        const SpanLookup* spans) {
    const bool canonical = a.layout == SchemaAdapter::Layout::Canonical;
    Dialogue d;
    d.dial_id = get_str(j, canonical ? "dial_id" : a.dial_id);
    if (d.dial_id.empty()) throw IngestError("dialogue without dial_id");
    const std::string ctx = "dialogue '" + d.dial_id + "'";
    d.domain = get_str(j, canonical ? "domain" : a.dial_domain);
    if (d.domain.empty()) d.domain = domain_hint;
    const auto& turns_key = canonical ? std::string("turns") : a.dial_turns;
    if (!j.contains(turns_key) || !j[turns_key].is_array()) throw IngestError(ctx + ": missing turns");
    for (const auto& t : j[turns_key]) {
        DialTurn turn;
        const auto& tid = t.at(canonical ? "turn_id" : a.turn_id);
        if (!tid.is_number_integer()) throw IngestError(ctx + ": non-integer turn_id");
        turn.turn_id = tid.get<int>();
        const std::string tctx = ctx + " turn " + std::to_string(turn.turn_id);
        turn.role = canonical ? parse_role(get_str(t, "role"), SchemaAdapter{}, tctx)
                              : parse_role(get_str(t, a.turn_role), a, tctx);
        turn.da = get_str(t, canonical ? "da" : a.turn_da);
        turn.utterance = get_str(t, canonical ? "utterance" : a.turn_utterance);
        const auto& refs_key = canonical ? std::string("references") : a.turn_references;
        if (auto it = t.find(refs_key); it != t.end() && it->is_array()) {
            for (const auto& r : *it) {
                GroundingRef ref;
                ref.doc_id = get_str(r, canonical ? "doc_id" : a.ref_doc_id);
                ref.span_id = get_str(r, canonical ? "span_id" : a.ref_span_id);
                if (ref.doc_id.empty()) throw IngestError(tctx + ": reference without doc_id");
                if (canonical && r.contains("char_range")) ref.char_range = parse_range(r["char_range"]);
                if (!ref.char_range && spans) {
                    auto dit = spans->find(ref.doc_id);
                    if (dit == spans->end())
                        throw IngestError(tctx + ": reference to unknown document '" + ref.doc_id + "'");
                    auto sit = dit->second.find(ref.span_id);
                    if (sit == dit->second.end())
                        throw IngestError(tctx + ": reference to unknown span '" + ref.span_id + "' of '" +
                                          ref.doc_id + "'");
                    ref.char_range = sit->second;
                }
                turn.references.push_back(std::move(ref));
            }
        }
        d.turns.push_back(std::move(turn));
    }
    std::stable_sort(d.turns.begin(), d.turns.end(),
                     [](const DialTurn& x, const DialTurn& y) { return x.turn_id < y.turn_id; });
    validate_dialogue(d);
    return d;
}

void collect_dialogues(const json& node, const std::string& domain_hint, const SchemaAdapter& a,
                       const SpanLookup* spans, std::vector<Dialogue>& out) {
    if (node.is_array()) {
        for (const auto& d : node) collect_dialogues(d, domain_hint, a, spans, out);
    } else if (node.is_object()) {
        if (node.contains(a.dial_turns)) {
            out.push_back(parse_dialogue(node, domain_hint, a, spans));
            return;
        }
        for (const auto& [k, v] : node.items()) collect_dialogues(v, k, a, spans, out);
    }
}

}  // namespace

const char* to_string(Role r) { return r == Role::User ? "user" : "agent"; }

void validate_dialogue(const Dialogue& d) {
    const std::string ctx = "dialogue '" + d.dial_id + "'";
    if (d.turns.empty()) throw IngestError(ctx + ": no turns");
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
        if (d.turns[i].turn_id < 1) throw IngestError(ctx + ": turn_id must be positive");
        if (i && d.turns[i].turn_id <= d.turns[i - 1].turn_id)
            throw IngestError(ctx + ": duplicate or unordered turn_id " + std::to_string(d.turns[i].turn_id));
    }
}

std::vector<Dialogue> load_dialogues(const std::filesystem::path& path, const SchemaAdapter& adapter,
                                     const SpanLookup* spans) {
    std::vector<Dialogue> out;
    if (adapter.layout == SchemaAdapter::Layout::Canonical) {
        io::for_each_jsonl(path, [&](const json& row, std::size_t line) {
            try {
                out.push_back(parse_dialogue(row, {}, adapter, spans));
            } catch (const std::exception& e) {
                throw IngestError(path.string() + ":" + std::to_string(line) + ": " + e.what());
            }
        });
    } else {
        json root;
        try {
            root = json::parse(io::read_file(path));
        } catch (const json::parse_error& e) {
            throw IngestError(path.string() + ": " + e.what());
        }
        try {
            collect_dialogues(root.contains(adapter.dial_root) ? root[adapter.dial_root] : root, {}, adapter,
                              spans, out);
        } catch (const IngestError& e) {
            throw IngestError(path.string() + ": " + e.what());
        } catch (const json::exception& e) {
            throw IngestError(path.string() + ": " + e.what());
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Dialogue& x, const Dialogue& y) { return x.dial_id < y.dial_id; });
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].dial_id == out[i - 1].dial_id)
            throw IngestError(path.string() + ": duplicate dial_id '" + out[i].dial_id + "'");
    }
    return out;
}

std::vector<DialQuery> build_queries(const std::vector<Dialogue>& dialogues,
                                     const std::vector<SourceDocument>* documents) {
    std::map<std::string, const SourceDocument*> by_id;
    if (documents) {
        for (const auto& d : *documents) by_id.emplace(d.doc_id, &d);
    }
    std::vector<DialQuery> out;
    for (const auto& d : dialogues) {
        for (std::size_t i = 0; i < d.turns.size(); ++i) {
            const auto& agent = d.turns[i];
            if (agent.role != Role::Agent) continue;
            std::size_t user = i;
            for (std::size_t j = i; j-- > 0;) {
                if (d.turns[j].role == Role::User) {
                    user = j;
                    break;
                }
            }
            if (user == i) continue;
            DialQuery q;
            q.query_id = d.dial_id + ":" + std::to_string(agent.turn_id);
            q.domain = d.domain;
            q.current_turn = d.turns[user].utterance;
            for (std::size_t j = i; j-- > 0;) {
                if (j != user) q.history.push_back(d.turns[j].utterance);
            }
            q.gold_grounding = agent.references;
            q.gold_response = agent.utterance;
            q.ungrounded = agent.references.empty();
            // Grounding text: referenced spans in document order, deduplicated.
            std::vector<std::pair<std::size_t, std::string>> pieces;
            std::set<std::pair<std::string, std::size_t>> seen;
            for (const auto& r : agent.references) {
                auto it = by_id.find(r.doc_id);
                if (!r.char_range || it == by_id.end()) continue;
                if (!seen.insert({r.doc_id, r.char_range->begin}).second) continue;
                const auto& body = it->second->body;
                if (r.char_range->end > body.size()) continue;
                pieces.emplace_back(r.char_range->begin,
                                    std::string(text::strip(body.substr(r.char_range->begin, r.char_range->size()))));
            }
            std::stable_sort(pieces.begin(), pieces.end(),
                             [](const auto& x, const auto& y) { return x.first < y.first; });
            for (const auto& [_, s] : pieces) {
                if (!q.gold_span_text.empty()) q.gold_span_text += ' ';
                q.gold_span_text += s;
            }
            out.push_back(std::move(q));
        }
    }
    return out;
}

std::string render_query(const DialQuery& q, std::size_t max_tokens, const std::string& separator) {
    if (max_tokens == 0) throw std::invalid_argument("max_tokens must be >= 1");
    std::string s = q.current_turn;
    for (const auto& h : q.history) {
        if (!s.empty()) s += ' ';
        s += separator;
        s += ' ';
        s += h;
    }
    return text::truncate_index_tokens(s, max_tokens);
}

std::string render_current_turn(const DialQuery& q, std::size_t max_tokens) {
    if (max_tokens == 0) throw std::invalid_argument("max_tokens must be >= 1");
    return text::truncate_index_tokens(q.current_turn, max_tokens);
}

json to_json(const GroundingRef& r) {
    json j = {{"doc_id", r.doc_id}, {"span_id", r.span_id}};
    j["char_range"] = r.char_range ? json{r.char_range->begin, r.char_range->end} : json(nullptr);
    return j;
}

json to_json(const Dialogue& d) {
    json turns = json::array();
    for (const auto& t : d.turns) {
        json refs = json::array();
        for (const auto& r : t.references) refs.push_back(to_json(r));
        turns.push_back({{"turn_id", t.turn_id},
                         {"role", to_string(t.role)},
                         {"da", t.da},
                         {"utterance", t.utterance},
                         {"references", refs}});
    }
    return {{"dial_id", d.dial_id}, {"domain", d.domain}, {"turns", turns}};
}

json to_json(const DialQuery& q) {
    json refs = json::array();
    for (const auto& r : q.gold_grounding) refs.push_back(to_json(r));
    return {{"query_id", q.query_id},         {"current_turn", q.current_turn},
            {"history", q.history},           {"gold_grounding", refs},
            {"gold_span_text", q.gold_span_text}, {"gold_response", q.gold_response},
            {"domain", q.domain},             {"ungrounded", q.ungrounded}};
}

Dialogue dialogue_from_json(const json& j, const SchemaAdapter& adapter) {
    return parse_dialogue(j, {}, adapter, nullptr);
}

DialQuery query_from_json(const json& j) {
    DialQuery q;
    q.query_id = get_str(j, "query_id");
    if (q.query_id.empty()) throw IngestError("query without query_id");
    q.current_turn = get_str(j, "current_turn");
    if (j.contains("history")) q.history = j["history"].get<std::vector<std::string>>();
    if (j.contains("gold_grounding")) {
        for (const auto& r : j["gold_grounding"]) {
            GroundingRef ref{get_str(r, "doc_id"), get_str(r, "span_id"), std::nullopt};
            if (r.contains("char_range")) ref.char_range = parse_range(r["char_range"]);
            q.gold_grounding.push_back(std::move(ref));
        }
    }
    q.gold_span_text = get_str(j, "gold_span_text");
    q.gold_response = get_str(j, "gold_response");
    q.domain = get_str(j, "domain");
    q.ungrounded = j.value("ungrounded", q.gold_grounding.empty());
    return q;
}

std::vector<DialQuery> load_queries(const std::filesystem::path& path) {
    std::vector<DialQuery> out;
    std::set<std::string> seen;
    io::for_each_jsonl(path, [&](const json& row, std::size_t line) {
        try {
            out.push_back(query_from_json(row));
        } catch (const std::exception& e) {
            throw IngestError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
        if (!seen.insert(out.back().query_id).second)
            throw IngestError(path.string() + ":" + std::to_string(line) + ": duplicate query_id '" +
                              out.back().query_id + "'");
    });
    return out;
}

void save_queries(const std::filesystem::path& path, const std::vector<DialQuery>& queries) {
    std::vector<json> rows;
    rows.reserve(queries.size());
    for (const auto& q : queries) rows.push_back(to_json(q));
    io::write_file_atomic(path, io::to_jsonl(rows));
}

void save_dialogues(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
    std::vector<json> rows;
    rows.reserve(dialogues.size());
    for (const auto& d : dialogues) rows.push_back(to_json(d));
    io::write_file_atomic(path, io::to_jsonl(rows));
}

}  // namespace gdr
