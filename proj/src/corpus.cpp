#include "gdr/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "gdr/error.hpp"
#include "gdr/io.hpp"
#include "gdr/text.hpp"

namespace gdr {
namespace {

using json = nlohmann::json;

std::string str_field(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) throw IngestError(ctx + ": missing field '" + key + "'");
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw IngestError(ctx + ": field '" + key + "' is not a string");
}

std::string opt_str(const json& j, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    return {};
}

std::size_t offset_field(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer() || it->get<long long>() < 0)
        throw IngestError(ctx + ": missing or negative offset '" + key + "'");
    return it->get<std::size_t>();
}

// Accepts ["a","b"], [{"text":"a"},...] or {"text":["a","b"]}.
std::vector<std::string> parse_titles(const json& j) {
    std::vector<std::string> out;
    if (j.is_array()) {
        for (const auto& t : j) {
            if (t.is_string())
                out.push_back(t.get<std::string>());
            else if (t.is_object() && t.contains("text") && t["text"].is_string())
                out.push_back(t["text"].get<std::string>());
        }
    } else if (j.is_object() && j.contains("text") && j["text"].is_array()) {
        for (const auto& t : j["text"])
            if (t.is_string()) out.push_back(t.get<std::string>());
    }
    return out;
}

std::vector<std::size_t> codepoint_to_byte_table(std::string_view body) {
    std::vector<std::size_t> table;
    table.reserve(body.size() + 1);
    for (std::size_t i = 0; i < body.size(); ++i) {
        if ((static_cast<unsigned char>(body[i]) & 0xC0) != 0x80) table.push_back(i);
    }
    table.push_back(body.size());
    return table;
}

struct UpstreamSpan {
    std::string id;
    std::string tag;
    CharRange range;
    std::string title;
    std::vector<std::string> parent_titles;
    std::string section;
};

SourceDocument parse_upstream_document(const json& j, const std::string& domain_hint,
                                       const std::string& key_hint, const SchemaAdapter& a,
                                       SpanLookup& lookup) {
    SourceDocument d;
    d.doc_id = j.contains(a.doc_id) ? str_field(j, a.doc_id, "document") : key_hint;
    if (d.doc_id.empty()) throw IngestError("document without doc_id (key '" + key_hint + "')");
    const std::string ctx = "document '" + d.doc_id + "'";
    d.domain = opt_str(j, a.doc_domain);
    if (d.domain.empty()) d.domain = domain_hint;
    d.title = opt_str(j, a.doc_title);
    d.body = str_field(j, a.doc_body, ctx);
    if (auto u = opt_str(j, a.doc_url); !u.empty()) d.url = u;
    if (auto it = j.find(a.doc_hyperlinks); it != j.end() && it->is_array()) {
        for (const auto& h : *it)
            if (h.is_string()) d.hyperlinks.push_back(h.get<std::string>());
    }

    const auto cp_table =
        a.codepoint_offsets ? codepoint_to_byte_table(d.body) : std::vector<std::size_t>{};
    auto to_byte = [&](std::size_t off, const std::string& sid) {
        if (!a.codepoint_offsets) return off;
        if (off >= cp_table.size())
            throw IngestError(ctx + ": span '" + sid + "' range outside body");
        return cp_table[off];
    };

    std::vector<UpstreamSpan> spans;
    auto add_span = [&](const json& s, const std::string& key) {
        UpstreamSpan u;
        u.id = s.contains(a.span_id) ? str_field(s, a.span_id, ctx) : key;
        const std::string sctx = ctx + " span '" + u.id + "'";
        u.tag = opt_str(s, a.span_tag);
        const auto start = offset_field(s, a.span_start, sctx);
        const auto end = offset_field(s, a.span_end, sctx);
        u.range = {to_byte(start, u.id), to_byte(end, u.id)};
        if (u.range.end > d.body.size() || u.range.begin >= u.range.end)
            throw IngestError(ctx + ": span '" + u.id + "' range outside body");
        u.title = opt_str(s, a.span_title);
        if (auto it = s.find(a.span_parent_titles); it != s.end()) u.parent_titles = parse_titles(*it);
        u.section = opt_str(s, a.section_id);
        spans.push_back(std::move(u));
    };
    if (auto it = j.find(a.doc_spans); it != j.end()) {
        if (it->is_object()) {
            for (const auto& [k, s] : it->items()) add_span(s, k);
        } else if (it->is_array()) {
            for (std::size_t i = 0; i < it->size(); ++i) add_span((*it)[i], std::to_string(i));
        }
    }
    std::stable_sort(spans.begin(), spans.end(), [](const UpstreamSpan& x, const UpstreamSpan& y) {
        return x.range.begin < y.range.begin;
    });

    auto& doc_lookup = lookup[d.doc_id];
    for (const auto& u : spans) doc_lookup[u.id] = u.range;

    auto make_node = [&](const std::string& id, const std::string& tag, CharRange r,
                         const UpstreamSpan& first) {
        SpanNode n;
        n.span_id = id;
        n.tag = tag;
        n.char_range = r;
        n.text = d.body.substr(r.begin, r.size());
        n.title = first.title;
        n.parent_titles = first.parent_titles;
        return n;
    };

    if (!a.group_by_section) {
        for (const auto& u : spans) d.spans.push_back(make_node(u.id, u.tag, u.range, u));
        return d;
    }

    // Sections are runs of spans sharing a section id, in offset order.
    std::size_t i = 0;
    while (i < spans.size()) {
        std::size_t j2 = i + 1;
        while (j2 < spans.size() && spans[j2].section == spans[i].section && !spans[i].section.empty())
            ++j2;
        CharRange r = spans[i].range;
        bool any_list = false;
        bool all_heading = true;
        for (std::size_t k = i; k < j2; ++k) {
            r.begin = std::min(r.begin, spans[k].range.begin);
            r.end = std::max(r.end, spans[k].range.end);
            any_list = any_list || a.tags.is_list(spans[k].tag);
            all_heading = all_heading && a.heading_tags.count(spans[k].tag) > 0;
        }
        std::string tag = all_heading ? spans[i].tag : (any_list ? "ul" : "p");
        const std::string id = spans[i].section.empty() ? spans[i].id : spans[i].section;
        d.spans.push_back(make_node(id, tag, r, spans[i]));
        if (!spans[i].section.empty()) doc_lookup.emplace(id, r);
        i = j2;
    }
    return d;
}

void collect_upstream(const json& node, const std::string& domain_hint, const std::string& key_hint,
                      const SchemaAdapter& a, std::vector<SourceDocument>& out, SpanLookup& lookup) {
    if (node.is_array()) {
        for (const auto& d : node) collect_upstream(d, domain_hint, {}, a, out, lookup);
        return;
    }
    if (!node.is_object()) return;
    if (node.contains(a.doc_body)) {
        out.push_back(parse_upstream_document(node, domain_hint, key_hint, a, lookup));
        return;
    }
    // Either {domain: {...}} or {doc_id: doc}; a child that is itself a
    // document gets its key as doc_id hint and the current domain.
    for (const auto& [k, v] : node.items()) {
        const bool child_is_doc = v.is_object() && v.contains(a.doc_body);
        collect_upstream(v, child_is_doc ? domain_hint : k, k, a, out, lookup);
    }
}

void sort_and_check_unique(std::vector<SourceDocument>& docs) {
    std::stable_sort(docs.begin(), docs.end(),
                     [](const SourceDocument& x, const SourceDocument& y) { return x.doc_id < y.doc_id; });
    for (std::size_t i = 1; i < docs.size(); ++i) {
        if (docs[i].doc_id == docs[i - 1].doc_id)
            throw IngestError("duplicate doc_id '" + docs[i].doc_id + "'");
    }
}

// Splits body[range] into windows of `window` index tokens. Windows tile
// the range exactly; each window's body is its slice with outer whitespace
// trimmed.
std::vector<std::pair<CharRange, std::string>> window_slices(const std::string& body, CharRange range,
                                                             std::size_t window) {
    std::vector<std::pair<CharRange, std::string>> out;
    const std::string_view slice(body.data() + range.begin, range.size());
    const auto toks = text::index_tokenize_spans(slice);
    if (toks.empty()) return out;
    for (std::size_t first = 0; first < toks.size(); first += window) {
        const std::size_t next = first + window;
        const std::size_t b = first == 0 ? 0 : toks[first].piece_begin;
        const std::size_t e = next >= toks.size() ? slice.size() : toks[next].piece_begin;
        out.emplace_back(CharRange{range.begin + b, range.begin + e},
                         std::string(text::strip(slice.substr(b, e - b))));
    }
    return out;
}

Passage make_passage(const SourceDocument& doc, const std::string& mode, std::size_t index,
                     std::vector<std::string> title_path, std::string body, CharRange range) {
    Passage p;
    p.passage_id = doc.doc_id + "::" + mode + "::" + std::to_string(index);
    p.doc_id = doc.doc_id;
    p.domain = doc.domain;
    p.title_path = std::move(title_path);
    p.body = std::move(body);
    p.rendered_text = render_passage_text(p.title_path, p.body);
    p.token_count = text::index_token_count(p.rendered_text);
    p.source_char_range = range;
    return p;
}

std::vector<std::string> title_path_of(const SpanNode& s) {
    std::vector<std::string> path;
    for (const auto& t : s.parent_titles) {
        auto st = text::strip(t);
        if (!st.empty()) path.emplace_back(st);
    }
    if (auto st = text::strip(s.title); !st.empty()) {
        // Upstream data sometimes repeats the leaf title as the last parent.
        if (path.empty() || path.back() != st) path.emplace_back(st);
    }
    return path;
}

}  // namespace

SchemaAdapter SchemaAdapter::from_json(const nlohmann::json& j) {
    SchemaAdapter a = j.value("layout", std::string("canonical")) == "multidoc2dial"
                          ? SchemaAdapter::multidoc2dial()
                          : SchemaAdapter::canonical();
    auto set = [&](const char* key, std::string& field) {
        if (j.contains(key)) field = j.at(key).get<std::string>();
    };
    set("doc_root", a.doc_root);
    set("doc_id", a.doc_id);
    set("doc_title", a.doc_title);
    set("doc_domain", a.doc_domain);
    set("doc_body", a.doc_body);
    set("doc_spans", a.doc_spans);
    set("doc_url", a.doc_url);
    set("doc_hyperlinks", a.doc_hyperlinks);
    set("span_id", a.span_id);
    set("span_tag", a.span_tag);
    set("span_start", a.span_start);
    set("span_end", a.span_end);
    set("span_title", a.span_title);
    set("span_parent_titles", a.span_parent_titles);
    set("section_id", a.section_id);
    set("dial_root", a.dial_root);
    set("dial_id", a.dial_id);
    set("dial_domain", a.dial_domain);
    set("dial_turns", a.dial_turns);
    set("turn_id", a.turn_id);
    set("turn_role", a.turn_role);
    set("turn_da", a.turn_da);
    set("turn_utterance", a.turn_utterance);
    set("turn_references", a.turn_references);
    set("ref_doc_id", a.ref_doc_id);
    set("ref_span_id", a.ref_span_id);
    set("user_role", a.user_role);
    set("agent_role", a.agent_role);
    if (j.contains("group_by_section")) a.group_by_section = j["group_by_section"].get<bool>();
    if (j.contains("codepoint_offsets")) a.codepoint_offsets = j["codepoint_offsets"].get<bool>();
    if (j.contains("heading_tags")) a.heading_tags = j["heading_tags"].get<std::set<std::string>>();
    if (j.contains("paragraph_tags")) a.tags.paragraph_tags = j["paragraph_tags"].get<std::set<std::string>>();
    if (j.contains("list_tags")) a.tags.list_tags = j["list_tags"].get<std::set<std::string>>();
    if (j.contains("group_lists")) a.tags.group_lists = j["group_lists"].get<bool>();
    return a;
}

std::string render_passage_text(const std::vector<std::string>& title_path, const std::string& body) {
    if (title_path.empty()) return body;
    return text::join(title_path, " / ") + " // " + body;
}

void validate_document(const SourceDocument& doc, const TagPolicy& tags) {
    const std::string ctx = "document '" + doc.doc_id + "'";
    if (doc.doc_id.empty()) throw IngestError("document with empty doc_id");
    std::size_t prev_start = 0;
    const SpanNode* prev_content = nullptr;
    for (const auto& s : doc.spans) {
        const auto& r = s.char_range;
        if (r.begin >= r.end || r.end > doc.body.size())
            throw IngestError(ctx + ": span '" + s.span_id + "' range outside body");
        if (r.begin < prev_start) throw IngestError(ctx + ": spans not sorted at '" + s.span_id + "'");
        if (doc.body.compare(r.begin, r.size(), s.text) != 0)
            throw IngestError(ctx + ": span '" + s.span_id + "' text differs from body slice");
        if (tags.is_content(s.tag)) {
            if (prev_content && prev_content->char_range.end > r.begin)
                throw IngestError(ctx + ": content spans '" + prev_content->span_id + "' and '" +
                                  s.span_id + "' overlap");
            prev_content = &s;
        }
        prev_start = r.begin;
    }
}

SpanLookup span_lookup(const std::vector<SourceDocument>& docs) {
    SpanLookup out;
    for (const auto& d : docs) {
        auto& m = out[d.doc_id];
        for (const auto& s : d.spans) m.emplace(s.span_id, s.char_range);
    }
    return out;
}

LoadedCorpus load_corpus(const std::filesystem::path& path, const SchemaAdapter& adapter) {
    LoadedCorpus out;
    if (adapter.layout == SchemaAdapter::Layout::Canonical) {
        io::for_each_jsonl(path, [&](const json& row, std::size_t line) {
            try {
                out.documents.push_back(document_from_json(row));
            } catch (const IngestError& e) {
                throw IngestError(path.string() + ":" + std::to_string(line) + ": " + e.what());
            }
        });
        for (const auto& d : out.documents) validate_document(d, adapter.tags);
        sort_and_check_unique(out.documents);
        out.spans = span_lookup(out.documents);
        return out;
    }
    json root;
    try {
        root = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw IngestError(path.string() + ": " + e.what());
    }
    const json& docs = root.contains(adapter.doc_root) ? root[adapter.doc_root] : root;
    collect_upstream(docs, {}, {}, adapter, out.documents, out.spans);
    for (auto& d : out.documents) {
        // Section-level nodes may nest inside each other upstream; content
        // overlap is still an error, as in the canonical layout.
        validate_document(d, adapter.tags);
    }
    sort_and_check_unique(out.documents);
    return out;
}

std::vector<Passage> segment_by_tokens(const SourceDocument& doc, std::size_t window) {
    if (window == 0) throw BuildError("token window must be >= 1");
    std::vector<Passage> out;
    std::size_t idx = 0;
    for (auto& [range, body] : window_slices(doc.body, {0, doc.body.size()}, window))
        out.push_back(make_passage(doc, "token", idx++, {}, std::move(body), range));
    return out;
}

std::vector<Passage> segment_by_structure(const SourceDocument& doc,
                                          std::optional<std::size_t> max_structure_tokens,
                                          const TagPolicy& tags, std::vector<std::string>* warnings) {
    if (max_structure_tokens && *max_structure_tokens == 0)
        throw BuildError("max_structure_tokens must be >= 1");
    struct Unit {
        CharRange range;
        std::vector<std::string> title_path;
    };
    std::vector<Unit> units;
    bool prev_list = false;
    for (const auto& s : doc.spans) {
        if (!tags.is_content(s.tag)) continue;
        auto path = title_path_of(s);
        const bool is_list = tags.is_list(s.tag);
        if (tags.group_lists && is_list && prev_list && units.back().title_path == path) {
            units.back().range.end = s.char_range.end;
            continue;
        }
        prev_list = is_list;
        units.push_back({s.char_range, std::move(path)});
    }
    if (units.empty()) {
        if (warnings) warnings->push_back("document '" + doc.doc_id + "' has no content spans");
        return {};
    }
    std::vector<Passage> out;
    std::size_t idx = 0;
    for (auto& u : units) {
        const std::string_view slice(doc.body.data() + u.range.begin, u.range.size());
        if (!max_structure_tokens || text::index_token_count(slice) <= *max_structure_tokens) {
            out.push_back(make_passage(doc, "struct", idx++, u.title_path,
                                       std::string(text::strip(slice)), u.range));
            continue;
        }
        for (auto& [range, body] : window_slices(doc.body, u.range, *max_structure_tokens))
            out.push_back(make_passage(doc, "struct", idx++, u.title_path, std::move(body), range));
    }
    return out;
}

std::vector<Passage> segment_corpus(const std::vector<SourceDocument>& docs, const SegmentationMode& mode,
                                    const TagPolicy& tags, std::vector<std::string>* warnings) {
    std::vector<Passage> out;
    for (const auto& d : docs) {
        auto ps = mode.kind == SegmentationMode::Kind::TokenWindow
                      ? segment_by_tokens(d, mode.window)
                      : segment_by_structure(d, mode.max_structure_tokens, tags, warnings);
        std::move(ps.begin(), ps.end(), std::back_inserter(out));
    }
    return out;
}

nlohmann::json to_json(const SpanNode& s) {
    return {{"span_id", s.span_id},
            {"tag", s.tag},
            {"char_range", {s.char_range.begin, s.char_range.end}},
            {"text", s.text},
            {"title", s.title},
            {"parent_titles", s.parent_titles}};
}

nlohmann::json to_json(const SourceDocument& d) {
    json spans = json::array();
    for (const auto& s : d.spans) spans.push_back(to_json(s));
    json j = {{"doc_id", d.doc_id}, {"domain", d.domain}, {"title", d.title},
              {"body", d.body},     {"spans", spans},     {"hyperlinks", d.hyperlinks}};
    j["url"] = d.url ? json(*d.url) : json(nullptr);
    return j;
}

nlohmann::json to_json(const Passage& p) {
    return {{"passage_id", p.passage_id},
            {"doc_id", p.doc_id},
            {"domain", p.domain},
            {"title_path", p.title_path},
            {"body", p.body},
            {"rendered_text", p.rendered_text},
            {"token_count", p.token_count},
            {"source_char_range", {p.source_char_range.begin, p.source_char_range.end}}};
}

namespace {
CharRange range_from_json(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned())
        throw IngestError(ctx + ": char_range must be [start, end]");
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}
}  // namespace

SourceDocument document_from_json(const nlohmann::json& j) {
    SourceDocument d;
    d.doc_id = str_field(j, "doc_id", "document");
    const std::string ctx = "document '" + d.doc_id + "'";
    d.domain = opt_str(j, "domain");
    d.title = opt_str(j, "title");
    d.body = str_field(j, "body", ctx);
    if (auto u = opt_str(j, "url"); !u.empty()) d.url = u;
    if (j.contains("hyperlinks") && j["hyperlinks"].is_array())
        d.hyperlinks = j["hyperlinks"].get<std::vector<std::string>>();
    if (j.contains("spans")) {
        for (const auto& s : j["spans"]) {
            SpanNode n;
            n.span_id = str_field(s, "span_id", ctx);
            n.tag = opt_str(s, "tag");
            if (!s.contains("char_range"))
                throw IngestError(ctx + ": span '" + n.span_id + "' missing char_range");
            n.char_range = range_from_json(s["char_range"], ctx + " span '" + n.span_id + "'");
            if (n.char_range.end > d.body.size() || n.char_range.begin >= n.char_range.end)
                throw IngestError(ctx + ": span '" + n.span_id + "' range outside body");
            n.text = s.contains("text") ? opt_str(s, "text")
                                         : d.body.substr(n.char_range.begin, n.char_range.size());
            n.title = opt_str(s, "title");
            if (s.contains("parent_titles")) n.parent_titles = parse_titles(s["parent_titles"]);
            d.spans.push_back(std::move(n));
        }
    }
    return d;
}

Passage passage_from_json(const nlohmann::json& j) {
    Passage p;
    p.passage_id = str_field(j, "passage_id", "passage");
    const std::string ctx = "passage '" + p.passage_id + "'";
    p.doc_id = str_field(j, "doc_id", ctx);
    p.domain = opt_str(j, "domain");
    if (j.contains("title_path")) p.title_path = j["title_path"].get<std::vector<std::string>>();
    p.body = opt_str(j, "body");
    p.rendered_text = str_field(j, "rendered_text", ctx);
    p.token_count = j.value("token_count", std::size_t{0});
    p.source_char_range = range_from_json(j.at("source_char_range"), ctx);
    return p;
}

std::vector<Passage> load_passages(const std::filesystem::path& path) {
    std::vector<Passage> out;
    std::set<std::string> seen;
    io::for_each_jsonl(path, [&](const json& row, std::size_t line) {
        try {
            out.push_back(passage_from_json(row));
        } catch (const std::exception& e) {
            throw IngestError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
        if (!seen.insert(out.back().passage_id).second)
            throw IngestError(path.string() + ":" + std::to_string(line) + ": duplicate passage_id '" +
                              out.back().passage_id + "'");
    });
    return out;
}

void save_passages(const std::filesystem::path& path, const std::vector<Passage>& passages) {
    std::vector<json> rows;
    rows.reserve(passages.size());
    for (const auto& p : passages) rows.push_back(to_json(p));
    io::write_file_atomic(path, io::to_jsonl(rows));
}

void save_documents(const std::filesystem::path& path, const std::vector<SourceDocument>& docs) {
    std::vector<json> rows;
    rows.reserve(docs.size());
    for (const auto& d : docs) rows.push_back(to_json(d));
    io::write_file_atomic(path, io::to_jsonl(rows));
}

}  // namespace gdr
