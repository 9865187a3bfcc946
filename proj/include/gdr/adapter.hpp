#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

namespace gdr {

/// Which mark-up tags become passages under structure segmentation.
struct TagPolicy {
    /// Each span with one of these tags is its own passage.
    std::set<std::string> paragraph_tags{"p"};
    /// Consecutive list spans sharing a title path form one passage.
    std::set<std::string> list_tags{"ul", "ol", "li"};
    bool group_lists = true;

    bool is_content(const std::string& tag) const {
        return paragraph_tags.count(tag) > 0 || list_tags.count(tag) > 0;
    }
    bool is_list(const std::string& tag) const { return list_tags.count(tag) > 0; }
};

/// Maps an upstream dataset layout onto SourceDocument / Dialogue fields.
///
/// `Canonical` reads this project's own JSON Lines interchange. The
/// `MultiDoc2Dial` layout reads the published v1.0 document and dialogue
/// JSON files; field names below default to that release and may be
/// overridden from a JSON object with the same keys.
struct SchemaAdapter {
    enum class Layout { Canonical, MultiDoc2Dial };
    Layout layout = Layout::Canonical;

    // documents
    std::string doc_root = "doc_data";
    std::string doc_id = "doc_id";
    std::string doc_title = "title";
    std::string doc_domain = "domain";
    std::string doc_body = "doc_text";
    std::string doc_spans = "spans";
    std::string doc_url = "url";
    std::string doc_hyperlinks = "hyperlinks";
    std::string span_id = "id_sp";
    std::string span_tag = "tag";
    std::string span_start = "start_sp";
    std::string span_end = "end_sp";
    std::string span_title = "title";
    std::string span_parent_titles = "parent_titles";
    std::string section_id = "id_sec";
    /// Merge upstream sentence-level spans sharing a section id into one
    /// paragraph-level SpanNode.
    bool group_by_section = true;
    /// Upstream offsets count code points (Python string indices), not bytes.
    bool codepoint_offsets = true;
    std::set<std::string> heading_tags{"h1", "h2", "h3", "h4", "h5", "h6", "title"};

    // dialogues
    std::string dial_root = "dial_data";
    std::string dial_id = "dial_id";
    std::string dial_domain = "domain";
    std::string dial_turns = "turns";
    std::string turn_id = "turn_id";
    std::string turn_role = "role";
    std::string turn_da = "da";
    std::string turn_utterance = "utterance";
    std::string turn_references = "references";
    std::string ref_doc_id = "doc_id";
    std::string ref_span_id = "id_sp";
    std::string user_role = "user";
    std::string agent_role = "agent";

    TagPolicy tags;

    static SchemaAdapter canonical() { return {}; }
    static SchemaAdapter multidoc2dial() {
        SchemaAdapter a;
        a.layout = Layout::MultiDoc2Dial;
        return a;
    }
    /// Starts from the MultiDoc2Dial defaults when `layout` is
    /// "multidoc2dial", otherwise canonical; other keys override fields.
    static SchemaAdapter from_json(const nlohmann::json& j);
};

}  // namespace gdr
