#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gdr/adapter.hpp"

namespace gdr {

/// Half-open byte range [begin, end) into a document body.
struct CharRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    bool overlaps(const CharRange& o) const { return begin < o.end && o.begin < end; }
    std::size_t size() const { return end - begin; }
    friend bool operator==(const CharRange&, const CharRange&) = default;
};

struct SpanNode {
    std::string span_id;
    std::string tag;
    CharRange char_range;
    std::string text;
    std::string title;
    std::vector<std::string> parent_titles;  // root -> leaf
};

struct SourceDocument {
    std::string doc_id;
    std::string domain;
    std::string title;
    std::string body;
    std::vector<SpanNode> spans;  // ascending by start offset
    std::optional<std::string> url;
    std::vector<std::string> hyperlinks;
};

struct Passage {
    std::string passage_id;
    std::string doc_id;
    std::string domain;
    std::vector<std::string> title_path;
    std::string body;
    std::string rendered_text;
    std::size_t token_count = 0;
    CharRange source_char_range;

    friend bool operator==(const Passage&, const Passage&) = default;
};

struct SegmentationMode {
    enum class Kind { TokenWindow, Structure };
    Kind kind = Kind::Structure;
    std::size_t window = 100;
    std::optional<std::size_t> max_structure_tokens;

    static SegmentationMode token_window(std::size_t window = 100) {
        return {Kind::TokenWindow, window, std::nullopt};
    }
    static SegmentationMode structure(std::optional<std::size_t> max_tokens = std::nullopt) {
        return {Kind::Structure, 100, max_tokens};
    }
    /// "token" or "struct"; also the mode component of passage ids.
    std::string name() const { return kind == Kind::TokenWindow ? "token" : "struct"; }
};

/// doc_id -> span_id -> byte range. Resolves grounding references.
using SpanLookup = std::map<std::string, std::map<std::string, CharRange>>;

struct LoadedCorpus {
    std::vector<SourceDocument> documents;  // sorted by doc_id
    /// Every addressable span, including upstream sentence-level spans that
    /// were merged into section-level SpanNodes.
    SpanLookup spans;
};

LoadedCorpus load_corpus(const std::filesystem::path& path, const SchemaAdapter& adapter);

/// Throws IngestError if `doc` breaks a SourceDocument invariant.
void validate_document(const SourceDocument& doc, const TagPolicy& tags);

SpanLookup span_lookup(const std::vector<SourceDocument>& docs);

std::string render_passage_text(const std::vector<std::string>& title_path, const std::string& body);

std::vector<Passage> segment_by_tokens(const SourceDocument& doc, std::size_t window);

std::vector<Passage> segment_by_structure(const SourceDocument& doc,
                                          std::optional<std::size_t> max_structure_tokens,
                                          const TagPolicy& tags = {},
                                          std::vector<std::string>* warnings = nullptr);

/// Segments every document in order; passage ids stay document-local.
std::vector<Passage> segment_corpus(const std::vector<SourceDocument>& docs,
                                    const SegmentationMode& mode, const TagPolicy& tags = {},
                                    std::vector<std::string>* warnings = nullptr);

nlohmann::json to_json(const SpanNode& s);
nlohmann::json to_json(const SourceDocument& d);
nlohmann::json to_json(const Passage& p);
SourceDocument document_from_json(const nlohmann::json& j);
Passage passage_from_json(const nlohmann::json& j);

std::vector<Passage> load_passages(const std::filesystem::path& path);
void save_passages(const std::filesystem::path& path, const std::vector<Passage>& passages);
void save_documents(const std::filesystem::path& path, const std::vector<SourceDocument>& docs);

}  // namespace gdr
