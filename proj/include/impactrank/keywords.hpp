#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace impactrank {

enum class ChangeType { bugfix, feature, refactor };

ChangeType parse_change_type(std::string_view text);
std::string_view to_string(ChangeType type);

struct ChangeRequest {
    std::string request_id;
    std::string text;
    ChangeType change_type = ChangeType::bugfix;
    std::int64_t timestamp = 0;
};

enum class KeywordSource { local, llm };

struct KeywordSet {
    std::vector<std::string> keywords;  // unique, lowercase, first-occurrence order
    std::vector<double> weights;        // parallel to keywords, default 1.0
    KeywordSource source = KeywordSource::local;

    bool empty() const { return keywords.empty(); }
    std::size_t size() const { return keywords.size(); }
    /// Appends `term` with weight 1.0 unless already present.
    void add(const std::string& term);
    bool operator==(const KeywordSet&) const = default;
};

/// Splits text into lowercase terms over the grammar [a-z0-9_.]+. Compound
/// identifiers (camelCase, snake_case, dotted) yield the compound followed by its
/// subtokens. Stopwords are dropped. Duplicates are kept so the result can serve
/// as a term-frequency source.
std::vector<std::string> tokenize_terms(std::string_view text);

/// True when `term` is in the bundled English stopword list.
bool is_stopword(std::string_view term);

KeywordSet extract_keywords_local(const ChangeRequest& request);

struct LlmEndpoint {
    std::string base_url;                     // e.g. http://127.0.0.1:8080
    std::string path = "/v1/completions";
    std::string model;
    double timeout_s = 10.0;
};

struct LlmKeywordResult {
    KeywordSet keywords;
    bool fell_back = false;
    std::string fallback_reason;
};

/// The prompt sent to the completion endpoint, with the request text substituted.
std::string render_keyword_prompt(const ChangeRequest& request);

/// Parses a line-delimited keyword list. Bullets and numbering are stripped.
KeywordSet parse_keyword_response(std::string_view response);

/// Queries a completion endpoint for keywords. Never throws: any transport or
/// parse failure falls back to extract_keywords_local.
LlmKeywordResult extract_keywords_llm(const ChangeRequest& request, const LlmEndpoint& endpoint);

}  // namespace impactrank
