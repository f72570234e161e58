#include "impactrank/keywords.hpp"

#include "impactrank/error.hpp"
#include "keyword_prompt.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <sstream>
#include <unordered_set>

namespace impactrank {

using json = nlohmann::json;

ChangeType parse_change_type(std::string_view text) {
    if (text == "bugfix" || text == "bug" || text == "fix") return ChangeType::bugfix;
    if (text == "feature") return ChangeType::feature;
    if (text == "refactor") return ChangeType::refactor;
    throw DataError("unknown change_type: " + std::string(text));
}

std::string_view to_string(ChangeType type) {
    switch (type) {
        case ChangeType::bugfix: return "bugfix";
        case ChangeType::feature: return "feature";
        case ChangeType::refactor: return "refactor";
    }
    return "bugfix";
}

void KeywordSet::add(const std::string& term) {
    if (std::find(keywords.begin(), keywords.end(), term) != keywords.end()) return;
    keywords.push_back(term);
    weights.push_back(1.0);
}

namespace {

// Stopword list v1. Changing it changes rankings; bump the version when editing.
constexpr std::string_view kStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves", "also", "via", "e.g", "i.e"};

const std::unordered_set<std::string_view>& stopword_set() {
    static const std::unordered_set<std::string_view> set(std::begin(kStopwords), std::end(kStopwords));
    return set;
}

bool is_token_char(unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.';
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool has_alnum(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c); });
}

// camelCase / PascalCase / ACRONYMWord boundaries within a separator-free part.
void split_camel(std::string_view part, std::vector<std::string>& out) {
    std::size_t start = 0;
    for (std::size_t i = 1; i < part.size(); ++i) {
        const auto prev = static_cast<unsigned char>(part[i - 1]);
        const auto cur = static_cast<unsigned char>(part[i]);
        const bool next_lower = i + 1 < part.size() && std::islower(static_cast<unsigned char>(part[i + 1]));
        const bool boundary = (std::isupper(cur) && (std::islower(prev) || std::isdigit(prev))) ||
                              (std::isupper(cur) && std::isupper(prev) && next_lower);
        if (boundary) {
            out.emplace_back(part.substr(start, i - start));
            start = i;
        }
    }
    if (start < part.size()) out.emplace_back(part.substr(start));
}

std::vector<std::string> subtokens(std::string_view compound) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= compound.size(); ++i) {
        if (i == compound.size() || compound[i] == '.' || compound[i] == '_') {
            if (i > start) split_camel(compound.substr(start, i - start), parts);
            start = i + 1;
        }
    }
    return parts;
}

std::string_view trim_separators(std::string_view s) {
    while (!s.empty() && (s.front() == '.' || s.front() == '_')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '.' || s.back() == '_')) s.remove_suffix(1);
    return s;
}

}  // namespace

bool is_stopword(std::string_view term) {
    return stopword_set().count(term) > 0;
}

std::vector<std::string> tokenize_terms(std::string_view text) {
    std::vector<std::string> out;
    auto emit = [&](std::string term) {
        if (!term.empty() && has_alnum(term) && !is_stopword(term)) out.push_back(std::move(term));
    };
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_token_char(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_token_char(static_cast<unsigned char>(text[j]))) ++j;
        const std::string_view raw = trim_separators(text.substr(i, j - i));
        i = j;
        if (raw.empty()) continue;

        const auto parts = subtokens(raw);
        if (parts.size() > 1) emit(lower(raw));
        for (const auto& p : parts) emit(lower(p));
    }
    return out;
}

KeywordSet extract_keywords_local(const ChangeRequest& request) {
    KeywordSet set;
    set.source = KeywordSource::local;
    for (const auto& term : tokenize_terms(request.text)) set.add(term);
    return set;
}

std::string render_keyword_prompt(const ChangeRequest& request) {
    std::string prompt(kKeywordPromptTemplate);
    auto substitute = [&](std::string_view key, std::string_view value) {
        for (auto pos = prompt.find(key); pos != std::string::npos; pos = prompt.find(key, pos + value.size()))
            prompt.replace(pos, key.size(), value);
    };
    substitute("{change_type}", to_string(request.change_type));
    substitute("{request}", request.text);
    return prompt;
}

KeywordSet parse_keyword_response(std::string_view response) {
    KeywordSet set;
    set.source = KeywordSource::llm;
    std::istringstream in{std::string(response)};
    std::string line;
    while (std::getline(in, line)) {
        std::string_view v(line);
        // bullets and "1." / "2)" numbering
        while (!v.empty() && (std::isspace(static_cast<unsigned char>(v.front())) || v.front() == '-' ||
                              v.front() == '*' || v.front() == '#'))
            v.remove_prefix(1);
        std::size_t digits = 0;
        while (digits < v.size() && std::isdigit(static_cast<unsigned char>(v[digits]))) ++digits;
        if (digits > 0 && digits < v.size() && (v[digits] == '.' || v[digits] == ')') &&
            (digits + 1 == v.size() || std::isspace(static_cast<unsigned char>(v[digits + 1]))))
            v.remove_prefix(digits + 1);

        std::size_t i = 0;
        while (i < v.size()) {
            if (!is_token_char(static_cast<unsigned char>(v[i]))) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < v.size() && is_token_char(static_cast<unsigned char>(v[j]))) ++j;
            const std::string term = lower(trim_separators(v.substr(i, j - i)));
            if (!term.empty() && has_alnum(term) && !is_stopword(term)) set.add(term);
            i = j;
        }
    }
    return set;
}

namespace {

std::string completion_text(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        return body;  // plain-text endpoints
    }
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& c = j["choices"][0];
        if (c.contains("text")) return c["text"].get<std::string>();
        if (c.contains("message")) return c["message"].at("content").get<std::string>();
    }
    if (j.contains("response")) return j["response"].get<std::string>();
    if (j.contains("content")) return j["content"].get<std::string>();
    throw std::runtime_error("unrecognized completion response");
}

}  // namespace

LlmKeywordResult extract_keywords_llm(const ChangeRequest& request, const LlmEndpoint& endpoint) {
    LlmKeywordResult result;
    auto fall_back = [&](std::string reason) {
        result.keywords = extract_keywords_local(request);
        result.fell_back = true;
        result.fallback_reason = std::move(reason);
        return result;
    };
    if (endpoint.base_url.empty()) return fall_back("no endpoint configured");

    try {
        httplib::Client client(endpoint.base_url);
        if (!client.is_valid()) return fall_back("invalid endpoint url");
        const auto timeout = std::chrono::duration<double>(endpoint.timeout_s);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

        json body = {{"model", endpoint.model},
                     {"prompt", render_keyword_prompt(request)},
                     {"max_tokens", 128},
                     {"temperature", 0.0},
                     {"stream", false}};
        auto res = client.Post(endpoint.path, body.dump(), "application/json");
        if (!res) return fall_back("transport error: " + httplib::to_string(res.error()));
        if (res->status != 200) return fall_back("http status " + std::to_string(res->status));

        KeywordSet parsed = parse_keyword_response(completion_text(res->body));
        if (parsed.empty()) return fall_back("empty keyword list");
        result.keywords = std::move(parsed);
        return result;
    } catch (const std::exception& e) {
        return fall_back(std::string("parse error: ") + e.what());
    }
}

}  // namespace impactrank
