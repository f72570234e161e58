#pragma once

// In-memory repository model built from static-analysis exports.
//
// Three line-delimited JSON streams feed the model:
//   files.ndjson    {"id", "path", "loc", "functions", "classes", "complexity", "first_commit_ts"}
//   symbols.ndjson  {"file_id", "symbol", "kind"}
//   calls.ndjson    {"caller_file", "callee_file", "name"}
// Unknown fields are ignored. Malformed lines are skipped and tallied.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace impactrank {

struct Symbol {
    std::string name;
    std::string kind;

    bool operator==(const Symbol&) const = default;
};

struct FileRecord {
    std::string file_id;
    std::string path;
    std::int64_t loc = 0;
    std::int64_t function_count = 0;
    std::int64_t class_count = 0;
    double cyclomatic_complexity = 0.0;
    std::vector<Symbol> symbols;
    /// UTC seconds of the first commit touching the file; nullopt when unknown.
    std::optional<std::int64_t> first_commit_ts;

    bool operator==(const FileRecord&) const = default;
};

/// File-level call edge. Weight is the number of call sites aggregated into it.
struct CallEdge {
    std::size_t caller = 0;  // index into Repository::files
    std::size_t callee = 0;
    std::string call_name;   // name of the first call site seen
    std::int64_t weight = 1;

    bool operator==(const CallEdge&) const = default;
};

struct IngestWarnings {
    std::int64_t malformed_lines = 0;
    std::int64_t unresolved_calls = 0;
    std::int64_t unresolved_symbols = 0;
    std::int64_t skipped_files = 0;  // fallback ingest: binary or unreadable

    std::int64_t total() const {
        return malformed_lines + unresolved_calls + unresolved_symbols + skipped_files;
    }
    bool operator==(const IngestWarnings&) const = default;
};

/// Immutable after construction; safe to share read-only.
struct Repository {
    std::vector<FileRecord> files;
    std::vector<CallEdge> edges;  // sorted by (caller, callee)
    /// Call names seen on either end of a call record, per file.
    std::vector<std::set<std::string>> call_names;
    /// Term frequencies of each file's indexed text (path, symbols, calls or content).
    std::vector<std::map<std::string, std::int64_t>> term_freqs;
    /// symbol name -> file indices defining/referencing it
    std::map<std::string, std::set<std::size_t>> symbol_index;
    /// Model completeness: false when built by the lexical fallback.
    bool complete = true;
    IngestWarnings warnings;

    std::optional<std::size_t> find_id(const std::string& file_id) const;
    std::optional<std::size_t> find_path(const std::string& path) const;
    std::size_t size() const { return files.size(); }

    /// Rebuilds id/path lookup tables; call after mutating `files`.
    void reindex();

    bool operator==(const Repository& other) const;

private:
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> by_path_;
};

/// Normalizes a repository-relative path: backslashes become '/', leading "./" and
/// duplicate separators are removed.
std::string normalize_path(std::string path);

/// Parses the three NDJSON exports. Throws DataError on "no files" or "duplicate id".
/// A null symbols or calls stream is treated as empty.
Repository ingest_ndjson(std::istream& files, std::istream* symbols, std::istream* calls);

/// Degraded ingest from a source tree: paths, line counts, lexical function/class
/// counts and import/include edges. Binary and unreadable files are skipped.
Repository fallback_ast_ingest(const std::filesystem::path& root);

/// Recomputes each file's term-frequency document from its path, symbols and call names.
void index_terms_from_metadata(Repository& repo);

}  // namespace impactrank
