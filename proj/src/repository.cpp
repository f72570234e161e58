#include "impactrank/repository.hpp"

#include "impactrank/error.hpp"
#include "impactrank/keywords.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

namespace impactrank {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::optional<std::size_t> Repository::find_id(const std::string& file_id) const {
    auto it = by_id_.find(file_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Repository::find_path(const std::string& path) const {
    auto it = by_path_.find(normalize_path(path));
    if (it == by_path_.end()) return std::nullopt;
    return it->second;
}

void Repository::reindex() {
    by_id_.clear();
    by_path_.clear();
    for (std::size_t i = 0; i < files.size(); ++i) {
        by_id_.emplace(files[i].file_id, i);
        by_path_.emplace(files[i].path, i);
    }
}

bool Repository::operator==(const Repository& other) const {
    return files == other.files && edges == other.edges && call_names == other.call_names &&
           term_freqs == other.term_freqs && symbol_index == other.symbol_index &&
           complete == other.complete && warnings == other.warnings;
}

std::string normalize_path(std::string path) {
    std::replace(path.begin(), path.end(), '\\', '/');
    std::string out;
    out.reserve(path.size());
    for (char c : path) {
        if (c == '/' && !out.empty() && out.back() == '/') continue;
        out.push_back(c);
    }
    while (out.size() >= 2 && out[0] == '.' && out[1] == '/') out.erase(0, 2);
    return out;
}

void index_terms_from_metadata(Repository& repo) {
    repo.term_freqs.assign(repo.files.size(), {});
    for (std::size_t i = 0; i < repo.files.size(); ++i) {
        auto& tf = repo.term_freqs[i];
        for (const auto& term : tokenize_terms(repo.files[i].path)) ++tf[term];
        for (const auto& sym : repo.files[i].symbols)
            for (const auto& term : tokenize_terms(sym.name)) ++tf[term];
        for (const auto& name : repo.call_names[i])
            for (const auto& term : tokenize_terms(name)) ++tf[term];
    }
}

namespace {

struct BadRecord : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parses one NDJSON line into an object; nullopt for blank lines, throws on garbage.
std::optional<json> parse_line(const std::string& line) {
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
        return std::nullopt;
    json j = json::parse(line);
    if (!j.is_object()) throw BadRecord("record is not an object");
    return j;
}

std::int64_t non_negative_int(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return 0;
    auto v = j.at(key).get<std::int64_t>();
    if (v < 0) throw BadRecord(std::string(key) + " is negative");
    return v;
}

template <typename Fn>
void for_each_record(std::istream& in, std::int64_t& malformed, Fn&& fn) {
    std::string line;
    while (std::getline(in, line)) {
        try {
            auto record = parse_line(line);
            if (record) fn(*record);
        } catch (const json::exception&) {
            ++malformed;
        } catch (const BadRecord&) {
            ++malformed;
        }
    }
}

}  // namespace

Repository ingest_ndjson(std::istream& files, std::istream* symbols, std::istream* calls) {
    Repository repo;

    for_each_record(files, repo.warnings.malformed_lines, [&](const json& j) {
        FileRecord f;
        f.file_id = j.at("id").get<std::string>();
        f.path = normalize_path(j.at("path").get<std::string>());
        if (f.file_id.empty() || f.path.empty())
            throw BadRecord("empty id or path");
        f.loc = non_negative_int(j, "loc");
        f.function_count = non_negative_int(j, "functions");
        f.class_count = non_negative_int(j, "classes");
        if (j.contains("complexity") && !j["complexity"].is_null()) {
            f.cyclomatic_complexity = j["complexity"].get<double>();
            if (!(f.cyclomatic_complexity >= 0))
                throw BadRecord("complexity is negative");
        }
        if (j.contains("first_commit_ts") && !j["first_commit_ts"].is_null())
            f.first_commit_ts = j["first_commit_ts"].get<std::int64_t>();
        repo.files.push_back(std::move(f));
    });

    if (repo.files.empty()) throw DataError("no files");
    {
        std::set<std::string> seen;
        for (const auto& f : repo.files)
            if (!seen.insert(f.file_id).second) throw DataError("duplicate id: " + f.file_id);
    }
    repo.reindex();
    repo.call_names.assign(repo.files.size(), {});

    if (symbols) {
        for_each_record(*symbols, repo.warnings.malformed_lines, [&](const json& j) {
            Symbol s{j.at("symbol").get<std::string>(), j.value("kind", std::string{})};
            auto file = repo.find_id(j.at("file_id").get<std::string>());
            if (!file) {
                ++repo.warnings.unresolved_symbols;
                return;
            }
            repo.symbol_index[s.name].insert(*file);
            repo.files[*file].symbols.push_back(std::move(s));
        });
    }

    if (calls) {
        std::map<std::pair<std::size_t, std::size_t>, CallEdge> merged;
        for_each_record(*calls, repo.warnings.malformed_lines, [&](const json& j) {
            auto caller = repo.find_id(j.at("caller_file").get<std::string>());
            auto callee = repo.find_id(j.at("callee_file").get<std::string>());
            std::string name = j.value("name", std::string{});
            if (!caller || !callee) {
                ++repo.warnings.unresolved_calls;
                return;
            }
            auto [it, inserted] = merged.try_emplace({*caller, *callee}, CallEdge{*caller, *callee, name, 0});
            ++it->second.weight;
            if (!name.empty()) {
                repo.call_names[*caller].insert(name);
                repo.call_names[*callee].insert(name);
            }
        });
        for (auto& [key, edge] : merged) repo.edges.push_back(std::move(edge));
    }

    index_terms_from_metadata(repo);
    return repo;
}

// ---------------------------------------------------------------------------
// Lexical fallback

namespace {

enum class Lang { python, clike, javascript, other };

Lang language_of(const fs::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".py") return Lang::python;
    if (ext == ".c" || ext == ".cc" || ext == ".cpp" || ext == ".cxx" || ext == ".h" ||
        ext == ".hh" || ext == ".hpp" || ext == ".hxx" || ext == ".java" || ext == ".cs")
        return Lang::clike;
    if (ext == ".js" || ext == ".jsx" || ext == ".ts" || ext == ".tsx" || ext == ".mjs")
        return Lang::javascript;
    return Lang::other;
}

struct LexicalScan {
    std::int64_t lines = 0;
    std::vector<Symbol> functions;
    std::vector<Symbol> classes;
    double complexity = 1;
    std::vector<std::string> imports;  // raw import targets
};

LexicalScan scan_source(const std::string& text, Lang lang) {
    static const std::regex py_def(R"(^\s*(?:async\s+)?def\s+(\w+))");
    static const std::regex py_class(R"(^\s*class\s+(\w+))");
    static const std::regex py_import(R"(^\s*import\s+([\w\.]+))");
    static const std::regex py_from(R"(^\s*from\s+([\w\.]+)\s+import\b)");
    static const std::regex c_class(R"(^\s*(?:class|struct|interface)\s+(\w+)[^;]*$)");
    static const std::regex c_func(
        R"(^\s*(?:[\w:<>,\*&~]+\s+)+\*?&?([A-Za-z_]\w*)\s*\([^;]*\)\s*(?:const\s*)?(?:override\s*)?\{?\s*$)");
    static const std::regex c_include(R"(^\s*#\s*include\s*\"([^\"]+)\")");
    static const std::regex js_func(R"(\bfunction\s+(\w+))");
    static const std::regex js_class(R"(^\s*(?:export\s+)?class\s+(\w+))");
    static const std::regex js_import(R"((?:\bfrom\s*|\brequire\s*\(\s*|^\s*import\s+)['\"]([^'\"]+)['\"])");
    static const std::regex branch(R"(\b(?:if|elif|for|while|case|catch|except)\b|&&|\|\|)");
    static const std::set<std::string> control = {"if", "for", "while", "switch", "return", "catch", "else"};

    LexicalScan scan;
    std::istringstream in(text);
    std::string line;
    std::smatch m;
    while (std::getline(in, line)) {
        ++scan.lines;
        scan.complexity += std::distance(std::sregex_iterator(line.begin(), line.end(), branch),
                                         std::sregex_iterator());
        switch (lang) {
            case Lang::python:
                if (std::regex_search(line, m, py_def)) scan.functions.push_back({m[1], "function"});
                else if (std::regex_search(line, m, py_class)) scan.classes.push_back({m[1], "class"});
                else if (std::regex_search(line, m, py_from) || std::regex_search(line, m, py_import))
                    scan.imports.push_back(m[1]);
                break;
            case Lang::clike:
                if (std::regex_search(line, m, c_include)) scan.imports.push_back(m[1]);
                else if (std::regex_search(line, m, c_class)) scan.classes.push_back({m[1], "class"});
                else if (std::regex_search(line, m, c_func) && !control.count(m[1]))
                    scan.functions.push_back({m[1], "function"});
                break;
            case Lang::javascript:
                if (std::regex_search(line, m, js_import)) scan.imports.push_back(m[1]);
                if (std::regex_search(line, m, js_class)) scan.classes.push_back({m[1], "class"});
                else if (std::regex_search(line, m, js_func)) scan.functions.push_back({m[1], "function"});
                break;
            case Lang::other:
                break;
        }
    }
    return scan;
}

std::vector<std::string> import_candidates(const std::string& target, const std::string& importer,
                                           Lang lang) {
    const fs::path dir = fs::path(importer).parent_path();
    auto rel = [&](const std::string& p) {
        return normalize_path((dir / p).lexically_normal().generic_string());
    };
    std::vector<std::string> out;
    switch (lang) {
        case Lang::python: {
            std::size_t dots = 0;
            while (dots < target.size() && target[dots] == '.') ++dots;
            std::string mod = target.substr(dots);
            std::replace(mod.begin(), mod.end(), '.', '/');
            if (dots > 0) {
                fs::path base = dir;
                for (std::size_t i = 1; i < dots; ++i) base = base.parent_path();
                const std::string b = (base / mod).lexically_normal().generic_string();
                out.push_back(normalize_path(b + ".py"));
                out.push_back(normalize_path(b + "/__init__.py"));
            } else {
                out.push_back(mod + ".py");
                out.push_back(mod + "/__init__.py");
            }
            break;
        }
        case Lang::clike:
            out.push_back(rel(target));
            out.push_back(normalize_path(target));
            break;
        case Lang::javascript:
            if (!target.empty() && target[0] == '.') {
                for (const char* ext : {"", ".js", ".ts", ".jsx", ".tsx", "/index.js", "/index.ts"})
                    out.push_back(rel(target + ext));
            }
            break;
        case Lang::other:
            break;
    }
    return out;
}

bool looks_binary(const std::string& bytes) {
    return bytes.find('\0') != std::string::npos;
}

}  // namespace

Repository fallback_ast_ingest(const fs::path& root) {
    Repository repo;
    repo.complete = false;

    std::vector<fs::path> paths;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw DataError("not a directory: " + root.string());
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) break;
        const auto name = it->path().filename().string();
        if (it->is_directory() && !name.empty() && name[0] == '.') {
            it.disable_recursion_pending();
            continue;
        }
        if (it->is_regular_file()) paths.push_back(it->path());
    }
    std::sort(paths.begin(), paths.end());

    std::vector<LexicalScan> scans;
    std::vector<Lang> langs;
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        if (!in) {
            ++repo.warnings.skipped_files;
            continue;
        }
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (in.bad() || looks_binary(bytes)) {
            ++repo.warnings.skipped_files;
            continue;
        }
        const Lang lang = language_of(p);
        LexicalScan scan = scan_source(bytes, lang);

        FileRecord f;
        f.path = normalize_path(fs::relative(p, root).generic_string());
        f.file_id = f.path;
        f.loc = scan.lines;
        f.function_count = static_cast<std::int64_t>(scan.functions.size());
        f.class_count = static_cast<std::int64_t>(scan.classes.size());
        f.cyclomatic_complexity = scan.complexity;
        f.symbols = scan.classes;
        f.symbols.insert(f.symbols.end(), scan.functions.begin(), scan.functions.end());

        std::map<std::string, std::int64_t> tf;
        for (const auto& term : tokenize_terms(f.path)) ++tf[term];
        for (const auto& term : tokenize_terms(bytes)) ++tf[term];

        repo.files.push_back(std::move(f));
        repo.term_freqs.push_back(std::move(tf));
        scans.push_back(std::move(scan));
        langs.push_back(lang);
    }

    if (repo.files.empty()) throw DataError("no files");
    repo.reindex();
    repo.call_names.assign(repo.files.size(), {});
    for (std::size_t i = 0; i < repo.files.size(); ++i)
        for (const auto& s : repo.files[i].symbols) repo.symbol_index[s.name].insert(i);

    auto resolve = [&](const std::string& candidate) -> std::optional<std::size_t> {
        if (auto exact = repo.find_path(candidate)) return exact;
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < repo.files.size(); ++i) {
            const auto& path = repo.files[i].path;
            if (path.size() > candidate.size() &&
                path.compare(path.size() - candidate.size(), candidate.size(), candidate) == 0 &&
                path[path.size() - candidate.size() - 1] == '/') {
                if (!best || path < repo.files[*best].path) best = i;
            }
        }
        return best;
    };

    std::map<std::pair<std::size_t, std::size_t>, CallEdge> merged;
    for (std::size_t i = 0; i < repo.files.size(); ++i) {
        for (const auto& target : scans[i].imports) {
            for (const auto& candidate : import_candidates(target, repo.files[i].path, langs[i])) {
                auto callee = resolve(candidate);
                if (!callee) continue;
                if (*callee != i) {
                    auto [it, inserted] = merged.try_emplace({i, *callee}, CallEdge{i, *callee, target, 0});
                    ++it->second.weight;
                    repo.call_names[i].insert(target);
                    repo.call_names[*callee].insert(target);
                }
                break;
            }
        }
    }
    for (auto& [key, edge] : merged) repo.edges.push_back(std::move(edge));
    return repo;
}

}  // namespace impactrank
