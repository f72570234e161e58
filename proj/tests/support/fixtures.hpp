#pragma once

#include "impactrank/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing_support {

inline std::filesystem::path fixtures_dir() { return IMPACTRANK_FIXTURES_DIR; }

inline std::filesystem::path mini_repo_dir() { return fixtures_dir() / "mini_repo"; }

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "impactrank") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// RunConfig pointing at the 30-file fixture exports.
inline impactrank::RunConfig mini_repo_config() {
    impactrank::RunConfig c;
    const auto dir = mini_repo_dir();
    c.files = dir / "files.ndjson";
    c.symbols = dir / "symbols.ndjson";
    c.calls = dir / "calls.ndjson";
    c.history = dir / "history.ndjson";
    return c;
}

}  // namespace testing_support
