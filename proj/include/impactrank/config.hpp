#pragma once

#include "impactrank/attention.hpp"
#include "impactrank/deterministic.hpp"
#include "impactrank/features.hpp"
#include "impactrank/keywords.hpp"
#include "impactrank/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace impactrank {

enum class KeywordMode { local, llm };

struct RunConfig {
    std::filesystem::path files;
    std::filesystem::path symbols;
    std::filesystem::path calls;
    std::filesystem::path history;
    std::filesystem::path source_root;  // fallback ingest
    bool fallback_ast = false;
    std::filesystem::path snapshot;
    std::filesystem::path model;
    std::filesystem::path out_dir;

    DeterministicWeights weights;
    Bm25Params bm25;
    PageRankOptions pagerank;
    StageSizes stages;
    KeywordMode keyword_mode = KeywordMode::local;
    LlmEndpoint llm;
    std::optional<std::int64_t> now;
    std::optional<std::uint64_t> seed;
    std::size_t top_k = 50;
    std::size_t top_n = 25;
    AttentionConfig attention;
    TrainConfig train;
};

/// Overlays a JSON config document onto `config`. Unknown keys are rejected.
void apply_config_json(RunConfig& config, std::string_view json_text);

RunConfig load_config(const std::filesystem::path& path);

/// Reads a weights block ({"bm25": 0.3, ...}); omitted signals keep defaults.
DeterministicWeights load_weights(const std::filesystem::path& path,
                                  const DeterministicWeights& base = {});

std::string config_to_json(const RunConfig& config);

}  // namespace impactrank
