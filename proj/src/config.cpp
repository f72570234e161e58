#include "impactrank/config.hpp"

#include "impactrank/error.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace impactrank {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError(std::string("cannot open ") + what + ": " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_object(std::string_view text, const std::string& what) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(what + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError(what + ": expected a JSON object");
    return j;
}

using Handler = std::function<void(const json&)>;

// Applies each key of `obj` through `handlers`; unknown keys are errors.
void dispatch(const json& obj, const std::map<std::string, Handler>& handlers, const std::string& scope) {
    if (!obj.is_object()) throw UsageError("config: '" + scope + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        auto it = handlers.find(key);
        if (it == handlers.end())
            throw UsageError("config: unknown key '" + (scope.empty() ? key : scope + "." + key) + "'");
        try {
            it->second(value);
        } catch (const json::type_error&) {
            throw UsageError("config: wrong type for '" + (scope.empty() ? key : scope + "." + key) + "'");
        }
    }
}

template <typename T>
Handler set(T& field) {
    return [&field](const json& v) { field = v.get<T>(); };
}

Handler set_path(std::filesystem::path& field) {
    return [&field](const json& v) { field = v.get<std::string>(); };
}

void apply_weights(DeterministicWeights& weights, const json& obj) {
    std::map<std::string, Handler> handlers;
    for (std::size_t i = 0; i < kSignalCount; ++i) handlers[std::string(signal_names()[i])] = set(weights.values[i]);
    dispatch(obj, handlers, "weights");
    weights.validate();
}

}  // namespace

void apply_config_json(RunConfig& c, std::string_view json_text) {
    const json root = parse_object(json_text, "config");
    std::map<std::string, Handler> handlers{
        {"files", set_path(c.files)},
        {"symbols", set_path(c.symbols)},
        {"calls", set_path(c.calls)},
        {"history", set_path(c.history)},
        {"source_root", set_path(c.source_root)},
        {"fallback_ast", set(c.fallback_ast)},
        {"snapshot", set_path(c.snapshot)},
        {"model", set_path(c.model)},
        {"out_dir", set_path(c.out_dir)},
        {"weights", [&](const json& v) { apply_weights(c.weights, v); }},
        {"bm25", [&](const json& v) { dispatch(v, {{"k1", set(c.bm25.k1)}, {"b", set(c.bm25.b)}}, "bm25"); }},
        {"pagerank",
         [&](const json& v) {
             dispatch(v,
                      {{"damping", set(c.pagerank.damping)},
                       {"tol", set(c.pagerank.tol)},
                       {"max_iter", set(c.pagerank.max_iter)}},
                      "pagerank");
         }},
        {"stages",
         [&](const json& v) {
             dispatch(v,
                      {{"first", set(c.stages.first)},
                       {"second", set(c.stages.second)},
                       {"final_min", set(c.stages.final_min)},
                       {"final_max", set(c.stages.final_max)}},
                      "stages");
         }},
        {"keyword_mode",
         [&](const json& v) {
             const auto s = v.get<std::string>();
             if (s == "local") c.keyword_mode = KeywordMode::local;
             else if (s == "llm") c.keyword_mode = KeywordMode::llm;
             else throw UsageError("config: keyword_mode must be 'local' or 'llm'");
         }},
        {"llm",
         [&](const json& v) {
             dispatch(v,
                      {{"base_url", set(c.llm.base_url)},
                       {"path", set(c.llm.path)},
                       {"model", set(c.llm.model)},
                       {"timeout_s", set(c.llm.timeout_s)}},
                      "llm");
         }},
        {"now", [&](const json& v) { c.now = v.get<std::int64_t>(); }},
        {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
        {"top_k", set(c.top_k)},
        {"top_n", set(c.top_n)},
        {"attention",
         [&](const json& v) {
             dispatch(v,
                      {{"hidden_dim", set(c.attention.hidden_dim)},
                       {"head_count", set(c.attention.head_count)},
                       {"scale_mode",
                        [&](const json& s) { c.attention.scale_mode = parse_scale_mode(s.get<std::string>()); }},
                       {"combine_mode",
                        [&](const json& s) { c.attention.combine_mode = parse_combine_mode(s.get<std::string>()); }},
                       {"pagerank_weight", set(c.attention.pagerank_weight)}},
                      "attention");
         }},
        {"train",
         [&](const json& v) {
             dispatch(v,
                      {{"learning_rate", set(c.train.learning_rate)},
                       {"beta1", set(c.train.beta1)},
                       {"beta2", set(c.train.beta2)},
                       {"eps", set(c.train.eps)},
                       {"epochs", set(c.train.epochs)},
                       {"margin", set(c.train.margin)},
                       {"loss_mode",
                        [&](const json& s) { c.train.loss_mode = parse_loss_mode(s.get<std::string>()); }},
                       {"train_fraction", set(c.train.train_fraction)},
                       {"val_fraction", set(c.train.val_fraction)},
                       {"test_fraction", set(c.train.test_fraction)}},
                      "train");
         }},
    };
    dispatch(root, handlers, "");
    c.stages.validate();
    c.attention.validate();
    c.train.validate();
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig config;
    apply_config_json(config, read_text(path, "config"));
    // Relative paths inside a config file resolve against its directory.
    const auto base = path.parent_path();
    for (auto* p : {&config.files, &config.symbols, &config.calls, &config.history, &config.source_root,
                    &config.snapshot, &config.model, &config.out_dir})
        if (!p->empty() && p->is_relative() && !base.empty()) *p = base / *p;
    return config;
}

DeterministicWeights load_weights(const std::filesystem::path& path, const DeterministicWeights& base) {
    DeterministicWeights weights = base;
    json root = parse_object(read_text(path, "weights"), "weights");
    if (root.contains("weights") && root.size() == 1) root = root["weights"];
    apply_weights(weights, root);
    return weights;
}

std::string config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    auto path = [](const std::filesystem::path& p) { return p.generic_string(); };
    j["files"] = path(c.files);
    j["symbols"] = path(c.symbols);
    j["calls"] = path(c.calls);
    j["history"] = path(c.history);
    j["source_root"] = path(c.source_root);
    j["fallback_ast"] = c.fallback_ast;
    j["snapshot"] = path(c.snapshot);
    j["model"] = path(c.model);
    j["out_dir"] = path(c.out_dir);
    auto& w = j["weights"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < kSignalCount; ++i) w[std::string(signal_names()[i])] = c.weights.values[i];
    j["bm25"] = {{"k1", c.bm25.k1}, {"b", c.bm25.b}};
    j["pagerank"] = {{"damping", c.pagerank.damping}, {"tol", c.pagerank.tol}, {"max_iter", c.pagerank.max_iter}};
    j["stages"] = {{"first", c.stages.first},
                   {"second", c.stages.second},
                   {"final_min", c.stages.final_min},
                   {"final_max", c.stages.final_max}};
    j["keyword_mode"] = c.keyword_mode == KeywordMode::llm ? "llm" : "local";
    j["llm"] = {{"base_url", c.llm.base_url},
                {"path", c.llm.path},
                {"model", c.llm.model},
                {"timeout_s", c.llm.timeout_s}};
    if (c.now) j["now"] = *c.now;
    if (c.seed) j["seed"] = *c.seed;
    j["top_k"] = c.top_k;
    j["top_n"] = c.top_n;
    j["attention"] = {{"hidden_dim", c.attention.hidden_dim},
                      {"head_count", c.attention.head_count},
                      {"scale_mode", std::string(to_string(c.attention.scale_mode))},
                      {"combine_mode", std::string(to_string(c.attention.combine_mode))},
                      {"pagerank_weight", c.attention.pagerank_weight}};
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"eps", c.train.eps},
                  {"epochs", c.train.epochs},
                  {"margin", c.train.margin},
                  {"loss_mode", std::string(to_string(c.train.loss_mode))},
                  {"train_fraction", c.train.train_fraction},
                  {"val_fraction", c.train.val_fraction},
                  {"test_fraction", c.train.test_fraction}};
    return j.dump(2);
}

}  // namespace impactrank
