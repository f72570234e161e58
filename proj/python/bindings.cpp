#include "impactrank/commands.hpp"
#include "impactrank/error.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace impactrank;

namespace {

ChangeRequest make_request(const std::string& text, const std::string& change_type, const std::string& request_id,
                           std::int64_t timestamp) {
    ChangeRequest r;
    r.request_id = request_id;
    r.text = text;
    r.change_type = parse_change_type(change_type);
    r.timestamp = timestamp;
    return r;
}

RunConfig config_from(const std::string& config_json) {
    RunConfig c;
    if (!config_json.empty()) apply_config_json(c, config_json);
    return c;
}

py::dict report_dict(const RankingReport& r) {
    py::list ranked;
    for (const auto& f : r.ranked) {
        py::dict d;
        d["file_id"] = f.file_id;
        d["path"] = f.path;
        d["final_score"] = f.final_score;
        d["deterministic_score"] = f.deterministic_score;
        d["adjustment"] = f.adjustment;
        d["pagerank_term"] = f.pagerank_term;
        ranked.append(d);
    }
    py::dict out;
    out["request_id"] = r.request_id;
    out["ranked"] = ranked;
    out["keywords"] = r.keywords;
    out["keyword_source"] = r.keyword_source;
    out["used_model"] = r.used_model;
    out["combine_mode"] = r.combine_mode;
    out["averaged_attention"] = r.averaged_attention;
    return out;
}

py::dict metrics_dict(const SplitMetrics& m) {
    py::dict d;
    d["cases"] = m.cases;
    d["recall@10"] = m.recall10;
    d["recall@50"] = m.recall50;
    d["all_found@10"] = m.all_found10;
    d["all_found@50"] = m.all_found50;
    d["mrr"] = m.mrr;
    return d;
}

}  // namespace

PYBIND11_MODULE(_impactrank, m) {
    m.doc() = "Change-impact file ranking: deterministic scoring with an attention refinement layer.";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    m.def("tokenize", &tokenize_terms, py::arg("text"));
    m.def(
        "extract_keywords",
        [](const std::string& text, const std::string& change_type) {
            return extract_keywords_local(make_request(text, change_type, "", 0)).keywords;
        },
        py::arg("text"), py::arg("change_type") = "bugfix");

    m.def(
        "pagerank",
        [](const Eigen::MatrixXd& weights, double damping, double tol, int max_iter) {
            const auto r = pagerank(WeightedDigraph::from_matrix(weights), {damping, tol, max_iter});
            return py::make_tuple(r.scores, r.iterations, r.converged);
        },
        py::arg("weights"), py::arg("damping") = 0.85, py::arg("tol") = 1e-8, py::arg("max_iter") = 100,
        "PageRank of a dense weight matrix; returns (scores, iterations, converged).");

    m.def("recall_at_k",
          [](const std::vector<std::string>& ranked, const std::set<std::string>& truth, std::size_t k) {
              const auto r = recall_at_k(ranked, truth, k);
              return py::make_tuple(r.fraction, r.all_found);
          },
          py::arg("ranked"), py::arg("truth"), py::arg("k"));
    m.def("reciprocal_rank", &reciprocal_rank, py::arg("ranked"), py::arg("truth"));
    m.def("mrr", &mrr, py::arg("cases"));
    m.def("attention_coverage", &attention_coverage, py::arg("mass"),
          py::arg("n_values") = std::vector<std::size_t>{});

    py::enum_<CombineMode>(m, "CombineMode")
        .value("additive", CombineMode::additive)
        .value("multiplicative", CombineMode::multiplicative)
        .value("attention_only", CombineMode::attention_only);
    m.def("combine_scores", &combine_scores, py::arg("deterministic"), py::arg("adjustments"),
          py::arg("pagerank"), py::arg("mode") = CombineMode::additive, py::arg("pagerank_weight") = 0.1);

    py::class_<AttentionModel>(m, "AttentionModel")
        .def_static(
            "initialize",
            [](std::uint64_t seed, std::size_t hidden_dim, std::size_t head_count) {
                AttentionConfig c;
                c.hidden_dim = hidden_dim;
                c.head_count = head_count;
                AttentionModel model = AttentionModel::initialize(c, seed);
                model.scaler = FeatureScaler::identity();
                return model;
            },
            py::arg("seed"), py::arg("hidden_dim") = 64, py::arg("head_count") = 4,
            "Seeded random model with an identity feature scaler.")
        .def_static(
            "zeros",
            [](std::size_t hidden_dim, std::size_t head_count, double pagerank_weight) {
                AttentionConfig c;
                c.hidden_dim = hidden_dim;
                c.head_count = head_count;
                c.pagerank_weight = pagerank_weight;
                AttentionModel model = AttentionModel::zeros(c);
                model.scaler = FeatureScaler::identity();
                return model;
            },
            py::arg("hidden_dim") = 64, py::arg("head_count") = 4, py::arg("pagerank_weight") = 0.1,
            "All-zero model with an identity feature scaler.")
        .def_static("load", &load_model, py::arg("path"))
        .def("save", [](const AttentionModel& self, const std::filesystem::path& p) { save_model(self, p); })
        .def("to_bytes", [](const AttentionModel& self) { return py::bytes(serialize_model(self)); })
        .def_static("from_bytes", [](const py::bytes& b) { return deserialize_model(std::string(b)); })
        .def_property_readonly("head_count", [](const AttentionModel& self) { return self.heads.size(); })
        .def_property_readonly("hidden_dim", [](const AttentionModel& self) { return self.config.hidden_dim; })
        .def(
            "forward",
            [](const AttentionModel& self, const Eigen::MatrixXd& x) {
                const AttentionOutput out = forward(x, self);
                py::dict d;
                d["adjustments"] = out.adjustments;
                d["averaged_attention"] = out.averaged_attention;
                d["per_head_attention"] = out.per_head_attention;
                d["attention_pagerank"] = out.attention_pagerank;
                d["z"] = out.z;
                return d;
            },
            py::arg("x"), "Forward pass on an already scaled N x 20 feature matrix.")
        .def("__eq__", [](const AttentionModel& a, const AttentionModel& b) { return a == b; });

    m.def(
        "index",
        [](const std::string& config_json) {
            const IndexResult r = cmd_index(config_from(config_json));
            py::dict d;
            d["snapshot"] = r.snapshot_path;
            d["content_hash"] = r.content_hash;
            d["files"] = r.file_count;
            d["edges"] = r.edge_count;
            d["complete"] = r.complete;
            d["warnings"] = r.warnings.total();
            return d;
        },
        py::arg("config_json"), "Ingest exports and write the snapshot named in the JSON config.");

    m.def(
        "rank",
        [](const std::string& config_json, const std::string& text, const std::string& change_type,
           const std::string& request_id) {
            return report_dict(cmd_rank(config_from(config_json), make_request(text, change_type, request_id, 0)));
        },
        py::arg("config_json"), py::arg("text"), py::arg("change_type") = "bugfix", py::arg("request_id") = "py");

    m.def(
        "train",
        [](const std::string& config_json, const std::filesystem::path& corpus) {
            const TrainSummary s = cmd_train(config_from(config_json), corpus);
            py::dict d;
            d["checkpoint"] = s.checkpoint;
            d["best_epoch"] = s.result.best_epoch;
            d["val"] = metrics_dict(s.val);
            d["test"] = metrics_dict(s.test);
            d["test_deterministic"] = metrics_dict(s.test_deterministic);
            return d;
        },
        py::arg("config_json"), py::arg("corpus"));

    m.def(
        "evaluate",
        [](const std::string& config_json, const std::filesystem::path& corpus) {
            const EvalSummary s = cmd_eval(config_from(config_json), corpus);
            py::dict d;
            d["deterministic"] = metrics_dict(s.deterministic);
            d["model"] = metrics_dict(s.model);
            d["cases"] = s.cases.size();
            return d;
        },
        py::arg("config_json"), py::arg("corpus"));

    m.def(
        "explain",
        [](const std::string& config_json, const std::string& text, const std::string& change_type) {
            return cmd_explain(config_from(config_json), make_request(text, change_type, "py", 0)).files;
        },
        py::arg("config_json"), py::arg("text"), py::arg("change_type") = "bugfix");

    m.def(
        "main",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "impactrank");
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            py::gil_scoped_release release;
            return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "Run the command-line interface; returns the exit code.");
}
