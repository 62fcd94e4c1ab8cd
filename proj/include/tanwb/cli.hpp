#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tanwb/curves.hpp"
#include "tanwb/regression.hpp"
#include "tanwb/service.hpp"
#include "tanwb/summary.hpp"
#include "tanwb/synthetic.hpp"
#include "tanwb/threshold.hpp"

namespace tanwb::cli {

namespace fs = std::filesystem;

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1; // data, schema or computation error
inline constexpr int kUsage = 2;   // unknown flag / bad option value
inline constexpr int kMissingFile = 3;

struct RunConfig {
    std::string schema;
    std::string data;
    std::string task = "bm";
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    double alpha = 0.5;
    std::size_t grid = 0; // 0: 5001, or 2001 with a subpopulation
    std::string subpop;
    std::string out = ".";
    std::string mode = "pooled";
    std::string weights = "cmi";

    std::size_t effective_grid() const { return grid ? grid : (subpop.empty() ? 5001 : 2001); }
};

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Input reference for provenance: base name plus content fingerprint, so the
// same inputs in a different directory give identical artifacts.
inline nlohmann::json input_ref(const std::string& path)
{
    return {{"file", fs::path(path).filename().string()}, {"fnv1a", hex64(fnv1a(read_file(path)))}};
}

inline std::string provenance_comment(const nlohmann::json& config) { return "# tanwb " + config.dump() + "\n"; }

// Config recovered from the provenance comment of a CSV artifact, if any.
inline nlohmann::json provenance_from_comments(const std::vector<std::string>& comments)
{
    for (const auto& c : comments) {
        const std::string prefix = " tanwb ";
        if (c.rfind(prefix, 0) == 0) {
            try {
                return nlohmann::json::parse(c.substr(prefix.size()));
            } catch (const nlohmann::json::exception&) {
            }
        }
    }
    return nlohmann::json::object();
}

inline void write_text(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline std::string suffix_for(const std::string& subpop) { return subpop.empty() ? "all" : subpop; }

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(const std::vector<std::string>& args)
    {
        CLI::App app{"tanwb: tree-augmented naive Bayes workbench for biopsy-threshold analysis"};
        app.require_subcommand(1);
        app.set_help_all_flag("--help-all");

        auto add_common = [this](CLI::App* sub, bool needs_data) {
            if (needs_data) {
                sub->add_option("--schema", cfg_.schema, "Schema JSON file")->required();
                sub->add_option("--data", cfg_.data, "Case CSV file")->required();
            }
            sub->add_option("--out", cfg_.out, "Output directory")->capture_default_str();
        };
        auto add_task = [this](CLI::App* sub) {
            sub->add_option("--task", cfg_.task, "bm or b1m1")->check(CLI::IsMember({"bm", "b1m1"}))->capture_default_str();
        };

        auto* synth = app.add_subcommand("synth", "Sample a dataset from a ground-truth TAN model");
        add_common(synth, false);
        synth->add_option("--n", n_, "Number of cases (default: the model's target size)");
        synth->add_option("--seed", cfg_.seed, "Sampling seed")->capture_default_str();
        synth->add_option("--truth", truth_, "Ground-truth model JSON (default: built-in reference model)");

        auto* trainc = app.add_subcommand("train", "Fit a TAN model and write model.json");
        add_common(trainc, true);
        add_task(trainc);
        trainc->add_option("--alpha", cfg_.alpha, "Additive smoothing pseudo-count")->capture_default_str();
        trainc->add_option("--weights", cfg_.weights, "Edge weights: cmi or mi")->check(CLI::IsMember({"cmi", "mi"}))->capture_default_str();

        auto* crossval = app.add_subcommand("crossval", "Patient-grouped k-fold cross-validation; writes scores.csv");
        add_common(crossval, true);
        add_task(crossval);
        crossval->add_option("--folds", cfg_.folds, "Fold count")->capture_default_str();
        crossval->add_option("--seed", cfg_.seed, "Fold-plan seed")->capture_default_str();
        crossval->add_option("--alpha", cfg_.alpha, "Additive smoothing pseudo-count")->capture_default_str();
        crossval->add_option("--weights", cfg_.weights, "Edge weights: cmi or mi")->check(CLI::IsMember({"cmi", "mi"}))->capture_default_str();

        auto* sweep = app.add_subcommand("sweep", "Biopsy-threshold confusion table from scores.csv");
        add_common(sweep, false);
        sweep->add_option("--scores", scores_, "Scores CSV (default: <out>/scores.csv)");
        sweep->add_option("--grid", cfg_.grid, "Threshold grid points (default 5001; 2001 with --subpop)");
        sweep->add_option("--subpop", cfg_.subpop, "Age-group state to restrict to, e.g. Older");

        auto* curves = app.add_subcommand("curves", "ROC and PR curves with areas from scores.csv");
        add_common(curves, false);
        curves->add_option("--scores", scores_, "Scores CSV (default: <out>/scores.csv)");
        curves->add_option("--subpop", cfg_.subpop, "Age-group state to restrict to");
        curves->add_option("--mode", cfg_.mode, "pooled or per_fold")->check(CLI::IsMember({"pooled", "per_fold"}))->capture_default_str();

        auto* fitpoly = app.add_subcommand("fitpoly", "Cubic regressions over a threshold sweep");
        add_common(fitpoly, false);
        fitpoly->add_option("--sweep", sweep_, "Sweep CSV (default: <out>/sweep_<subpop|all>.csv)");
        fitpoly->add_option("--subpop", cfg_.subpop, "Selects the default sweep file");
        fitpoly->add_option("--relationship", relationship_, "precision_on_recall, fpr_on_precision or both")
            ->check(CLI::IsMember({"precision_on_recall", "fpr_on_precision", "both"}))
            ->capture_default_str();

        auto* summarizec = app.add_subcommand("summarize", "Per-variable state counts and outcome breakdown");
        add_common(summarizec, true);

        auto* predict = app.add_subcommand("predict", "Posterior for one feature vector (JSON) under a model");
        predict->add_option("--model", model_, "Model JSON")->required();
        predict->add_option("--features", features_, "Feature JSON object, inline or a file path")->required();

        auto* serve = app.add_subcommand("serve", "Start the decision service");
        serve->add_option("--model", model_, "Model JSON")->required();
        serve->add_option("--sweep", sweeps_, "Sweep CSV (repeatable); subpopulation read from its provenance");
        serve->add_option("--bind", bind_, "host:port")->capture_default_str();

        std::vector<const char*> argv{"tanwb"};
        for (const auto& a : args) argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out_, err_);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out_, err_);
        } catch (const CLI::ParseError& e) {
            app.exit(e, out_, err_);
            return kUsage;
        }

        try {
            if (*synth) return do_synth();
            if (*trainc) return do_train();
            if (*crossval) return do_crossval();
            if (*sweep) return do_sweep();
            if (*curves) return do_curves();
            if (*fitpoly) return do_fitpoly();
            if (*summarizec) return do_summarize();
            if (*predict) return do_predict();
            if (*serve) return do_serve();
        } catch (const IoError& e) {
            err_ << "error: " << e.what() << '\n';
            return kMissingFile;
        } catch (const Error& e) {
            err_ << "error: " << e.what() << '\n';
            return kFailure;
        } catch (const std::filesystem::filesystem_error& e) {
            err_ << "error: " << e.what() << '\n';
            return kMissingFile;
        }
        return kUsage;
    }

private:
    nlohmann::json base_config(const std::string& command) const
    {
        return {{"command", command}, {"version", 1}};
    }

    std::pair<Schema, Dataset> load_inputs(nlohmann::json& config) const
    {
        Schema schema = load_schema_file(cfg_.schema);
        Dataset ds = load_dataset_file(cfg_.data, schema);
        config["schema"] = input_ref(cfg_.schema);
        config["data"] = input_ref(cfg_.data);
        return {std::move(schema), std::move(ds)};
    }

    fs::path out_path(const std::string& name) const { return fs::path(cfg_.out) / name; }

    int do_synth()
    {
        GroundTruthModel truth;
        nlohmann::json config = base_config("synth");
        if (truth_.empty()) {
            truth = make_reference_model(cfg_.seed);
            config["truth"] = "reference";
        } else {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(read_file(truth_));
            } catch (const nlohmann::json::exception& e) {
                throw Error("ground-truth model: parse error: " + std::string(e.what()));
            }
            truth = ground_truth_from_json(doc);
            config["truth"] = input_ref(truth_);
        }
        const std::size_t n = n_ ? n_ : truth.target_size;
        config["n"] = n;
        config["seed"] = cfg_.seed;
        const Dataset ds = sample_dataset(truth, n, cfg_.seed);

        nlohmann::json schema_doc = ds.schema().to_json();
        schema_doc["provenance"] = config;
        write_text(out_path("schema.json"), schema_doc.dump(2) + "\n");
        std::ostringstream csv;
        csv << provenance_comment(config);
        render_dataset_csv(csv, ds);
        write_text(out_path("data.csv"), csv.str());
        nlohmann::json truth_doc = ground_truth_to_json(truth);
        truth_doc["provenance"] = config;
        write_text(out_path("truth_model.json"), truth_doc.dump(2) + "\n");
        out_ << "wrote " << n << " cases to " << out_path("data.csv").string() << '\n';
        return kOk;
    }

    LearnOptions learn_options() const { return {parse_edge_weight(cfg_.weights), cfg_.alpha}; }

    int do_train()
    {
        nlohmann::json config = base_config("train");
        auto [schema, ds] = load_inputs(config);
        config["task"] = cfg_.task;
        config["alpha"] = cfg_.alpha;
        config["weights"] = cfg_.weights;
        const TanModel model = train(ds, parse_task(cfg_.task), learn_options());
        nlohmann::json doc = model_to_json(model);
        doc["provenance"] = config;
        write_text(out_path("model.json"), doc.dump(2) + "\n");
        out_ << "model " << model_identifier(model) << " written to " << out_path("model.json").string() << '\n';
        return kOk;
    }

    int do_crossval()
    {
        nlohmann::json config = base_config("crossval");
        auto [schema, ds] = load_inputs(config);
        config["task"] = cfg_.task;
        config["folds"] = cfg_.folds;
        config["seed"] = cfg_.seed;
        config["alpha"] = cfg_.alpha;
        config["weights"] = cfg_.weights;
        const FoldPlan plan = build_fold_plan(ds, cfg_.folds, cfg_.seed);
        CrossValidationOptions opts;
        opts.learn = learn_options();
        const auto scored = run_cross_validation(ds, plan, parse_task(cfg_.task), opts);
        std::ostringstream csv;
        csv << provenance_comment(config);
        write_scores_csv(csv, scored);
        write_text(out_path("scores.csv"), csv.str());
        out_ << "scored " << scored.size() << " cases in " << cfg_.folds << " folds -> "
             << out_path("scores.csv").string() << '\n';
        return kOk;
    }

    // Loads scores plus their upstream provenance (task lives there).
    std::vector<ScoredCase> load_scores(nlohmann::json& config, Task& task) const
    {
        const std::string path = scores_.empty() ? out_path("scores.csv").string() : scores_;
        const std::string text = read_file(path);
        std::istringstream in(text);
        std::vector<std::string> comments;
        auto scored = read_scores_csv(in, &comments);
        const nlohmann::json upstream = provenance_from_comments(comments);
        config["scores"] = {{"file", fs::path(path).filename().string()}, {"fnv1a", hex64(fnv1a(text))}};
        if (upstream.contains("task")) config["task"] = upstream["task"];
        if (upstream.contains("seed")) config["seed"] = upstream["seed"];
        task = parse_task(upstream.value("task", std::string("bm")));
        if (!cfg_.subpop.empty()) {
            scored = filter_subpopulation(scored, cfg_.subpop);
            if (scored.empty()) throw Error("no scored cases in subpopulation '" + cfg_.subpop + "'");
        }
        config["subpop"] = cfg_.subpop;
        return scored;
    }

    int do_sweep()
    {
        nlohmann::json config = base_config("sweep");
        Task task;
        const auto scored = load_scores(config, task);
        config["grid"] = cfg_.effective_grid();
        const ThresholdReport report = threshold_sweep(scored, cfg_.effective_grid(), task, cfg_.subpop);
        std::ostringstream csv;
        csv << provenance_comment(config);
        write_sweep_csv(csv, report);
        const auto path = out_path("sweep_" + suffix_for(cfg_.subpop) + ".csv");
        write_text(path, csv.str());
        out_ << "sweep with " << report.grid_points() << " thresholds over " << scored.size() << " cases -> "
             << path.string() << '\n';
        return kOk;
    }

    int do_curves()
    {
        nlohmann::json config = base_config("curves");
        Task task;
        const auto scored = load_scores(config, task);
        config["mode"] = cfg_.mode;
        const PoolingMode mode = parse_pooling_mode(cfg_.mode);
        const std::string suffix = suffix_for(cfg_.subpop);
        for (CurveKind kind : {CurveKind::roc, CurveKind::pr}) {
            const CurveResult r = build_curves(scored, kind, mode);
            std::ostringstream csv;
            csv << provenance_comment(config);
            write_curve_csv(csv, r);
            const std::string stem = std::string(to_string(kind)) + "_" + suffix;
            write_text(out_path(stem + ".csv"), csv.str());
            nlohmann::json side = r.summary.to_json();
            side["provenance"] = config;
            write_text(out_path(stem + ".json"), side.dump(2) + "\n");
            out_ << (kind == CurveKind::roc ? "AUC" : "AUCPR") << " = " << format_fixed(r.summary.area, 3) << " ("
                 << to_string(mode) << ")\n";
        }
        return kOk;
    }

    int do_fitpoly()
    {
        nlohmann::json config = base_config("fitpoly");
        const std::string path =
            sweep_.empty() ? out_path("sweep_" + suffix_for(cfg_.subpop) + ".csv").string() : sweep_;
        const std::string text = read_file(path);
        std::istringstream in(text);
        const ThresholdReport report = read_sweep_csv(in);
        config["sweep"] = {{"file", fs::path(path).filename().string()}, {"fnv1a", hex64(fnv1a(text))}};
        std::vector<Relationship> rels;
        if (relationship_ == "both") rels = {Relationship::precision_on_recall, Relationship::fpr_on_precision};
        else rels = {parse_relationship(relationship_)};
        for (Relationship rel : rels) {
            nlohmann::json cfg = config;
            cfg["relationship"] = to_string(rel);
            const auto points = relationship_points(report, rel);
            cfg["rows_used"] = points.size();
            cfg["rows_in_sweep"] = report.grid_points();
            const RegressionReport rep = fit_curve_relationship(points, rel);
            std::ostringstream txt;
            txt << provenance_comment(cfg);
            render_regression_text(txt, rep);
            const std::string stem = "fitpoly_" + std::string(to_string(rel));
            write_text(out_path(stem + ".txt"), txt.str());
            nlohmann::json doc = regression_to_json(rep);
            doc["provenance"] = cfg;
            write_text(out_path(stem + ".json"), doc.dump(2) + "\n");
            out_ << to_string(rel) << ": R-Square " << format_fixed(rep.r_square, 6) << " over " << rep.n << " rows\n";
        }
        return kOk;
    }

    int do_summarize()
    {
        nlohmann::json config = base_config("summarize");
        auto [schema, ds] = load_inputs(config);
        const DatasetSummary s = summarize(ds);
        std::ostringstream txt;
        txt << provenance_comment(config);
        render_summary(txt, s);
        write_text(out_path("summary.txt"), txt.str());
        nlohmann::json doc = s.to_json();
        doc["provenance"] = config;
        write_text(out_path("summary.json"), doc.dump(2) + "\n");
        render_summary(out_, s);
        return kOk;
    }

    int do_predict()
    {
        const TanModel model = load_model_file(model_);
        const std::string text = !features_.empty() && features_.front() == '{' ? features_ : read_file(features_);
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("features: not valid JSON: ") + e.what());
        }
        const ServiceReply reply = predict_reply(model, model_identifier(model), req);
        if (reply.status != 200) {
            err_ << "error: " << reply.body.dump() << '\n';
            return kFailure;
        }
        out_ << reply.body.dump() << '\n';
        return kOk;
    }

    int do_serve()
    {
        ServiceArtifacts artifacts;
        artifacts.model = std::make_shared<const TanModel>(load_model_file(model_));
        for (const auto& path : sweeps_) {
            std::ifstream in(path);
            if (!in) throw IoError("cannot open sweep file '" + path + "'");
            std::vector<std::string> comments;
            ThresholdReport r = read_sweep_csv(in, &comments);
            r.subpopulation = provenance_from_comments(comments).value("subpop", std::string());
            artifacts.sweeps[r.subpopulation] = std::move(r);
        }
        DecisionService service;
        service.publish(std::move(artifacts));
        const auto colon = bind_.rfind(':');
        if (colon == std::string::npos) throw Error("--bind expects host:port");
        const std::string host = bind_.substr(0, colon);
        int port = 0;
        try {
            port = std::stoi(bind_.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error("--bind: invalid port in '" + bind_ + "'");
        }
        httplib::Server server;
        service.mount(server);
        out_ << "serving model " << service.snapshot()->model_id << " on " << bind_ << std::endl;
        if (!server.listen(host, port)) throw Error("cannot bind " + bind_);
        return kOk;
    }

    std::ostream& out_;
    std::ostream& err_;
    RunConfig cfg_;
    std::size_t n_ = 0;
    std::string truth_, scores_, sweep_, relationship_ = "both", model_, features_, bind_ = "127.0.0.1:8080";
    std::vector<std::string> sweeps_;
};

inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return Runner(out, err).run(args);
}

} // namespace tanwb::cli
