#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "httplib.h"

#include "tanwb/model.hpp"
#include "tanwb/threshold.hpp"

namespace tanwb {

// Everything the decision service reads. Immutable once published.
struct ServiceArtifacts {
    std::shared_ptr<const TanModel> model;
    std::string model_id;
    // Threshold sweeps keyed by subpopulation label ("" = whole population).
    std::map<std::string, ThresholdReport> sweeps;
};

// Identifier of a model: fingerprint of its canonical JSON form.
inline std::string model_identifier(const TanModel& m) { return hex64(fnv1a(model_to_json(m).dump())); }

struct ServiceReply {
    int status = 200;
    nlohmann::json body;
};

inline ServiceReply error_reply(int status, std::string error, std::vector<std::string> details = {})
{
    return {status, {{"error", std::move(error)}, {"details", std::move(details)}}};
}

// Validates a feature-name -> state-label mapping against the model schema
// and scores it. Every feature is required; unknown names are rejected.
// Shared by the HTTP handler and the CLI `predict` command.
inline ServiceReply predict_reply(const TanModel& model, const std::string& model_id, const nlohmann::json& request)
{
    const nlohmann::json* features = &request;
    if (request.is_object() && request.contains("features")) features = &request["features"];
    if (!features->is_object()) return error_reply(400, "request must be a JSON object of feature -> state");

    const Schema& schema = model.schema();
    std::vector<std::string> details;
    std::vector<std::uint16_t> x(schema.feature_count(), 0);
    for (std::size_t f = 0; f < schema.feature_count(); ++f) {
        const Variable& var = schema.feature(f);
        auto it = features->find(var.name);
        if (it == features->end()) {
            details.push_back("missing feature '" + var.name + "'");
            continue;
        }
        if (!it->is_string()) {
            details.push_back("feature '" + var.name + "' must be a state label string");
            continue;
        }
        auto idx = var.state_index(it->get<std::string>());
        if (!idx) {
            details.push_back("illegal state '" + it->get<std::string>() + "' for feature '" + var.name + "'");
            continue;
        }
        x[f] = static_cast<std::uint16_t>(*idx);
    }
    for (auto it = features->begin(); it != features->end(); ++it)
        if (!schema.feature_index(it.key())) details.push_back("unknown feature '" + it.key() + "'");
    if (!details.empty()) return error_reply(400, "invalid feature vector", std::move(details));
    try {
        return {200,
                {{"probability", posterior(model, x)}, {"task", to_string(model.task())}, {"model_id", model_id}}};
    } catch (const Error& e) {
        return error_reply(422, e.what());
    }
}

inline nlohmann::json model_info_json(const TanModel& m, const std::string& model_id)
{
    const Schema& schema = m.schema();
    nlohmann::json edges = nlohmann::json::array();
    for (std::size_t f = 0; f < schema.feature_count(); ++f)
        if (const auto& p = m.structure().parent[f])
            edges.push_back({{"parent", schema.feature(*p).name}, {"child", schema.feature(f).name}});
    nlohmann::json vars = nlohmann::json::array();
    for (std::size_t f = 0; f < schema.feature_count(); ++f)
        vars.push_back({{"name", schema.feature(f).name}, {"states", schema.feature(f).states}});
    return {{"model_id", model_id},
            {"schema_hash", schema.hash()},
            {"task", to_string(m.task())},
            {"alpha", m.alpha()},
            {"class_variable", schema.class_variable_name()},
            {"root", schema.feature(m.structure().root).name},
            {"edges", edges},
            {"variables", vars}};
}

class DecisionService {
public:
    DecisionService() : artifacts_(std::make_shared<const ServiceArtifacts>()) {}

    // Swaps in a complete artifact set; in-flight requests keep the old one.
    void publish(ServiceArtifacts next)
    {
        if (next.model && next.model_id.empty()) next.model_id = model_identifier(*next.model);
        auto ptr = std::make_shared<const ServiceArtifacts>(std::move(next));
        std::lock_guard lock(mu_);
        artifacts_ = std::move(ptr);
    }

    std::shared_ptr<const ServiceArtifacts> snapshot() const
    {
        std::lock_guard lock(mu_);
        return artifacts_;
    }

    ServiceReply predict(const nlohmann::json& request) const
    {
        auto a = snapshot();
        if (!a->model) return error_reply(503, "no model loaded");
        return predict_reply(*a->model, a->model_id, request);
    }

    ServiceReply predict_body(const std::string& body) const
    {
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            return error_reply(400, "request body is not valid JSON", {e.what()});
        }
        return predict(req);
    }

    // Sweep row at the largest grid threshold <= t.
    ServiceReply threshold(const std::string& t_text, const std::string& subpop) const
    {
        auto a = snapshot();
        if (a->sweeps.empty()) return error_reply(503, "no sweep loaded");
        double t;
        try {
            t = parse_real(t_text);
        } catch (const Error&) {
            return error_reply(400, "query parameter t must be a number in [0,1]", {"t='" + t_text + "'"});
        }
        if (!(t >= 0.0 && t <= 1.0)) return error_reply(400, "query parameter t must be in [0,1]", {"t=" + t_text});
        // "All" names the whole-population sweep unless a sweep is literally
        // labelled that way.
        std::string key = subpop;
        if ((key == "All" || key == "all") && !a->sweeps.count(key)) key.clear();
        auto it = a->sweeps.find(key);
        if (it == a->sweeps.end()) {
            std::vector<std::string> loaded;
            for (const auto& [k, v] : a->sweeps) loaded.push_back(k.empty() ? "(all)" : k);
            return error_reply(404, "no sweep loaded for subpopulation '" + subpop + "'", loaded);
        }
        const ThresholdReport& r = it->second;
        nlohmann::json body = sweep_row_json(r.row_at_or_below(t), r.task);
        body["requested_threshold"] = t;
        body["subpopulation"] = subpop;
        body["task"] = to_string(r.task);
        body["grid_points"] = r.grid_points();
        return {200, body};
    }

    ServiceReply model_info() const
    {
        auto a = snapshot();
        if (!a->model) return error_reply(503, "no model loaded");
        return {200, model_info_json(*a->model, a->model_id)};
    }

    ServiceReply schema() const
    {
        auto a = snapshot();
        if (!a->model) return error_reply(503, "no model loaded");
        nlohmann::json body = a->model->schema().to_json();
        body["schema_hash"] = a->model->schema().hash();
        nlohmann::json subpops = nlohmann::json::array();
        for (const auto& [k, v] : a->sweeps) subpops.push_back(k);
        body["sweeps"] = subpops;
        return {200, body};
    }

    void mount(httplib::Server& server) const
    {
        auto send = [](httplib::Response& res, const ServiceReply& r) {
            res.status = r.status;
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_content(r.body.dump(), "application/json");
        };
        server.Post("/api/predict", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, predict_body(req.body));
        });
        server.Get("/api/threshold", [this, send](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("t")) return send(res, error_reply(400, "missing query parameter t"));
            send(res, threshold(req.get_param_value("t"), req.has_param("subpop") ? req.get_param_value("subpop") : ""));
        });
        server.Get("/api/model", [this, send](const httplib::Request&, httplib::Response& res) { send(res, model_info()); });
        server.Get("/api/schema", [this, send](const httplib::Request&, httplib::Response& res) { send(res, schema()); });
        server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
    }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const ServiceArtifacts> artifacts_;
};

} // namespace tanwb
