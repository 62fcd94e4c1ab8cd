#pragma once

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tanwb/counts.hpp"
#include "tanwb/tree.hpp"

namespace tanwb {

struct LearnOptions {
    EdgeWeight weight = EdgeWeight::conditional_mi;
    double alpha = 0.5;
};

// Tree-augmented naive Bayes model over a binary class.
//
// Tables are flat: the root feature's table is indexed [c][x], every other
// feature's table is indexed [c][x_parent][x]. Probabilities are stored as
// given and their logarithms are cached for inference.
class TanModel {
public:
    TanModel() = default;

    TanModel(Schema schema, Task task, TanStructure structure, double alpha, std::array<double, 2> prior,
             std::vector<std::vector<double>> tables, EdgeWeight weight = EdgeWeight::conditional_mi)
        : schema_(std::move(schema)), task_(task), structure_(std::move(structure)), alpha_(alpha),
          weight_(weight), prior_(prior), tables_(std::move(tables))
    {
        structure_.validate();
        if (structure_.feature_count() != schema_.feature_count())
            throw Error("TanModel: structure covers " + std::to_string(structure_.feature_count()) +
                        " features, schema has " + std::to_string(schema_.feature_count()));
        if (tables_.size() != schema_.feature_count()) throw Error("TanModel: one table per feature required");
        for (std::size_t f = 0; f < tables_.size(); ++f)
            if (tables_[f].size() != table_size(f))
                throw Error("TanModel: table for '" + schema_.feature(f).name + "' has wrong size");
        valid_ = std::isfinite(prior_[0]) && std::isfinite(prior_[1]);
        for (const auto& t : tables_)
            for (double p : t) valid_ = valid_ && std::isfinite(p);
        log_prior_ = {std::log(prior_[0]), std::log(prior_[1])};
        log_tables_ = tables_;
        for (auto& t : log_tables_)
            for (double& p : t) p = std::log(p);
    }

    const Schema& schema() const { return schema_; }
    Task task() const { return task_; }
    const TanStructure& structure() const { return structure_; }
    double alpha() const { return alpha_; }
    EdgeWeight edge_weight() const { return weight_; }
    const std::array<double, 2>& prior() const { return prior_; }
    const std::vector<std::vector<double>>& tables() const { return tables_; }

    // False when some conditional distribution is undefined (alpha = 0 and
    // an unseen parent configuration); inference is refused in that case.
    bool valid() const { return valid_; }

    std::size_t parent_states(std::size_t f) const
    {
        const auto& p = structure_.parent[f];
        return p ? schema_.feature(*p).state_count() : 1;
    }

    std::size_t table_size(std::size_t f) const { return 2 * parent_states(f) * schema_.feature(f).state_count(); }

    // Row offset of P(. | c, parent state) inside table f.
    std::size_t row_offset(std::size_t f, int c, std::size_t parent_state) const
    {
        return (c * parent_states(f) + parent_state) * schema_.feature(f).state_count();
    }

    double probability(std::size_t f, int c, std::size_t parent_state, std::size_t state) const
    {
        return tables_[f][row_offset(f, c, parent_state) + state];
    }

    // Unnormalized log joint log P(c, x).
    double log_joint(int c, std::span<const std::uint16_t> x) const
    {
        double lp = log_prior_[c];
        for (std::size_t f = 0; f < log_tables_.size(); ++f) {
            const auto& p = structure_.parent[f];
            const std::size_t ps = p ? x[*p] : 0;
            lp += log_tables_[f][row_offset(f, c, ps) + x[f]];
        }
        return lp;
    }

private:
    Schema schema_;
    Task task_ = Task::bm;
    TanStructure structure_;
    double alpha_ = 0.5;
    EdgeWeight weight_ = EdgeWeight::conditional_mi;
    std::array<double, 2> prior_{0.5, 0.5};
    std::vector<std::vector<double>> tables_;
    std::array<double, 2> log_prior_{};
    std::vector<std::vector<double>> log_tables_;
    bool valid_ = true;
};

inline TanStructure learn_structure(const CountCube& counts, EdgeWeight weight = EdgeWeight::conditional_mi)
{
    const std::size_t nf = counts.feature_count();
    if (nf == 0) throw Error("learn_structure: no features");
    const auto edges = max_weight_spanning_tree(edge_weights(counts, weight));
    return orient_tree(edges, 0, nf);
}

inline TanStructure learn_structure(const Dataset& ds, Task task, EdgeWeight weight = EdgeWeight::conditional_mi)
{
    return learn_structure(tabulate_counts(ds, task), weight);
}

// Additive smoothing: P(x = s | parents = p) = (N[s,p] + alpha) / (N[p] + alpha |states|).
// With alpha = 0 an empty parent configuration yields NaN and an invalid model.
inline TanModel estimate_cpts(const Schema& schema, Task task, const CountCube& counts,
                              const TanStructure& structure, double alpha,
                              EdgeWeight weight = EdgeWeight::conditional_mi)
{
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error("estimate_cpts: alpha must be a finite value >= 0");
    auto smooth = [alpha](double n, double total, std::size_t k) {
        const double denom = total + alpha * static_cast<double>(k);
        return denom > 0.0 ? (n + alpha) / denom : std::nan("");
    };
    std::array<double, 2> prior;
    for (int c = 0; c < 2; ++c)
        prior[c] = smooth(static_cast<double>(counts.class_count(c)), static_cast<double>(counts.total()), 2);

    const std::size_t nf = schema.feature_count();
    std::vector<std::vector<double>> tables(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const std::size_t k = schema.feature(f).state_count();
        const auto& par = structure.parent.at(f);
        const std::size_t pk = par ? schema.feature(*par).state_count() : 1;
        auto& t = tables[f];
        t.resize(2 * pk * k);
        for (int c = 0; c < 2; ++c)
            for (std::size_t ps = 0; ps < pk; ++ps) {
                const double parent_n = par ? static_cast<double>(counts.single(c, *par, ps))
                                            : static_cast<double>(counts.class_count(c));
                for (std::size_t s = 0; s < k; ++s) {
                    const double n = par ? static_cast<double>(counts.joint(c, *par, ps, f, s))
                                         : static_cast<double>(counts.single(c, f, s));
                    t[(c * pk + ps) * k + s] = smooth(n, parent_n, k);
                }
            }
    }
    return TanModel(schema, task, structure, alpha, prior, std::move(tables), weight);
}

inline TanModel estimate_cpts(const Dataset& ds, Task task, const TanStructure& structure, double alpha)
{
    return estimate_cpts(ds.schema(), task, tabulate_counts(ds, task), structure, alpha);
}

// Structure + parameters from the given rows of a dataset.
inline TanModel train(const Dataset& ds, Task task, std::span<const std::size_t> rows, const LearnOptions& opts = {})
{
    if (rows.empty()) throw Error("train: no training rows");
    const CountCube counts = tabulate_counts(ds, task, rows);
    const TanStructure structure = learn_structure(counts, opts.weight);
    return estimate_cpts(ds.schema(), task, counts, structure, opts.alpha, opts.weight);
}

inline TanModel train(const Dataset& ds, Task task, const LearnOptions& opts = {})
{
    if (ds.empty()) throw Error("train: empty dataset");
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return train(ds, task, all, opts);
}

// P(positive | x), normalized over both classes in log space.
inline double posterior(const TanModel& model, std::span<const std::uint16_t> x)
{
    const Schema& schema = model.schema();
    if (x.size() != schema.feature_count())
        throw Error("posterior: record has " + std::to_string(x.size()) + " states, model expects " +
                    std::to_string(schema.feature_count()));
    for (std::size_t f = 0; f < x.size(); ++f)
        if (x[f] >= schema.feature(f).state_count())
            throw Error("posterior: state index " + std::to_string(x[f]) + " out of range for '" +
                        schema.feature(f).name + "'");
    if (!model.valid()) throw Error("posterior: model has undefined conditional distributions (alpha = 0 with unseen configurations)");
    const double l0 = model.log_joint(0, x);
    const double l1 = model.log_joint(1, x);
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    return e1 / (e0 + e1);
}

// ---------------------------------------------------------------------------
// JSON form. Probabilities are decimal strings with 17 significant digits so
// a save/load cycle reproduces every double bit for bit.

inline nlohmann::json model_to_json(const TanModel& m)
{
    using nlohmann::json;
    json parents = json::array();
    for (const auto& p : m.structure().parent) parents.push_back(p ? json(*p) : json(nullptr));
    json tables = json::array();
    for (std::size_t f = 0; f < m.schema().feature_count(); ++f) {
        const std::size_t k = m.schema().feature(f).state_count();
        const std::size_t pk = m.parent_states(f);
        json by_class = json::array();
        for (int c = 0; c < 2; ++c) {
            json rows = json::array();
            for (std::size_t ps = 0; ps < pk; ++ps) {
                json row = json::array();
                for (std::size_t s = 0; s < k; ++s) row.push_back(format_exact(m.probability(f, c, ps, s)));
                rows.push_back(row);
            }
            by_class.push_back(m.structure().parent[f] ? rows : rows[0]);
        }
        tables.push_back({{"feature", m.schema().feature(f).name}, {"table", by_class}});
    }
    return {{"format", "tanwb-model/1"},
            {"schema_hash", m.schema().hash()},
            {"schema", m.schema().to_json()},
            {"task", to_string(m.task())},
            {"edge_weight", to_string(m.edge_weight())},
            {"alpha", format_exact(m.alpha())},
            {"structure", {{"root", m.structure().root}, {"parents", parents}}},
            {"prior", json::array({format_exact(m.prior()[0]), format_exact(m.prior()[1])})},
            {"cpts", tables}};
}

inline TanModel model_from_json(const nlohmann::json& doc)
{
    try {
        if (doc.value("format", std::string()) != "tanwb-model/1") throw Error("model: unsupported format");
        Schema schema = schema_from_json(doc.at("schema"));
        if (schema.hash() != doc.at("schema_hash").get<std::string>())
            throw Error("model: schema hash does not match the embedded schema");
        TanStructure s;
        s.root = doc.at("structure").at("root").get<std::size_t>();
        for (const auto& p : doc.at("structure").at("parents"))
            s.parent.push_back(p.is_null() ? std::nullopt : std::optional<std::size_t>(p.get<std::size_t>()));
        auto real = [](const nlohmann::json& j) { return parse_real(j.get<std::string>()); };
        std::array<double, 2> prior{real(doc.at("prior").at(0)), real(doc.at("prior").at(1))};
        const auto& cpts = doc.at("cpts");
        if (cpts.size() != schema.feature_count() || s.parent.size() != schema.feature_count())
            throw Error("model: table count does not match schema");
        std::vector<std::vector<double>> tables(schema.feature_count());
        for (std::size_t f = 0; f < schema.feature_count(); ++f) {
            const auto& t = cpts[f].at("table");
            for (int c = 0; c < 2; ++c) {
                if (s.parent[f]) {
                    for (const auto& row : t.at(c))
                        for (const auto& v : row) tables[f].push_back(real(v));
                } else {
                    for (const auto& v : t.at(c)) tables[f].push_back(real(v));
                }
            }
        }
        return TanModel(std::move(schema), parse_task(doc.at("task").get<std::string>()), std::move(s),
                        real(doc.at("alpha")), prior, std::move(tables),
                        parse_edge_weight(doc.value("edge_weight", std::string("cmi"))));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("model: malformed document: ") + e.what());
    }
}

inline TanModel load_model_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("model: parse error in '" + path + "': " + e.what());
    }
    return model_from_json(doc);
}

} // namespace tanwb
