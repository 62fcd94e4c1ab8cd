#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "tanwb/dataset.hpp"

namespace tanwb {

struct DatasetSummary {
    std::size_t instances = 0;
    std::size_t variable_count = 0; // features + class
    std::vector<std::string> feature_names;
    std::vector<std::vector<std::string>> state_labels;
    std::vector<std::vector<std::size_t>> state_counts; // [feature][state]
    std::array<std::size_t, 5> severity_counts{};
    // Per age-group state: outcome counts by severity. Empty without an
    // "Age Group" variable.
    std::vector<std::string> age_groups;
    std::vector<std::array<std::size_t, 5>> severity_by_age;

    bool operator==(const DatasetSummary&) const = default;

    nlohmann::json to_json() const
    {
        nlohmann::json vars = nlohmann::json::array();
        for (std::size_t f = 0; f < feature_names.size(); ++f) {
            nlohmann::json states = nlohmann::json::array();
            for (std::size_t s = 0; s < state_labels[f].size(); ++s)
                states.push_back({{"state", state_labels[f][s]}, {"count", state_counts[f][s]}});
            vars.push_back({{"name", feature_names[f]}, {"states", states}});
        }
        nlohmann::json sev = nlohmann::json::object();
        for (Severity s : kAllSeverities) sev[std::string(to_string(s))] = severity_counts[rank(s)];
        nlohmann::json ages = nlohmann::json::array();
        for (std::size_t a = 0; a < age_groups.size(); ++a) {
            nlohmann::json row = {{"age_group", age_groups[a]}};
            for (Severity s : kAllSeverities) row[std::string(to_string(s))] = severity_by_age[a][rank(s)];
            ages.push_back(row);
        }
        return {{"instances", instances},
                {"variables", variable_count},
                {"features", vars},
                {"outcomes", sev},
                {"outcomes_by_age_group", ages}};
    }
};

inline DatasetSummary summarize(const Dataset& ds)
{
    const Schema& schema = ds.schema();
    DatasetSummary out;
    out.instances = ds.size();
    out.variable_count = schema.variables().size();
    const std::size_t nf = schema.feature_count();
    for (std::size_t f = 0; f < nf; ++f) {
        out.feature_names.push_back(schema.feature(f).name);
        out.state_labels.push_back(schema.feature(f).states);
        out.state_counts.emplace_back(schema.feature(f).state_count(), 0);
    }
    const auto age = ds.age_group_feature();
    if (age) {
        out.age_groups = schema.feature(*age).states;
        out.severity_by_age.assign(out.age_groups.size(), {});
    }
    for (const auto& rec : ds.cases()) {
        for (std::size_t f = 0; f < nf; ++f) ++out.state_counts[f][rec.states[f]];
        ++out.severity_counts[rank(rec.outcome)];
        if (age) ++out.severity_by_age[rec.states[*age]][rank(rec.outcome)];
    }
    return out;
}

// Text rendering in the layout of a variable summary table: one line per
// variable with "state count" pairs, then the outcome breakdown.
inline void render_summary(std::ostream& out, const DatasetSummary& s)
{
    out << "Variables\tInstances\n" << s.variable_count << '\t' << s.instances << '\n';
    for (std::size_t f = 0; f < s.feature_names.size(); ++f) {
        out << s.feature_names[f];
        for (std::size_t st = 0; st < s.state_labels[f].size(); ++st)
            out << '\t' << s.state_labels[f][st] << ' ' << s.state_counts[f][st];
        out << '\n';
    }
    out << "\nOutcome";
    for (Severity sev : kAllSeverities) out << '\t' << to_string(sev);
    out << "\nAll";
    for (Severity sev : kAllSeverities) out << '\t' << s.severity_counts[rank(sev)];
    out << '\n';
    for (std::size_t a = 0; a < s.age_groups.size(); ++a) {
        out << s.age_groups[a];
        for (Severity sev : kAllSeverities) out << '\t' << s.severity_by_age[a][rank(sev)];
        out << '\n';
    }
}

} // namespace tanwb
