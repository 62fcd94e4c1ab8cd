#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "tanwb/common.hpp"

namespace tanwb {

enum class Role { demographic, imaging, class_label };

inline std::string_view to_string(Role r)
{
    switch (r) {
    case Role::demographic: return "demographic";
    case Role::imaging: return "imaging";
    case Role::class_label: return "class";
    }
    return "?";
}

inline Role parse_role(std::string_view s)
{
    if (s == "demographic") return Role::demographic;
    if (s == "imaging") return Role::imaging;
    if (s == "class") return Role::class_label;
    throw Error("unknown variable role '" + std::string(s) + "'");
}

// Biopsy outcome, ordered from least to most malignant.
enum class Severity : int { Benign = 0, LG = 1, IntG = 2, HG = 3, Invasive = 4 };

inline constexpr std::array<Severity, 5> kAllSeverities = {
    Severity::Benign, Severity::LG, Severity::IntG, Severity::HG, Severity::Invasive};

inline std::string_view to_string(Severity s)
{
    switch (s) {
    case Severity::Benign: return "Benign";
    case Severity::LG: return "LG";
    case Severity::IntG: return "IntG";
    case Severity::HG: return "HG";
    case Severity::Invasive: return "Invasive";
    }
    return "?";
}

inline std::optional<Severity> parse_severity(std::string_view s)
{
    for (Severity v : kAllSeverities)
        if (to_string(v) == s) return v;
    return std::nullopt;
}

inline int rank(Severity s) { return static_cast<int>(s); }

// Binary classification task over the five severities.
//  bm:   Benign vs. LG/IntG/HG/Invasive
//  b1m1: Benign/LG vs. IntG/HG/Invasive
enum class Task { bm, b1m1 };

inline std::string_view to_string(Task t) { return t == Task::bm ? "bm" : "b1m1"; }

inline Task parse_task(std::string_view s)
{
    if (s == "bm" || s == "BM") return Task::bm;
    if (s == "b1m1" || s == "B1M1") return Task::b1m1;
    throw Error("unknown task '" + std::string(s) + "' (expected bm or b1m1)");
}

// 0 = negative, 1 = positive.
inline int derive_class(Severity outcome, Task task)
{
    const int cut = task == Task::bm ? rank(Severity::LG) : rank(Severity::IntG);
    return rank(outcome) >= cut ? 1 : 0;
}

struct Variable {
    std::string name;
    std::vector<std::string> states;
    Role role = Role::imaging;

    std::size_t state_count() const { return states.size(); }

    std::optional<std::size_t> state_index(std::string_view label) const
    {
        for (std::size_t i = 0; i < states.size(); ++i)
            if (states[i] == label) return i;
        return std::nullopt;
    }

    std::optional<std::size_t> missing_state() const { return state_index("missing"); }
};

// Ordered variable list with exactly one class variable. Feature indices
// used throughout the library count only non-class variables, in file order.
class Schema {
public:
    Schema() = default;

    Schema(std::vector<Variable> variables, std::string class_variable)
        : variables_(std::move(variables)), class_name_(std::move(class_variable))
    {
        validate_and_index();
    }

    const std::vector<Variable>& variables() const { return variables_; }
    const std::string& class_variable_name() const { return class_name_; }
    const Variable& class_variable() const { return variables_[class_index_]; }

    std::size_t feature_count() const { return features_.size(); }
    const Variable& feature(std::size_t f) const { return variables_[features_[f]]; }

    std::optional<std::size_t> feature_index(std::string_view name) const
    {
        for (std::size_t f = 0; f < features_.size(); ++f)
            if (variables_[features_[f]].name == name) return f;
        return std::nullopt;
    }

    std::vector<std::size_t> state_counts() const
    {
        std::vector<std::size_t> out;
        out.reserve(features_.size());
        for (std::size_t v : features_) out.push_back(variables_[v].state_count());
        return out;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json vars = nlohmann::json::array();
        for (const auto& v : variables_)
            vars.push_back({{"name", v.name}, {"states", v.states}, {"role", to_string(v.role)}});
        return {{"variables", vars}, {"class_variable", class_name_}};
    }

    // Fingerprint of the canonical JSON form.
    std::string hash() const { return hex64(fnv1a(to_json().dump())); }

    bool operator==(const Schema& o) const
    {
        if (class_name_ != o.class_name_ || variables_.size() != o.variables_.size()) return false;
        for (std::size_t i = 0; i < variables_.size(); ++i) {
            const auto& a = variables_[i];
            const auto& b = o.variables_[i];
            if (a.name != b.name || a.states != b.states || a.role != b.role) return false;
        }
        return true;
    }

private:
    void validate_and_index()
    {
        std::unordered_set<std::string> names;
        std::optional<std::size_t> cls;
        for (std::size_t i = 0; i < variables_.size(); ++i) {
            const auto& v = variables_[i];
            if (v.name.empty()) throw Error("schema: variable with empty name");
            if (!names.insert(v.name).second) throw Error("schema: duplicate variable name '" + v.name + "'");
            if (v.states.size() < 2)
                throw Error("schema: variable '" + v.name + "' declares fewer than 2 states");
            std::unordered_set<std::string> seen;
            for (const auto& s : v.states)
                if (!seen.insert(s).second)
                    throw Error("schema: variable '" + v.name + "' repeats state '" + s + "'");
            if (v.role == Role::class_label) {
                if (cls) throw Error("schema: more than one variable has role class");
                cls = i;
            } else {
                features_.push_back(i);
            }
        }
        if (!cls) throw Error("schema: missing class variable");
        if (variables_[*cls].name != class_name_)
            throw Error("schema: class_variable '" + class_name_ + "' does not name the class-role variable '" +
                        variables_[*cls].name + "'");
        class_index_ = *cls;
    }

    std::vector<Variable> variables_;
    std::string class_name_;
    std::size_t class_index_ = 0;
    std::vector<std::size_t> features_;
};

inline Schema schema_from_json(const nlohmann::json& doc)
{
    try {
        std::vector<Variable> vars;
        for (const auto& jv : doc.at("variables")) {
            Variable v;
            v.name = jv.at("name").get<std::string>();
            v.states = jv.at("states").get<std::vector<std::string>>();
            v.role = parse_role(jv.value("role", std::string("imaging")));
            vars.push_back(std::move(v));
        }
        if (!doc.contains("class_variable")) throw Error("schema: missing class variable");
        return Schema(std::move(vars), doc.at("class_variable").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("schema: malformed document: ") + e.what());
    }
}

inline Schema load_schema(std::istream& in)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("schema: parse error: ") + e.what());
    }
    return schema_from_json(doc);
}

inline Schema load_schema_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema file '" + path + "'");
    return load_schema(in);
}

} // namespace tanwb
