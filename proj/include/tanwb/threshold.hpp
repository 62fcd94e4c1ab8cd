#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <ostream>
#include <vector>

#include "tanwb/crossval.hpp"

namespace tanwb {

// Confusion counts at one biopsy threshold. A case is biopsied (predicted
// positive) iff its probability >= threshold.
struct ConfusionCounts {
    double threshold = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::array<std::size_t, 5> missed_by_severity{};  // positives not biopsied
    std::array<std::size_t, 5> avoided_by_severity{}; // negatives not biopsied

    std::size_t avoided_negatives() const { return tn; }
    std::size_t positives() const { return tp + fn; }
    std::size_t negatives() const { return fp + tn; }

    bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
    MaybeReal ppv;
    MaybeReal sensitivity;
    MaybeReal specificity;
};

inline Metrics metrics_from_counts(const ConfusionCounts& c)
{
    auto ratio = [](std::size_t num, std::size_t den) -> MaybeReal {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    return {ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp)};
}

inline ConfusionCounts confusion_at_threshold(const std::vector<ScoredCase>& scored, double t)
{
    if (!(t >= 0.0 && t <= 1.0)) throw Error("confusion_at_threshold: threshold outside [0,1]");
    ConfusionCounts c;
    c.threshold = t;
    for (const auto& s : scored) {
        const bool biopsy = s.probability >= t;
        if (s.true_class == 1) {
            if (biopsy) ++c.tp;
            else {
                ++c.fn;
                ++c.missed_by_severity[rank(s.severity)];
            }
        } else {
            if (biopsy) ++c.fp;
            else {
                ++c.tn;
                ++c.avoided_by_severity[rank(s.severity)];
            }
        }
    }
    return c;
}

// Severities that can appear on each side of a task, in table column order.
inline std::vector<Severity> negative_severities(Task task)
{
    return task == Task::bm ? std::vector<Severity>{Severity::Benign} : std::vector<Severity>{Severity::Benign, Severity::LG};
}

inline std::vector<Severity> positive_severities(Task task)
{
    if (task == Task::bm) return {Severity::LG, Severity::IntG, Severity::HG, Severity::Invasive};
    return {Severity::IntG, Severity::HG, Severity::Invasive};
}

struct ThresholdReport {
    Task task = Task::bm;
    std::string subpopulation; // empty = whole population
    std::vector<ConfusionCounts> rows;

    std::size_t grid_points() const { return rows.size(); }

    // Row with the largest grid threshold <= t.
    const ConfusionCounts& row_at_or_below(double t) const
    {
        if (rows.empty()) throw Error("threshold report has no rows");
        auto it = std::upper_bound(rows.begin(), rows.end(), t,
                                   [](double v, const ConfusionCounts& r) { return v < r.threshold; });
        if (it == rows.begin()) throw Error("threshold below the first grid point");
        return *std::prev(it);
    }
};

// i-th of `grid_points` evenly spaced thresholds on [0, 1].
inline double grid_threshold(std::size_t i, std::size_t grid_points)
{
    return static_cast<double>(i) / static_cast<double>(grid_points - 1);
}

// One confusion row per grid threshold. Cases are sorted once and a cursor
// walks the not-biopsied prefix, so each row equals confusion_at_threshold.
inline ThresholdReport threshold_sweep(const std::vector<ScoredCase>& scored, std::size_t grid_points, Task task,
                                       std::string subpopulation = {})
{
    if (grid_points < 2) throw Error("threshold_sweep: grid_points must be at least 2");
    std::vector<const ScoredCase*> order;
    order.reserve(scored.size());
    for (const auto& s : scored) order.push_back(&s);
    std::stable_sort(order.begin(), order.end(),
                     [](const ScoredCase* a, const ScoredCase* b) { return a->probability < b->probability; });

    std::size_t pos = 0, neg = 0;
    for (const auto& s : scored) (s.true_class ? pos : neg) += 1;

    ThresholdReport report;
    report.task = task;
    report.subpopulation = std::move(subpopulation);
    report.rows.reserve(grid_points);
    ConfusionCounts below; // cases strictly below the current threshold
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double t = grid_threshold(i, grid_points);
        while (cursor < order.size() && order[cursor]->probability < t) {
            const ScoredCase& s = *order[cursor++];
            if (s.true_class) {
                ++below.fn;
                ++below.missed_by_severity[rank(s.severity)];
            } else {
                ++below.tn;
                ++below.avoided_by_severity[rank(s.severity)];
            }
        }
        ConfusionCounts row = below;
        row.threshold = t;
        row.tp = pos - below.fn;
        row.fp = neg - below.tn;
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV form, laid out like a biopsy-threshold table. Metrics use 4 decimals;
// NA marks an undefined ratio.

inline csv::Row sweep_header(Task task)
{
    csv::Row h{"threshold", "threshold_pct", "negative_biopsies", "positive_biopsies"};
    for (Severity s : negative_severities(task)) h.push_back(std::string(to_string(s)) + "_avoided");
    for (Severity s : positive_severities(task)) h.push_back(std::string(to_string(s)) + "_missed");
    for (const char* m : {"ppv", "sensitivity", "specificity"}) h.push_back(m);
    return h;
}

inline void write_sweep_csv(std::ostream& out, const ThresholdReport& report)
{
    csv::write_row(out, sweep_header(report.task));
    for (const auto& r : report.rows) {
        const Metrics m = metrics_from_counts(r);
        csv::Row row{format_exact(r.threshold), format_fixed(100.0 * r.threshold, 2), std::to_string(r.fp),
                     std::to_string(r.tp)};
        for (Severity s : negative_severities(report.task)) row.push_back(std::to_string(r.avoided_by_severity[rank(s)]));
        for (Severity s : positive_severities(report.task)) row.push_back(std::to_string(r.missed_by_severity[rank(s)]));
        row.push_back(format_maybe(m.ppv, 4));
        row.push_back(format_maybe(m.sensitivity, 4));
        row.push_back(format_maybe(m.specificity, 4));
        csv::write_row(out, row);
    }
}

// Reads a sweep written by write_sweep_csv. The task is recovered from the
// header layout; metrics are recomputed from the counts on demand.
inline ThresholdReport read_sweep_csv(std::istream& in, std::vector<std::string>* comments = nullptr)
{
    csv::Reader reader(in, comments);
    csv::Row header;
    if (!reader.next(header)) throw Error("sweep: empty input");
    ThresholdReport report;
    if (header == sweep_header(Task::bm)) report.task = Task::bm;
    else if (header == sweep_header(Task::b1m1)) report.task = Task::b1m1;
    else throw Error("sweep: unrecognized header");
    const auto negs = negative_severities(report.task);
    const auto poss = positive_severities(report.task);
    csv::Row row;
    while (reader.next(row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != header.size()) throw Error("sweep line " + std::to_string(reader.line()) + ": wrong field count");
        ConfusionCounts c;
        try {
            c.threshold = parse_real(row[0]);
            c.fp = std::stoul(row[2]);
            c.tp = std::stoul(row[3]);
            std::size_t col = 4;
            for (Severity s : negs) {
                c.avoided_by_severity[rank(s)] = std::stoul(row[col++]);
                c.tn += c.avoided_by_severity[rank(s)];
            }
            for (Severity s : poss) {
                c.missed_by_severity[rank(s)] = std::stoul(row[col++]);
                c.fn += c.missed_by_severity[rank(s)];
            }
        } catch (const std::logic_error&) {
            throw Error("sweep line " + std::to_string(reader.line()) + ": malformed field");
        }
        if (!report.rows.empty() && !(c.threshold > report.rows.back().threshold))
            throw Error("sweep line " + std::to_string(reader.line()) + ": thresholds not increasing");
        report.rows.push_back(c);
    }
    if (report.rows.empty()) throw Error("sweep: no rows");
    return report;
}

inline nlohmann::json sweep_row_json(const ConfusionCounts& r, Task task)
{
    const Metrics m = metrics_from_counts(r);
    auto maybe = [](const MaybeReal& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json avoided = nlohmann::json::object(), missed = nlohmann::json::object();
    for (Severity s : negative_severities(task)) avoided[std::string(to_string(s))] = r.avoided_by_severity[rank(s)];
    for (Severity s : positive_severities(task)) missed[std::string(to_string(s))] = r.missed_by_severity[rank(s)];
    return {{"threshold", r.threshold},
            {"negative_biopsies", r.fp},
            {"positive_biopsies", r.tp},
            {"avoided", avoided},
            {"avoided_total", r.tn},
            {"missed", missed},
            {"missed_total", r.fn},
            {"ppv", maybe(m.ppv)},
            {"sensitivity", maybe(m.sensitivity)},
            {"specificity", maybe(m.specificity)}};
}

} // namespace tanwb
