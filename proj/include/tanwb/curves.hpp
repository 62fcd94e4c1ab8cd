#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>
#include <vector>

#include "tanwb/crossval.hpp"

namespace tanwb {

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
    double threshold = 0.0;

    bool operator==(const CurvePoint&) const = default;
};

enum class CurveKind { roc, pr };

inline std::string_view to_string(CurveKind k) { return k == CurveKind::roc ? "roc" : "pr"; }

namespace detail {

// Cumulative (tp, fp) after each group of tied scores, highest score first.
struct Cut {
    double threshold;
    std::size_t tp;
    std::size_t fp;
};

inline std::vector<Cut> cuts(const std::vector<ScoredCase>& scored, std::size_t& pos, std::size_t& neg)
{
    std::vector<std::pair<double, int>> v;
    v.reserve(scored.size());
    pos = neg = 0;
    for (const auto& s : scored) {
        v.emplace_back(s.probability, s.true_class);
        (s.true_class ? pos : neg) += 1;
    }
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<Cut> out;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < v.size();) {
        const double t = v[i].first;
        for (; i < v.size() && v[i].first == t; ++i) (v[i].second ? tp : fp) += 1;
        out.push_back({t, tp, fp});
    }
    return out;
}

} // namespace detail

// ROC points (x = false positive rate, y = sensitivity): the (0,0) origin
// followed by one point per distinct score, descending. The last point is
// (1,1).
inline std::vector<CurvePoint> roc_curve(const std::vector<ScoredCase>& scored)
{
    std::size_t pos, neg;
    const auto cuts = detail::cuts(scored, pos, neg);
    if (pos == 0 || neg == 0) throw Error("roc_curve: needs at least one positive and one negative case");
    std::vector<CurvePoint> out;
    out.reserve(cuts.size() + 1);
    out.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    for (const auto& c : cuts)
        out.push_back({static_cast<double>(c.fp) / static_cast<double>(neg),
                       static_cast<double>(c.tp) / static_cast<double>(pos), c.threshold});
    return out;
}

// PR points (x = recall, y = precision), one per distinct score, descending.
// The last point has recall 1 and precision equal to the prevalence.
inline std::vector<CurvePoint> pr_curve(const std::vector<ScoredCase>& scored)
{
    std::size_t pos, neg;
    const auto cuts = detail::cuts(scored, pos, neg);
    if (pos == 0) throw Error("pr_curve: needs at least one positive case");
    std::vector<CurvePoint> out;
    out.reserve(cuts.size());
    for (const auto& c : cuts)
        out.push_back({static_cast<double>(c.tp) / static_cast<double>(pos),
                       static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp), c.threshold});
    return out;
}

// Trapezoidal area, accumulated left to right. For PR curves this is
// linear interpolation between achieved points, which is optimistic.
inline double area_under_curve(const std::vector<CurvePoint>& points, CurveKind = CurveKind::roc)
{
    if (points.size() < 2) throw Error("area_under_curve: needs at least 2 points");
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double dx = points[i].x - points[i - 1].x;
        if (dx < 0.0) throw Error("area_under_curve: x values are not sorted");
        area += dx * (points[i].y + points[i - 1].y) / 2.0;
    }
    return area;
}

inline std::vector<CurvePoint> curve(const std::vector<ScoredCase>& scored, CurveKind kind)
{
    return kind == CurveKind::roc ? roc_curve(scored) : pr_curve(scored);
}

enum class PoolingMode { pooled, per_fold };

inline std::string_view to_string(PoolingMode m) { return m == PoolingMode::pooled ? "pooled" : "per_fold"; }

inline PoolingMode parse_pooling_mode(std::string_view s)
{
    if (s == "pooled") return PoolingMode::pooled;
    if (s == "per_fold") return PoolingMode::per_fold;
    throw Error("unknown mode '" + std::string(s) + "' (expected pooled or per_fold)");
}

struct CurveSummary {
    CurveKind kind = CurveKind::roc;
    PoolingMode mode = PoolingMode::pooled;
    double area = 0.0; // pooled area, or mean of per-fold areas
    std::size_t n_pos = 0, n_neg = 0;
    std::vector<std::size_t> folds;
    std::vector<double> fold_areas; // per_fold mode only
    double min_area = 0.0, max_area = 0.0;

    nlohmann::json to_json() const
    {
        nlohmann::json j = {{"kind", to_string(kind)},
                            {"area", area},
                            {"n_pos", n_pos},
                            {"n_neg", n_neg},
                            {"mode", to_string(mode)},
                            {"method", kind == CurveKind::roc ? "trapezoid" : "trapezoid over achieved points (linear interpolation)"}};
        if (mode == PoolingMode::per_fold) {
            nlohmann::json per = nlohmann::json::array();
            for (std::size_t i = 0; i < folds.size(); ++i) per.push_back({{"fold", folds[i]}, {"area", fold_areas[i]}});
            j["per_fold"] = per;
            j["min_area"] = min_area;
            j["max_area"] = max_area;
        }
        return j;
    }
};

struct CurveResult {
    CurveSummary summary;
    // Pooled: one curve under key 0. Per-fold: one curve per fold index.
    std::map<std::size_t, std::vector<CurvePoint>> curves;
};

inline CurveResult build_curves(const std::vector<ScoredCase>& scored, CurveKind kind, PoolingMode mode)
{
    CurveResult r;
    r.summary.kind = kind;
    r.summary.mode = mode;
    for (const auto& s : scored) (s.true_class ? r.summary.n_pos : r.summary.n_neg) += 1;
    if (mode == PoolingMode::pooled) {
        r.curves[0] = curve(scored, kind);
        r.summary.area = area_under_curve(r.curves[0], kind);
        return r;
    }
    std::map<std::size_t, std::vector<ScoredCase>> by_fold;
    for (const auto& s : scored) by_fold[s.fold].push_back(s);
    double sum = 0.0;
    for (auto& [fold, cases] : by_fold) {
        r.curves[fold] = curve(cases, kind);
        const double a = area_under_curve(r.curves[fold], kind);
        r.summary.folds.push_back(fold);
        r.summary.fold_areas.push_back(a);
        sum += a;
    }
    r.summary.area = sum / static_cast<double>(r.summary.fold_areas.size());
    r.summary.min_area = *std::min_element(r.summary.fold_areas.begin(), r.summary.fold_areas.end());
    r.summary.max_area = *std::max_element(r.summary.fold_areas.begin(), r.summary.fold_areas.end());
    return r;
}

inline void write_curve_csv(std::ostream& out, const CurveResult& r)
{
    const bool per_fold = r.summary.mode == PoolingMode::per_fold;
    csv::Row header;
    if (per_fold) header.push_back("fold");
    for (const char* h : {"threshold", "x", "y"}) header.push_back(h);
    csv::write_row(out, header);
    for (const auto& [fold, points] : r.curves)
        for (const auto& p : points) {
            csv::Row row;
            if (per_fold) row.push_back(std::to_string(fold));
            row.push_back(format_exact(p.threshold));
            row.push_back(format_exact(p.x));
            row.push_back(format_exact(p.y));
            csv::write_row(out, row);
        }
}

} // namespace tanwb
