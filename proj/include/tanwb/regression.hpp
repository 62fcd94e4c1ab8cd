#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tanwb/curves.hpp"
#include "tanwb/stats.hpp"
#include "tanwb/threshold.hpp"

namespace tanwb {

// Third-order polynomial least-squares fit with an ANOVA breakdown.
// Term order: intercept, x, x^2, x^3.
struct RegressionReport {
    std::string response = "y";
    std::string predictor = "x";
    std::size_t n = 0;

    std::array<double, 4> estimate{};
    std::array<MaybeReal, 4> std_error;
    std::array<MaybeReal, 4> t_value;
    std::array<MaybeReal, 4> t_p_value;

    double model_ss = 0.0, error_ss = 0.0, total_ss = 0.0;
    std::size_t model_df = 3, error_df = 0, total_df = 0;
    MaybeReal model_ms, error_ms;
    MaybeReal f_value, f_p_value;
    double r_square = 0.0;
    MaybeReal coeff_var;
    double root_mse = 0.0;
    double mean_of_response = 0.0;

    // Sequential (Type I) and partial (Type III) sums of squares for the
    // x, x^2, x^3 terms, each with its F test against the error mean square.
    std::array<double, 3> type1_ss{};
    std::array<MaybeReal, 3> type1_f, type1_p;
    std::array<double, 3> type3_ss{};
    std::array<MaybeReal, 3> type3_f, type3_p;

    std::string term_name(std::size_t k) const
    {
        switch (k) {
        case 0: return "Intercept";
        case 1: return predictor;
        case 2: return predictor + "*" + predictor;
        default: return predictor + "*" + predictor + "*" + predictor;
        }
    }
};

namespace detail {

// Householder QR of an n x p design (column-major). Leaves R in the upper
// triangle and Q^T y in `effects`.
struct QrFit {
    std::size_t p = 0;
    std::vector<std::vector<double>> r; // p x p, upper triangular
    std::vector<double> effects;        // Q^T y, length n
    std::array<double, 4> coef{};
};

inline QrFit householder_fit(std::vector<std::vector<double>> cols, std::vector<double> y)
{
    const std::size_t p = cols.size();
    const std::size_t n = y.size();
    QrFit fit;
    fit.p = p;
    std::vector<double> col_norm(p);
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (double v : cols[j]) s += v * v;
        col_norm[j] = std::sqrt(s);
    }
    for (std::size_t k = 0; k < p; ++k) {
        auto& a = cols[k];
        double norm = 0.0;
        for (std::size_t i = k; i < n; ++i) norm += a[i] * a[i];
        norm = std::sqrt(norm);
        if (norm <= 1e-10 * col_norm[k]) throw Error("fit_cubic: design matrix is rank deficient (collinear terms)");
        const double alpha = a[k] > 0.0 ? -norm : norm;
        std::vector<double> v(a.begin() + k, a.end());
        v[0] -= alpha;
        double vnorm2 = 0.0;
        for (double e : v) vnorm2 += e * e;
        auto reflect = [&](std::vector<double>& target) {
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i) dot += v[i - k] * target[i];
            const double scale = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < n; ++i) target[i] -= scale * v[i - k];
        };
        if (vnorm2 > 0.0) {
            for (std::size_t j = k; j < p; ++j) reflect(cols[j]);
            reflect(y);
        }
    }
    fit.r.assign(p, std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) fit.r[i][j] = cols[j][i];
    fit.effects = std::move(y);
    for (std::size_t i = p; i-- > 0;) {
        double s = fit.effects[i];
        for (std::size_t j = i + 1; j < p; ++j) s -= fit.r[i][j] * fit.coef[j];
        fit.coef[i] = s / fit.r[i][i];
    }
    return fit;
}

inline std::vector<double> power_column(std::span<const double> x, int power)
{
    std::vector<double> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = 1.0;
        for (int k = 0; k < power; ++k) v *= x[i];
        c[i] = v;
    }
    return c;
}

} // namespace detail

inline RegressionReport fit_cubic(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw Error("fit_cubic: x and y differ in length");
    const std::size_t n = x.size();
    if (n < 5) throw Error("fit_cubic: need at least 5 points, got " + std::to_string(n));
    bool x_constant = true;
    for (double v : x) x_constant = x_constant && v == x[0];
    if (x_constant) throw Error("fit_cubic: x values are all identical");

    RegressionReport rep;
    rep.n = n;
    rep.error_df = n - 4;
    rep.total_df = n - 1;

    std::vector<std::vector<double>> cols;
    for (int k = 0; k < 4; ++k) cols.push_back(detail::power_column(x, k));
    const std::vector<double> yv(y.begin(), y.end());
    const detail::QrFit full = detail::householder_fit(cols, yv);

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    rep.mean_of_response = mean;

    bool y_constant = true;
    for (double v : y) y_constant = y_constant && v == y[0];
    if (y_constant) {
        // Degenerate response: exact constant fit, every sum of squares is 0
        // and the test statistics are undefined.
        rep.estimate = {y[0], 0.0, 0.0, 0.0};
        for (int k = 0; k < 4; ++k) rep.std_error[k] = 0.0;
        rep.error_ms = 0.0;
        rep.model_ms = 0.0;
        if (mean != 0.0) rep.coeff_var = 0.0;
        return rep;
    }

    rep.estimate = full.coef;
    for (double v : y) rep.total_ss += (v - mean) * (v - mean);
    for (std::size_t i = 4; i < n; ++i) rep.error_ss += full.effects[i] * full.effects[i];
    for (int k = 0; k < 3; ++k) rep.type1_ss[k] = full.effects[k + 1] * full.effects[k + 1];
    rep.model_ss = rep.type1_ss[0] + rep.type1_ss[1] + rep.type1_ss[2];

    // Partial SS of term k: refit with k moved to the last column and take its
    // squared effect. For the final term this is the natural order, so its
    // Type III value is the same computation as its Type I value.
    for (int k = 0; k < 3; ++k) {
        std::vector<std::vector<double>> reordered;
        for (int j = 0; j < 4; ++j)
            if (j != k + 1) reordered.push_back(cols[j]);
        reordered.push_back(cols[k + 1]);
        const detail::QrFit partial = detail::householder_fit(std::move(reordered), yv);
        rep.type3_ss[k] = partial.effects[3] * partial.effects[3];
    }

    const double mse = rep.error_ss / static_cast<double>(rep.error_df);
    rep.error_ms = mse;
    rep.model_ms = rep.model_ss / 3.0;
    rep.root_mse = std::sqrt(mse);
    rep.r_square = rep.model_ss / rep.total_ss;
    if (mean != 0.0) rep.coeff_var = 100.0 * rep.root_mse / mean;

    // (X^T X)^{-1} diagonal from R^{-1}.
    std::array<std::array<double, 4>, 4> rinv{};
    for (int j = 0; j < 4; ++j) {
        rinv[j][j] = 1.0 / full.r[j][j];
        for (int i = j - 1; i >= 0; --i) {
            double s = 0.0;
            for (int m = i + 1; m <= j; ++m) s += full.r[i][m] * rinv[m][j];
            rinv[i][j] = -s / full.r[i][i];
        }
    }
    const double df = static_cast<double>(rep.error_df);
    for (int k = 0; k < 4; ++k) {
        double diag = 0.0;
        for (int j = k; j < 4; ++j) diag += rinv[k][j] * rinv[k][j];
        const double se = std::sqrt(mse * diag);
        rep.std_error[k] = se;
        if (se > 0.0) {
            rep.t_value[k] = rep.estimate[k] / se;
            rep.t_p_value[k] = stats::t_two_sided(*rep.t_value[k], df);
        }
    }
    if (mse > 0.0) {
        rep.f_value = *rep.model_ms / mse;
        rep.f_p_value = stats::f_upper_tail(*rep.f_value, 3.0, df);
        for (int k = 0; k < 3; ++k) {
            rep.type1_f[k] = rep.type1_ss[k] / mse;
            rep.type1_p[k] = stats::f_upper_tail(*rep.type1_f[k], 1.0, df);
            rep.type3_f[k] = rep.type3_ss[k] / mse;
            rep.type3_p[k] = stats::f_upper_tail(*rep.type3_f[k], 1.0, df);
        }
    }
    return rep;
}

// Horner evaluation of b0 + b1 x + b2 x^2 + b3 x^3.
inline double predict_poly(const std::array<double, 4>& b, double x)
{
    return ((b[3] * x + b[2]) * x + b[1]) * x + b[0];
}

enum class Relationship { precision_on_recall, fpr_on_precision };

inline std::string_view to_string(Relationship r)
{
    return r == Relationship::precision_on_recall ? "precision_on_recall" : "fpr_on_precision";
}

inline Relationship parse_relationship(std::string_view s)
{
    if (s == "precision_on_recall") return Relationship::precision_on_recall;
    if (s == "fpr_on_precision") return Relationship::fpr_on_precision;
    throw Error("unknown relationship '" + std::string(s) + "'");
}

// (x, y) pairs of a relationship over the sweep rows. Rows where a needed
// ratio is undefined (no biopsies) are skipped.
inline std::vector<CurvePoint> relationship_points(const ThresholdReport& sweep, Relationship rel)
{
    std::vector<CurvePoint> out;
    for (const auto& row : sweep.rows) {
        const Metrics m = metrics_from_counts(row);
        if (rel == Relationship::precision_on_recall) {
            if (m.ppv && m.sensitivity) out.push_back({*m.sensitivity, *m.ppv, row.threshold});
        } else {
            if (m.ppv && m.specificity) out.push_back({*m.ppv, 1.0 - *m.specificity, row.threshold});
        }
    }
    return out;
}

inline RegressionReport fit_curve_relationship(const std::vector<CurvePoint>& points, Relationship rel)
{
    if (points.empty()) throw Error("fit_curve_relationship: empty curve");
    std::vector<double> x, y;
    x.reserve(points.size());
    y.reserve(points.size());
    for (const auto& p : points) {
        x.push_back(p.x);
        y.push_back(p.y);
    }
    RegressionReport rep = fit_cubic(x, y);
    rep.response = rel == Relationship::precision_on_recall ? "Precision" : "FPR";
    rep.predictor = rel == Relationship::precision_on_recall ? "Recall" : "Precision";
    return rep;
}

inline RegressionReport fit_curve_relationship(const ThresholdReport& sweep, Relationship rel)
{
    return fit_curve_relationship(relationship_points(sweep, rel), rel);
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string pvalue_text(const MaybeReal& p)
{
    if (!p) return "NA";
    if (*p < 1e-4) return "<.0001";
    return format_fixed(*p, 4);
}

inline std::string num(double v, int width, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%*.*f", width, decimals, v);
    return buf;
}

inline std::string maybe_num(const MaybeReal& v, int width, int decimals)
{
    if (!v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%*s", width, "NA");
        return buf;
    }
    // Large statistics switch to 6 significant digits.
    if (std::fabs(*v) >= 1e7) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%*.4E", width, *v);
        return buf;
    }
    return num(*v, width, decimals);
}

inline std::string pad(const std::string& s, int width)
{
    std::string out = s;
    if (static_cast<int>(out.size()) < width) out.append(width - out.size(), ' ');
    return out;
}

} // namespace detail

// Fixed-width block: ANOVA table, fit statistics, Type I SS, Type III SS,
// parameter estimates.
inline void render_regression_text(std::ostream& out, const RegressionReport& r)
{
    using detail::maybe_num;
    using detail::num;
    using detail::pad;
    using detail::pvalue_text;
    out << "Dependent Variable: " << r.response << "\n\n";
    out << pad("Source", 34) << pad("DF", 6) << pad("Sum of Squares", 18) << pad("Mean Square", 18)
        << pad("F Value", 14) << "Pr > F\n";
    out << pad("Model", 34) << pad(std::to_string(r.model_df), 6) << num(r.model_ss, 16, 7) << "  "
        << maybe_num(r.model_ms, 16, 7) << "  " << maybe_num(r.f_value, 12, 2) << "  " << pvalue_text(r.f_p_value)
        << '\n';
    out << pad("Error", 34) << pad(std::to_string(r.error_df), 6) << num(r.error_ss, 16, 7) << "  "
        << maybe_num(r.error_ms, 16, 7) << '\n';
    out << pad("Corrected Total", 34) << pad(std::to_string(r.total_df), 6) << num(r.total_ss, 16, 7) << "\n\n";

    out << pad("R-Square", 14) << pad("Coeff Var", 14) << pad("Root MSE", 14) << r.response << " Mean\n";
    out << pad(format_fixed(r.r_square, 6), 14) << pad(r.coeff_var ? format_fixed(*r.coeff_var, 6) : "NA", 14)
        << pad(format_fixed(r.root_mse, 6), 14) << format_fixed(r.mean_of_response, 6) << "\n\n";

    auto ss_table = [&](const char* title, const std::array<double, 3>& ss, const std::array<MaybeReal, 3>& f,
                        const std::array<MaybeReal, 3>& p) {
        out << pad("Source", 34) << pad("DF", 6) << pad(title, 18) << pad("Mean Square", 18) << pad("F Value", 14)
            << "Pr > F\n";
        for (int k = 0; k < 3; ++k)
            out << pad(r.term_name(k + 1), 34) << pad("1", 6) << num(ss[k], 16, 8) << "  " << num(ss[k], 16, 8)
                << "  " << maybe_num(f[k], 12, 2) << "  " << pvalue_text(p[k]) << '\n';
        out << '\n';
    };
    ss_table("Type I SS", r.type1_ss, r.type1_f, r.type1_p);
    ss_table("Type III SS", r.type3_ss, r.type3_f, r.type3_p);

    out << pad("Parameter", 34) << pad("Estimate", 18) << pad("Standard Error", 18) << pad("t Value", 12)
        << "Pr > |t|\n";
    for (int k = 0; k < 4; ++k)
        out << pad(r.term_name(k), 34) << num(r.estimate[k], 16, 9) << "  " << maybe_num(r.std_error[k], 16, 8)
            << "  " << maybe_num(r.t_value[k], 10, 2) << "  " << pvalue_text(r.t_p_value[k]) << '\n';
}

inline nlohmann::json regression_to_json(const RegressionReport& r)
{
    auto maybe = [](const MaybeReal& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json params = nlohmann::json::array();
    for (int k = 0; k < 4; ++k)
        params.push_back({{"term", r.term_name(k)},
                          {"estimate", r.estimate[k]},
                          {"std_error", maybe(r.std_error[k])},
                          {"t_value", maybe(r.t_value[k])},
                          {"p_value", maybe(r.t_p_value[k])}});
    auto ss = [&](const std::array<double, 3>& v, const std::array<MaybeReal, 3>& f, const std::array<MaybeReal, 3>& p) {
        nlohmann::json rows = nlohmann::json::array();
        for (int k = 0; k < 3; ++k)
            rows.push_back({{"term", r.term_name(k + 1)}, {"df", 1}, {"ss", v[k]}, {"f_value", maybe(f[k])}, {"p_value", maybe(p[k])}});
        return rows;
    };
    return {{"dependent_variable", r.response},
            {"predictor", r.predictor},
            {"n", r.n},
            {"anova",
             {{"model", {{"df", r.model_df}, {"ss", r.model_ss}, {"ms", maybe(r.model_ms)}, {"f_value", maybe(r.f_value)}, {"p_value", maybe(r.f_p_value)}}},
              {"error", {{"df", r.error_df}, {"ss", r.error_ss}, {"ms", maybe(r.error_ms)}}},
              {"corrected_total", {{"df", r.total_df}, {"ss", r.total_ss}}}}},
            {"fit",
             {{"r_square", r.r_square},
              {"coeff_var", maybe(r.coeff_var)},
              {"root_mse", r.root_mse},
              {"mean", r.mean_of_response}}},
            {"type1", ss(r.type1_ss, r.type1_f, r.type1_p)},
            {"type3", ss(r.type3_ss, r.type3_f, r.type3_p)},
            {"parameters", params}};
}

} // namespace tanwb
