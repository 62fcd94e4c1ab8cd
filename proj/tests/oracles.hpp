#pragma once

// Brute-force reference implementations used by the unit tests and the
// acceptance runner. Deliberately naive: no shared code paths with the
// library beyond the data types.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tanwb/model.hpp"
#include "tanwb/threshold.hpp"

namespace oracle {

using tanwb::Rng;

inline std::vector<double> random_distribution(Rng& rng, std::size_t k)
{
    std::vector<double> v(k);
    double s = 0.0;
    for (double& x : v) {
        x = 0.05 + rng.uniform();
        s += x;
    }
    for (double& x : v) x /= s;
    return v;
}

inline tanwb::Schema random_schema(Rng& rng, std::size_t features, std::size_t max_states)
{
    std::vector<tanwb::Variable> vars;
    for (std::size_t f = 0; f < features; ++f) {
        tanwb::Variable v{"V" + std::to_string(f), {}, tanwb::Role::imaging};
        const std::size_t k = 2 + rng.below(max_states - 1);
        for (std::size_t s = 0; s < k; ++s) v.states.push_back("s" + std::to_string(s));
        vars.push_back(std::move(v));
    }
    vars.push_back(tanwb::Variable{"Outcome", {"Benign", "LG", "IntG", "HG", "Invasive"}, tanwb::Role::class_label});
    return tanwb::Schema(std::move(vars), "Outcome");
}

// Random tree rooted at 0 with random CPTs.
inline tanwb::TanModel random_model(Rng& rng, std::size_t features, std::size_t max_states)
{
    tanwb::Schema schema = random_schema(rng, features, max_states);
    tanwb::TanStructure s;
    s.parent.assign(features, std::nullopt);
    for (std::size_t f = 1; f < features; ++f) s.parent[f] = static_cast<std::size_t>(rng.below(f));
    const auto pr = random_distribution(rng, 2);
    std::vector<std::vector<double>> tables(features);
    for (std::size_t f = 0; f < features; ++f) {
        const std::size_t k = schema.feature(f).state_count();
        const std::size_t pk = s.parent[f] ? schema.feature(*s.parent[f]).state_count() : 1;
        for (std::size_t r = 0; r < 2 * pk; ++r) {
            auto row = random_distribution(rng, k);
            tables[f].insert(tables[f].end(), row.begin(), row.end());
        }
    }
    return tanwb::TanModel(std::move(schema), tanwb::Task::bm, std::move(s), 0.5, {pr[0], pr[1]}, std::move(tables));
}

// P(c, x) as a plain product of table entries.
inline double joint_probability(const tanwb::TanModel& m, int c, const std::vector<std::uint16_t>& x)
{
    double p = m.prior()[c];
    for (std::size_t f = 0; f < x.size(); ++f) {
        const auto& par = m.structure().parent[f];
        p *= m.probability(f, c, par ? x[*par] : 0, x[f]);
    }
    return p;
}

inline double enumerated_posterior(const tanwb::TanModel& m, const std::vector<std::uint16_t>& x)
{
    const double p1 = joint_probability(m, 1, x);
    const double p0 = joint_probability(m, 0, x);
    return p1 / (p0 + p1);
}

// Calls fn(x) for every assignment of the feature states.
template <class Fn>
void for_each_assignment(const std::vector<std::size_t>& states, Fn&& fn)
{
    std::vector<std::uint16_t> x(states.size(), 0);
    while (true) {
        fn(x);
        std::size_t f = 0;
        for (; f < x.size(); ++f) {
            if (++x[f] < states[f]) break;
            x[f] = 0;
        }
        if (f == x.size()) return;
    }
}

// Maximum spanning-tree weight by enumerating every (n-1)-edge subset.
inline double brute_force_max_tree_weight(const std::vector<std::vector<double>>& w)
{
    const std::size_t n = w.size();
    if (n <= 1) return 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    double best = -INFINITY;
    std::vector<bool> pick(edges.size(), false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(n - 1), true);
    do {
        std::vector<std::size_t> root(n);
        std::iota(root.begin(), root.end(), 0);
        auto find = [&](std::size_t a) {
            while (root[a] != a) a = root[a];
            return a;
        };
        bool tree = true;
        double sum = 0.0;
        for (std::size_t e = 0; e < edges.size() && tree; ++e) {
            if (!pick[e]) continue;
            const std::size_t a = find(edges[e].first), b = find(edges[e].second);
            if (a == b) tree = false;
            root[a] = b;
            sum += w[edges[e].first][edges[e].second];
        }
        if (tree) best = std::max(best, sum);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

// I(A;B|C) in nats from a raw table n[c][a][b].
inline double cmi_triple_sum(const std::vector<std::vector<std::vector<double>>>& n)
{
    double total = 0.0;
    for (const auto& t : n)
        for (const auto& r : t)
            for (double v : r) total += v;
    double sum = 0.0;
    for (const auto& t : n) {
        double nc = 0.0;
        std::vector<double> na(t.size(), 0.0), nb(t[0].size(), 0.0);
        for (std::size_t a = 0; a < t.size(); ++a)
            for (std::size_t b = 0; b < t[a].size(); ++b) {
                nc += t[a][b];
                na[a] += t[a][b];
                nb[b] += t[a][b];
            }
        for (std::size_t a = 0; a < t.size(); ++a)
            for (std::size_t b = 0; b < t[a].size(); ++b)
                if (t[a][b] > 0) sum += t[a][b] / total * std::log(t[a][b] * nc / (na[a] * nb[b]));
    }
    return sum;
}

// AUC as the probability a random positive outscores a random negative,
// ties counted one half.
inline double mann_whitney(const std::vector<tanwb::ScoredCase>& scored)
{
    double wins = 0.0, pairs = 0.0;
    for (const auto& p : scored) {
        if (!p.true_class) continue;
        for (const auto& q : scored) {
            if (q.true_class) continue;
            pairs += 1.0;
            if (p.probability > q.probability) wins += 1.0;
            else if (p.probability == q.probability) wins += 0.5;
        }
    }
    return wins / pairs;
}

// Textbook OLS on an arbitrary column subset, long double normal equations
// solved by Gauss-Jordan elimination with partial pivoting.
struct OlsFit {
    std::vector<long double> coef;
    std::vector<std::vector<long double>> inverse; // (X^T X)^{-1}
    long double rss = 0;
};

inline OlsFit ols(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& powers)
{
    const std::size_t p = powers.size();
    std::vector<std::vector<long double>> a(p, std::vector<long double>(2 * p + 1, 0));
    auto term = [&](std::size_t i, std::size_t k) { return std::pow(static_cast<long double>(x[i]), powers[k]); };
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a[r][c] += term(i, r) * term(i, c);
            a[r][2 * p] += term(i, r) * y[i];
        }
    for (std::size_t r = 0; r < p; ++r) a[r][p + r] = 1;
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        const long double d = a[col][col];
        for (auto& v : a[col]) v /= d;
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const long double f = a[r][col];
            for (std::size_t c = 0; c < 2 * p + 1; ++c) a[r][c] -= f * a[col][c];
        }
    }
    OlsFit fit;
    fit.inverse.assign(p, std::vector<long double>(p));
    for (std::size_t r = 0; r < p; ++r) {
        fit.coef.push_back(a[r][2 * p]);
        for (std::size_t c = 0; c < p; ++c) fit.inverse[r][c] = a[r][p + c];
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double yhat = 0;
        for (std::size_t k = 0; k < p; ++k) yhat += fit.coef[k] * term(i, k);
        const long double e = y[i] - yhat;
        fit.rss += e * e;
    }
    return fit;
}

// Empty string when every row of a sweep satisfies the accounting identities,
// matches a direct recount, and is monotone; otherwise the first violation.
inline std::string audit_sweep(const tanwb::ThresholdReport& r, const std::vector<tanwb::ScoredCase>& scored,
                               std::size_t grid)
{
    std::size_t pos = 0, neg = 0;
    for (const auto& s : scored) (s.true_class ? pos : neg) += 1;
    if (r.rows.size() != grid) return "row count " + std::to_string(r.rows.size());
    const auto neg_sev = tanwb::negative_severities(r.task);
    const auto pos_sev = tanwb::positive_severities(r.task);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        const std::string at = "row " + std::to_string(i) + ": ";
        if (row.threshold != static_cast<double>(i) / static_cast<double>(grid - 1)) return at + "threshold off grid";
        if (row.fp + row.tn != neg) return at + "benign biopsies + avoided != negatives";
        std::size_t missed = 0, avoided = 0;
        for (auto s : pos_sev) missed += row.missed_by_severity[tanwb::rank(s)];
        for (auto s : neg_sev) avoided += row.avoided_by_severity[tanwb::rank(s)];
        if (row.tp + missed != pos) return at + "malignant biopsies + missed != positives";
        if (avoided != row.tn) return at + "avoided by severity != tn";
        for (auto s : neg_sev)
            if (row.missed_by_severity[tanwb::rank(s)]) return at + "missed count on a negative severity";
        for (auto s : pos_sev)
            if (row.avoided_by_severity[tanwb::rank(s)]) return at + "avoided count on a positive severity";
        std::size_t tp = 0, fp = 0;
        for (const auto& s : scored)
            if (s.probability >= row.threshold) (s.true_class ? tp : fp) += 1;
        if (tp != row.tp || fp != row.fp) return at + "counts differ from a direct recount";
        if (i > 0) {
            const auto& prev = r.rows[i - 1];
            if (row.tp + row.fp > prev.tp + prev.fp) return at + "biopsied count increased";
            const auto m = tanwb::metrics_from_counts(row), pm = tanwb::metrics_from_counts(prev);
            if (m.sensitivity && pm.sensitivity && *m.sensitivity > *pm.sensitivity) return at + "sensitivity increased";
            if (m.specificity && pm.specificity && *m.specificity < *pm.specificity) return at + "specificity decreased";
        }
    }
    if (r.rows.front().tp != pos || r.rows.front().fp != neg) return "t=0 row is not the baseline";
    return {};
}

} // namespace oracle
