#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "tanwb/dataset.hpp"

namespace tanwb {

// Exact sufficient statistics for TAN learning over a binary class:
// N[c], N[c, x_i] for each feature and N[c, x_i, x_j] for each pair i < j.
class CountCube {
public:
    CountCube() = default;

    explicit CountCube(std::vector<std::size_t> state_counts) : states_(std::move(state_counts))
    {
        const std::size_t nf = states_.size();
        single_offset_.resize(nf);
        std::size_t off = 0;
        for (std::size_t i = 0; i < nf; ++i) {
            single_offset_[i] = off;
            off += 2 * states_[i];
        }
        single_.assign(off, 0);
        pair_offset_.assign(nf * nf, 0);
        off = 0;
        for (std::size_t i = 0; i < nf; ++i)
            for (std::size_t j = i + 1; j < nf; ++j) {
                pair_offset_[i * nf + j] = off;
                off += 2 * states_[i] * states_[j];
            }
        pair_.assign(off, 0);
    }

    std::size_t feature_count() const { return states_.size(); }
    std::size_t states(std::size_t i) const { return states_[i]; }
    const std::vector<std::size_t>& state_counts() const { return states_; }

    std::uint64_t total() const { return class_[0] + class_[1]; }
    std::uint64_t class_count(int c) const { return class_[c]; }

    std::uint64_t single(int c, std::size_t i, std::size_t xi) const
    {
        return single_[single_offset_[i] + c * states_[i] + xi];
    }

    // Symmetric access: joint(c, i, xi, j, xj) == joint(c, j, xj, i, xi).
    std::uint64_t joint(int c, std::size_t i, std::size_t xi, std::size_t j, std::size_t xj) const
    {
        if (i > j) {
            std::swap(i, j);
            std::swap(xi, xj);
        }
        return pair_[pair_index(c, i, xi, j, xj)];
    }

    void add(int c, std::span<const std::uint16_t> x, std::uint64_t weight = 1)
    {
        const std::size_t nf = states_.size();
        class_[c] += weight;
        for (std::size_t i = 0; i < nf; ++i) {
            single_[single_offset_[i] + c * states_[i] + x[i]] += weight;
            for (std::size_t j = i + 1; j < nf; ++j) pair_[pair_index(c, i, x[i], j, x[j])] += weight;
        }
    }

    bool operator==(const CountCube&) const = default;

private:
    std::size_t pair_index(int c, std::size_t i, std::size_t xi, std::size_t j, std::size_t xj) const
    {
        return pair_offset_[i * states_.size() + j] + (c * states_[i] + xi) * states_[j] + xj;
    }

    std::vector<std::size_t> states_;
    std::array<std::uint64_t, 2> class_{};
    std::vector<std::size_t> single_offset_;
    std::vector<std::uint64_t> single_;
    std::vector<std::size_t> pair_offset_;
    std::vector<std::uint64_t> pair_;
};

inline CountCube tabulate_counts(const Dataset& ds, Task task, std::span<const std::size_t> rows)
{
    CountCube cube(ds.schema().state_counts());
    for (std::size_t r : rows) {
        const CaseRecord& rec = ds[r];
        cube.add(derive_class(rec.outcome, task), rec.states);
    }
    return cube;
}

inline CountCube tabulate_counts(const Dataset& ds, Task task)
{
    if (ds.empty()) throw Error("tabulate_counts: empty dataset");
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return tabulate_counts(ds, task, all);
}

enum class EdgeWeight { conditional_mi, mutual_information };

inline std::string_view to_string(EdgeWeight w) { return w == EdgeWeight::conditional_mi ? "cmi" : "mi"; }

inline EdgeWeight parse_edge_weight(std::string_view s)
{
    if (s == "cmi") return EdgeWeight::conditional_mi;
    if (s == "mi") return EdgeWeight::mutual_information;
    throw Error("unknown edge weight '" + std::string(s) + "' (expected cmi or mi)");
}

// I(X_i; X_j | C) in nats from raw counts:
//   sum_{c,a,b} N(c,a,b)/N * log( N(c,a,b) N(c) / (N(c,a) N(c,b)) ).
// Empty cells contribute nothing. Evaluated with i < j so the result is
// exactly symmetric; rounding below zero is clamped.
inline double conditional_mutual_information(const CountCube& counts, std::size_t i, std::size_t j)
{
    if (i == j) throw Error("conditional_mutual_information: i == j");
    if (i > j) std::swap(i, j);
    const double total = static_cast<double>(counts.total());
    if (total == 0.0) return 0.0;
    double sum = 0.0;
    for (int c = 0; c < 2; ++c) {
        const double nc = static_cast<double>(counts.class_count(c));
        if (nc == 0.0) continue;
        for (std::size_t a = 0; a < counts.states(i); ++a) {
            const double na = static_cast<double>(counts.single(c, i, a));
            if (na == 0.0) continue;
            for (std::size_t b = 0; b < counts.states(j); ++b) {
                const double nab = static_cast<double>(counts.joint(c, i, a, j, b));
                if (nab == 0.0) continue;
                const double nb = static_cast<double>(counts.single(c, j, b));
                sum += nab / total * std::log((nab * nc) / (na * nb));
            }
        }
    }
    return sum < 0.0 ? 0.0 : sum;
}

// Plain I(X_i; X_j), ignoring the class. Kept for comparison runs.
inline double mutual_information(const CountCube& counts, std::size_t i, std::size_t j)
{
    if (i == j) throw Error("mutual_information: i == j");
    if (i > j) std::swap(i, j);
    const double total = static_cast<double>(counts.total());
    if (total == 0.0) return 0.0;
    double sum = 0.0;
    for (std::size_t a = 0; a < counts.states(i); ++a) {
        const double na = static_cast<double>(counts.single(0, i, a) + counts.single(1, i, a));
        if (na == 0.0) continue;
        for (std::size_t b = 0; b < counts.states(j); ++b) {
            const double nab = static_cast<double>(counts.joint(0, i, a, j, b) + counts.joint(1, i, a, j, b));
            if (nab == 0.0) continue;
            const double nb = static_cast<double>(counts.single(0, j, b) + counts.single(1, j, b));
            sum += nab / total * std::log((nab * total) / (na * nb));
        }
    }
    return sum < 0.0 ? 0.0 : sum;
}

// Symmetric F x F weight matrix; the diagonal is zero.
inline std::vector<std::vector<double>> edge_weights(const CountCube& counts, EdgeWeight kind)
{
    const std::size_t nf = counts.feature_count();
    std::vector<std::vector<double>> w(nf, std::vector<double>(nf, 0.0));
    for (std::size_t i = 0; i < nf; ++i)
        for (std::size_t j = i + 1; j < nf; ++j) {
            const double v = kind == EdgeWeight::conditional_mi ? conditional_mutual_information(counts, i, j)
                                                                : mutual_information(counts, i, j);
            w[i][j] = w[j][i] = v;
        }
    return w;
}

} // namespace tanwb
