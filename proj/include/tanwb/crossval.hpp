#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "tanwb/folds.hpp"
#include "tanwb/model.hpp"

namespace tanwb {

struct ScoredCase {
    std::size_t case_index = 0;
    std::string patient_id;
    std::size_t fold = 0;
    double probability = 0.0; // predicted P(positive)
    int true_class = 0;
    Severity severity = Severity::Benign;
    std::string age_group; // empty when the schema has no age-group variable

    bool operator==(const ScoredCase&) const = default;
};

// Worker count: TANWB_THREADS when set to a positive integer, otherwise the
// hardware concurrency.
inline std::size_t thread_budget()
{
    if (const char* env = std::getenv("TANWB_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(0..n-1) on up to `threads` workers. The first exception thrown by
// any task is rethrown after all workers have stopped.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

struct CrossValidationOptions {
    LearnOptions learn;
    std::size_t threads = 0; // 0 = thread_budget()
};

// k-fold cross-validation: fold f is scored by a model trained on every
// other fold. Output is in dataset order and covers each case once. Folds
// are independent, so the result does not depend on the thread count.
inline std::vector<ScoredCase> run_cross_validation(const Dataset& ds, const FoldPlan& plan, Task task,
                                                    const CrossValidationOptions& opts = {})
{
    if (plan.assignment.size() != ds.size())
        throw Error("run_cross_validation: fold plan covers " + std::to_string(plan.assignment.size()) +
                    " cases, dataset has " + std::to_string(ds.size()));
    const auto age = ds.age_group_feature();
    std::vector<ScoredCase> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& rec = ds[i];
        if (plan.assignment[i] >= plan.k) throw Error("run_cross_validation: fold index out of range");
        out[i].case_index = i;
        out[i].patient_id = rec.patient_id;
        out[i].fold = plan.assignment[i];
        out[i].true_class = derive_class(rec.outcome, task);
        out[i].severity = rec.outcome;
        if (age) out[i].age_group = ds.schema().feature(*age).states[rec.states[*age]];
    }

    const std::size_t threads = opts.threads ? opts.threads : thread_budget();
    parallel_for(plan.k, threads, [&](std::size_t fold) {
        const auto train_rows = plan.train_indices(fold);
        std::array<std::size_t, 2> per_class{};
        for (std::size_t r : train_rows) ++per_class[out[r].true_class];
        if (per_class[0] == 0 || per_class[1] == 0)
            throw Error("run_cross_validation: training set for fold " + std::to_string(fold) +
                        " is missing the " + (per_class[0] == 0 ? "negative" : "positive") + " class");
        const TanModel model = train(ds, task, train_rows, opts.learn);
        for (std::size_t r : plan.test_indices(fold)) out[r].probability = posterior(model, ds[r].states);
    });
    return out;
}

inline std::vector<ScoredCase> filter_subpopulation(const std::vector<ScoredCase>& scored, std::string_view age_group)
{
    std::vector<ScoredCase> out;
    for (const auto& s : scored)
        if (s.age_group == age_group) out.push_back(s);
    return out;
}

// ---------------------------------------------------------------------------
// Scores file: one row per case, probabilities at 17 significant digits.

inline void write_scores_csv(std::ostream& out, const std::vector<ScoredCase>& scored)
{
    csv::write_row(out, {"case_index", "patient_id", "fold", "probability", "true_class", "severity", "age_group"});
    for (const auto& s : scored)
        csv::write_row(out, {std::to_string(s.case_index), s.patient_id, std::to_string(s.fold),
                             format_exact(s.probability), std::to_string(s.true_class),
                             std::string(to_string(s.severity)), s.age_group});
}

inline std::vector<ScoredCase> read_scores_csv(std::istream& in, std::vector<std::string>* comments = nullptr)
{
    csv::Reader reader(in, comments);
    csv::Row row;
    if (!reader.next(row)) throw Error("scores: empty input");
    const csv::Row expected{"case_index", "patient_id", "fold", "probability", "true_class", "severity", "age_group"};
    if (row != expected) throw Error("scores: unexpected header");
    std::vector<ScoredCase> out;
    while (reader.next(row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        const std::string where = "scores line " + std::to_string(reader.line());
        if (row.size() != expected.size()) throw Error(where + ": wrong field count");
        ScoredCase s;
        try {
            s.case_index = std::stoul(row[0]);
            s.fold = std::stoul(row[2]);
            s.true_class = std::stoi(row[4]);
        } catch (const std::exception&) {
            throw Error(where + ": malformed integer field");
        }
        s.patient_id = row[1];
        s.probability = parse_real(row[3]);
        if (!(s.probability >= 0.0 && s.probability <= 1.0)) throw Error(where + ": probability outside [0,1]");
        if (s.true_class != 0 && s.true_class != 1) throw Error(where + ": true_class must be 0 or 1");
        auto sev = parse_severity(row[5]);
        if (!sev) throw Error(where + ": unknown severity '" + row[5] + "'");
        s.severity = *sev;
        s.age_group = row[6];
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace tanwb
