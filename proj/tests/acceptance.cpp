// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "oracles.hpp"
#include "tanwb/cli.hpp"

using namespace tanwb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    void fail(const std::string& why)
    {
        if (pass) detail = why;
        pass = false;
    }
    void note(const std::string& what)
    {
        if (pass) detail = what;
    }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Outcome&)>& body)
{
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_s > 0 && secs > budget_s) o.fail("runtime " + format_fixed(secs, 2) + " s over budget");
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << format_fixed(secs, 2) << " s)";
    if (!o.detail.empty()) std::cout << "  " << o.detail;
    std::cout << std::endl;
}

bool rel_close(double got, long double want, double tol)
{
    const double w = static_cast<double>(want);
    return std::fabs(got - w) <= tol * std::max(std::fabs(w), 1e-300);
}

ConfusionCounts make_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn)
{
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.tn = tn;
    c.fn = fn;
    return c;
}

ScoredCase scored(double p, int cls, std::size_t fold = 0)
{
    ScoredCase s;
    s.probability = p;
    s.true_class = cls;
    s.severity = cls ? Severity::Invasive : Severity::Benign;
    s.fold = fold;
    return s;
}

void metric_arithmetic(Outcome& o)
{
    struct Case {
        ConfusionCounts c;
        const char* which;
        const char* want;
    };
    const Case cases[] = {
        {make_counts(2038, 3569, 0, 0), "ppv", "0.3635"},
        {make_counts(2038, 3547, 22, 0), "specificity", "0.0062"},
        {make_counts(739, 636, 0, 0), "ppv", "0.5375"},
        {make_counts(1904, 3703, 0, 0), "ppv", "0.3396"},
        {make_counts(2032, 3437, 132, 6), "sensitivity", "0.9971"},
    };
    for (const auto& k : cases) {
        const Metrics m = metrics_from_counts(k.c);
        const MaybeReal& v = std::string(k.which) == "ppv" ? m.ppv
                             : std::string(k.which) == "sensitivity" ? m.sensitivity
                                                                     : m.specificity;
        const std::string got = format_maybe(v, 4);
        if (got != k.want) o.fail(std::string(k.which) + " " + got + " != " + k.want);
    }
}

void inference_oracle(Outcome& o)
{
    Rng rng(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const TanModel m = oracle::random_model(rng, 1 + rng.below(6), 4);
        const auto states = m.schema().state_counts();
        oracle::for_each_assignment(states, [&](const std::vector<std::uint16_t>& x) {
            worst = std::max(worst, std::fabs(posterior(m, x) - oracle::enumerated_posterior(m, x)));
        });
    }
    if (worst > 1e-12) o.fail("max deviation " + format_exact(worst));
    else o.note("max deviation " + format_exact(worst));
}

void mst_oracle(Outcome& o)
{
    Rng rng(2002);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(5);
        std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                w[i][j] = w[j][i] = rng.below(3) == 0 ? static_cast<double>(rng.below(4)) : rng.uniform();
        const auto edges = max_weight_spanning_tree(w);
        const double got = tree_weight(edges, w), want = oracle::brute_force_max_tree_weight(w);
        if (edges.size() != n - 1 || std::fabs(got - want) > 1e-12) {
            o.fail("trial " + std::to_string(trial) + ": " + format_exact(got) + " vs " + format_exact(want));
            return;
        }
    }
}

void cmi_oracle(Outcome& o)
{
    Rng rng(3003);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t ka = 2 + rng.below(3), kb = 2 + rng.below(3);
        CountCube cube({ka, kb});
        std::vector<std::vector<std::vector<double>>> n(2, std::vector<std::vector<double>>(ka, std::vector<double>(kb)));
        for (int c = 0; c < 2; ++c)
            for (std::size_t a = 0; a < ka; ++a)
                for (std::size_t b = 0; b < kb; ++b) {
                    const double w = rng.below(5) == 0 ? 0.0 : static_cast<double>(rng.below(40));
                    n[c][a][b] = w;
                    const std::uint16_t x[2] = {static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b)};
                    if (w > 0) cube.add(c, x, w);
                }
        if (cube.class_count(0) == 0 || cube.class_count(1) == 0) continue;
        const double ab = conditional_mutual_information(cube, 0, 1);
        const double ba = conditional_mutual_information(cube, 1, 0);
        const double want = oracle::cmi_triple_sum(n);
        worst = std::max(worst, std::fabs(ab - want));
        if (ab != ba) o.fail("asymmetric at trial " + std::to_string(trial));
        if (ab < 0) o.fail("negative at trial " + std::to_string(trial));
    }
    if (worst > 1e-12) o.fail("max deviation " + format_exact(worst));
    else o.note("max deviation " + format_exact(worst));
}

void closed_loop(Outcome& o)
{
    double recovery = 0.0, worst_cpt = 0.0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
        const GroundTruthModel truth = make_strong_truth(10, 500 + seed, 0.05);
        const Dataset small = sample_dataset(truth, 20000, 900 + seed);
        recovery += structure_recovery_score(learn_structure(small, Task::bm), truth.model.structure());

        const Dataset large = sample_dataset(truth, 50000, 1900 + seed);
        const TanModel learned = train(large, Task::bm);
        const TanStructure& ts = truth.model.structure();
        if (structure_recovery_score(learned.structure(), ts) != 1.0) {
            o.fail("seed " + std::to_string(seed) + ": structure not recovered at 50000 samples");
            continue;
        }
        // Compare CPTs in the truth's orientation: refit on the true tree.
        const TanModel fitted = estimate_cpts(large, Task::bm, ts, learned.alpha());
        for (std::size_t f = 0; f < ts.parent.size(); ++f)
            for (int c = 0; c < 2; ++c)
                for (std::size_t ps = 0; ps < truth.model.parent_states(f); ++ps)
                    for (std::size_t s = 0; s < truth.model.schema().feature(f).state_count(); ++s)
                        worst_cpt = std::max(worst_cpt, std::fabs(fitted.probability(f, c, ps, s) -
                                                                  truth.model.probability(f, c, ps, s)));
    }
    recovery /= seeds;
    o.note("mean recovery " + format_fixed(recovery, 4) + ", max CPT error " + format_fixed(worst_cpt, 4));
    if (recovery < 0.95) o.fail("mean recovery " + format_fixed(recovery, 4) + " < 0.95");
    if (worst_cpt > 0.02) o.fail("max CPT error " + format_fixed(worst_cpt, 4) + " > 0.02");
}

void curve_properties(Outcome& o)
{
    std::vector<ScoredCase> perfect, tied, reversed;
    for (int i = 0; i < 10; ++i) {
        const int cls = i % 3 == 0;
        perfect.push_back(scored(cls ? 0.9 : 0.1, cls));
        tied.push_back(scored(0.4, cls));
        reversed.push_back(scored(cls ? 0.1 : 0.9, cls));
    }
    const double a1 = area_under_curve(roc_curve(perfect));
    const double a2 = area_under_curve(roc_curve(tied));
    const double a3 = area_under_curve(roc_curve(reversed));
    if (a1 != 1.0 || a2 != 0.5 || a3 != 0.0)
        o.fail("AUC " + format_exact(a1) + "/" + format_exact(a2) + "/" + format_exact(a3));

    Rng rng(4004);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ScoredCase> s;
        while (true) {
            s.clear();
            std::size_t pos = 0;
            for (int i = 0; i < 30; ++i) {
                const int cls = static_cast<int>(rng.below(2));
                pos += cls;
                // Coarse scores force ties.
                const double p = rng.below(2) ? static_cast<double>(rng.below(8)) / 7.0 : rng.uniform();
                s.push_back(scored(p, cls));
            }
            if (pos > 0 && pos < 30) break;
        }
        worst = std::max(worst, std::fabs(area_under_curve(roc_curve(s)) - oracle::mann_whitney(s)));
        const auto pr = pr_curve(s);
        std::size_t pos = 0;
        for (const auto& c : s) pos += c.true_class;
        const double prevalence = static_cast<double>(pos) / static_cast<double>(s.size());
        if (pr.back().x != 1.0 || pr.back().y != prevalence) o.fail("PR curve does not end at (1, prevalence)");
    }
    if (worst > 1e-9) o.fail("AUC vs Mann-Whitney deviation " + format_exact(worst));
    else if (o.pass) o.note("max AUC vs Mann-Whitney deviation " + format_exact(worst));
}

void sweep_identities(Outcome& o)
{
    const Dataset ds = sample_dataset(make_reference_model(1), kReferenceCases, 1);
    const FoldPlan plan = build_fold_plan(ds, 10, 1);
    const auto scored_cases = run_cross_validation(ds, plan, Task::bm, {});
    const auto all = threshold_sweep(scored_cases, 5001, Task::bm);
    if (auto v = oracle::audit_sweep(all, scored_cases, 5001); !v.empty()) o.fail("whole population: " + v);
    const auto older_cases = filter_subpopulation(scored_cases, "Older");
    const auto older = threshold_sweep(older_cases, 2001, Task::bm, "Older");
    if (auto v = oracle::audit_sweep(older, older_cases, 2001); !v.empty()) o.fail("Older: " + v);
    const auto b1_cases = run_cross_validation(ds, plan, Task::b1m1, {});
    if (auto v = oracle::audit_sweep(threshold_sweep(b1_cases, 5001, Task::b1m1), b1_cases, 5001); !v.empty())
        o.fail("b1m1: " + v);
    o.note(std::to_string(scored_cases.size()) + " cases, " + std::to_string(older_cases.size()) + " Older");
}

void regression_oracle(Outcome& o)
{
    Rng rng(5005);
    auto check = [&](bool ok, const std::string& what, int trial) {
        if (!ok) o.fail("trial " + std::to_string(trial) + ": " + what);
    };
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 6 + rng.below(495);
        const double b[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        const double sigma = 0.01 + rng.uniform();
        std::vector<double> x, y;
        for (std::size_t i = 0; i < n; ++i) {
            x.push_back(rng.uniform());
            y.push_back(predict_poly({b[0], b[1], b[2], b[3]}, x.back()) + sigma * rng.normal());
        }
        const auto r = fit_cubic(x, y);
        const auto full = oracle::ols(x, y, {0, 1, 2, 3});
        const double nd = static_cast<double>(n);
        long double mean = 0, tss = 0;
        for (double v : y) mean += v;
        mean /= nd;
        for (double v : y) tss += (v - mean) * (v - mean);
        const long double mse = full.rss / (nd - 4);
        boost::math::students_t tdist(nd - 4);
        for (int k = 0; k < 4; ++k) {
            const long double se = std::sqrt(mse * full.inverse[k][k]);
            check(rel_close(r.estimate[k], full.coef[k], 1e-8), "estimate", trial);
            check(r.std_error[k] && rel_close(*r.std_error[k], se, 1e-8), "std_error", trial);
            check(r.t_value[k] && rel_close(*r.t_value[k], full.coef[k] / se, 1e-8), "t", trial);
            const double p = 2.0 * boost::math::cdf(tdist, -std::fabs(static_cast<double>(full.coef[k] / se)));
            check(r.t_p_value[k] && rel_close(*r.t_p_value[k], p, 1e-8), "t p-value", trial);
        }
        check(rel_close(r.total_ss, tss, 1e-8), "total_ss", trial);
        check(rel_close(r.error_ss, full.rss, 1e-8), "error_ss", trial);
        check(rel_close(r.model_ss, tss - full.rss, 1e-8), "model_ss", trial);
        check(r.model_ms && rel_close(*r.model_ms, (tss - full.rss) / 3, 1e-8), "model_ms", trial);
        check(r.error_ms && rel_close(*r.error_ms, mse, 1e-8), "error_ms", trial);
        check(rel_close(r.r_square, (tss - full.rss) / tss, 1e-8), "r_square", trial);
        check(rel_close(r.root_mse, std::sqrt(mse), 1e-8), "root_mse", trial);
        check(rel_close(r.mean_of_response, mean, 1e-8), "mean", trial);
        check(r.coeff_var && rel_close(*r.coeff_var, 100.0L * std::sqrt(mse) / mean, 1e-8), "coeff_var", trial);
        check(r.f_value && rel_close(*r.f_value, (tss - full.rss) / 3 / mse, 1e-8), "F", trial);
        boost::math::fisher_f fd(3.0, nd - 4);
        if (r.f_value)
            check(r.f_p_value &&
                      rel_close(*r.f_p_value, boost::math::cdf(boost::math::complement(fd, *r.f_value)), 1e-8),
                  "Pr > F", trial);
        check(r.model_df == 3 && r.error_df == n - 4 && r.total_df == n - 1, "degrees of freedom", trial);
        const std::vector<std::vector<int>> seq{{0}, {0, 1}, {0, 1, 2}, {0, 1, 2, 3}};
        for (int k = 0; k < 3; ++k) {
            const long double t1 = oracle::ols(x, y, seq[k]).rss - oracle::ols(x, y, seq[k + 1]).rss;
            std::vector<int> drop;
            for (int j = 0; j < 4; ++j)
                if (j != k + 1) drop.push_back(j);
            const long double t3 = oracle::ols(x, y, drop).rss - full.rss;
            check(rel_close(r.type1_ss[k], t1, 1e-8), "type1 SS", trial);
            check(rel_close(r.type3_ss[k], t3, 1e-8), "type3 SS", trial);
            check(r.type1_f[k] && rel_close(*r.type1_f[k], t1 / mse, 1e-8), "type1 F", trial);
            check(r.type3_f[k] && rel_close(*r.type3_f[k], t3 / mse, 1e-8), "type3 F", trial);
        }
        check(r.type1_ss[2] == r.type3_ss[2], "last-term Type I SS != Type III SS", trial);
        check(*r.type1_f[2] == *r.type3_f[2] && *r.type1_p[2] == *r.type3_p[2], "last-term F/p differ", trial);
        if (!o.pass) return;
    }
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(i / 39.0);
        y.push_back(predict_poly({0.9, -0.4, 1.3, -2.2}, x.back()));
    }
    const double r2 = fit_cubic(x, y).r_square;
    if (std::fabs(r2 - 1.0) > 1e-12) o.fail("exact cubic R-Square " + format_exact(r2));
}

std::map<std::string, std::string> run_pipeline(const fs::path& dir)
{
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string out = dir.string();
    std::ostringstream sink, err;
    const std::vector<std::vector<std::string>> steps{
        {"synth", "--n", "5607", "--seed", "7", "--out", out},
        {"crossval", "--schema", out + "/schema.json", "--data", out + "/data.csv", "--seed", "3", "--out", out},
        {"sweep", "--out", out},
        {"sweep", "--subpop", "Older", "--out", out},
        {"curves", "--out", out},
        {"curves", "--subpop", "Older", "--mode", "per_fold", "--out", out},
        {"fitpoly", "--out", out},
        {"fitpoly", "--subpop", "Older", "--out", out},
    };
    for (const auto& s : steps) {
        // Subpopulation fitpoly would overwrite the whole-population files; give it its own directory.
        std::vector<std::string> args = s;
        if (s[0] == "fitpoly" && s.size() > 2 && s[1] == "--subpop") {
            args.back() = out + "/older";
            args.insert(args.end(), {"--sweep", out + "/sweep_Older.csv"});
        }
        if (cli::run_command(args, sink, err) != 0) throw Error("pipeline step '" + s[0] + "' failed: " + err.str());
    }
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = cli::read_file(e.path().string());
    return files;
}

void determinism(Outcome& o)
{
    const fs::path base = fs::temp_directory_path() / ("tanwb_acceptance_" + std::to_string(::getpid()));
    const auto a = run_pipeline(base / "a");
    const auto b = run_pipeline(base / "b");
    fs::remove_all(base);
    if (a.size() != b.size()) o.fail("artifact sets differ");
    for (const auto& [name, content] : a) {
        auto it = b.find(name);
        if (it == b.end()) o.fail("missing in second run: " + name);
        else if (it->second != content) o.fail("differs: " + name);
    }
    o.note(std::to_string(a.size()) + " artifacts byte-identical");
}

} // namespace

int main()
{
    criterion("Metric arithmetic reproduces published counts at 4 decimals", 1.0, metric_arithmetic);
    criterion("Inference oracle: 200 random TAN models vs exhaustive enumeration", 10.0, inference_oracle);
    criterion("Spanning-tree oracle: 100 random weight matrices vs brute force", 10.0, mst_oracle);
    criterion("CMI oracle: 100 random tables vs triple sum, symmetric, non-negative", 0.0, cmi_oracle);
    criterion("Closed-loop structure and parameter recovery over 20 seeds", 120.0, closed_loop);
    criterion("Curve properties: AUC extremes, Mann-Whitney, PR endpoint", 0.0, curve_properties);
    criterion("Sweep identities on cross-validated reference data (5001 and Older 2001)", 60.0, sweep_identities);
    criterion("Regression oracle: 100 cubic instances, exact cubic, Type I == Type III", 0.0, regression_oracle);
    criterion("Determinism: synth, crossval, sweep, curves, fitpoly twice", 0.0, determinism);
    std::cout << (failures ? "FAILED " + std::to_string(failures) + " criteria" : std::string("ALL CRITERIA PASSED"))
              << std::endl;
    return failures ? 1 : 0;
}
