#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "tanwb/crossval.hpp"
#include "tanwb/model.hpp"

namespace tanwb {

// A TAN model used as a data generator, plus the metadata needed to
// reproduce a draw.
struct GroundTruthModel {
    TanModel model;
    std::uint64_t seed = 0;
    std::size_t target_size = 0;
    // P(severity | binary class of model.task()), rows sum to 1.
    std::array<std::array<double, 5>, 2> severity_mix{};
    // Fraction of cases that reuse the patient id of an earlier case in the
    // same sampling block (exercises patient-grouped folds).
    double repeat_patient_rate = 0.0;
};

// Reference variable set: 31 categorical features and the five-level outcome.
inline Schema reference_schema()
{
    std::vector<Variable> v;
    auto add = [&v](std::string name, std::vector<std::string> states, Role role) {
        v.push_back(Variable{std::move(name), std::move(states), role});
    };
    const std::vector<std::string> presence{"missing", "present"};
    add("Age Group", {"Younger", "Middle", "Older"}, Role::demographic);
    add("Personal History", {"No", "Yes"}, Role::demographic);
    add("Family History", {"None", "Minor", "Major", "missing"}, Role::demographic);
    add("BIRADS Category", {"0", "1", "2", "3", "4", "5", "7", "8", "9"}, Role::imaging);
    add("Breast Density",
        {"Predominantly Fatty", "Scattered Fibroglandular", "Heterogeneously Dense", "Extremely Dense", "missing"},
        Role::imaging);
    for (const char* d : {"Circumscribed", "Obscured", "Microlobulated", "Spiculated", "Indistinct"})
        add(std::string("Mass Margin ") + d, presence, Role::imaging);
    for (const char* d : {"Oval", "Round", "Lobular", "Irregular"}) add(std::string("Mass Shape ") + d, presence, Role::imaging);
    for (const char* d : {"Fat", "Low", "Equal", "High"}) add(std::string("Mass Density ") + d, presence, Role::imaging);
    for (const char* d : {"Round", "Punctate", "Amorphous", "Pleomorphic", "Fine Linear"})
        add(std::string("Calcification Morphology ") + d, presence, Role::imaging);
    for (const char* d : {"Diffuse", "Regional", "Clustered", "Segmental", "Linear"})
        add(std::string("Calcification Distribution ") + d, presence, Role::imaging);
    add("Asymmetric Density", presence, Role::imaging);
    add("Architectural Distortion", presence, Role::imaging);
    add("Palpable Lump", {"missing", "No", "Yes"}, Role::imaging);
    add("Outcome", {"Benign", "LG", "IntG", "HG", "Invasive"}, Role::class_label);
    return Schema(std::move(v), "Outcome");
}

// Reference state counts over 5607 cases, aligned with reference_schema().
inline std::vector<std::vector<double>> reference_state_counts()
{
    return {
        {2091, 2141, 1375},
        {4697, 910},
        {3888, 1014, 416, 289},
        {440, 0, 2, 2, 4513, 650, 0, 0, 0},
        {484, 2164, 2384, 574, 1},
        {4927, 680}, {5195, 412}, {5561, 46}, {5116, 491}, {4825, 782},
        {5065, 542}, {5425, 182}, {5167, 440}, {5012, 595},
        {5598, 9}, {5578, 29}, {5201, 406}, {5373, 234},
        {5566, 41}, {5490, 117}, {4950, 657}, {4696, 911}, {5323, 284},
        {5434, 173}, {5576, 31}, {3693, 1914}, {5521, 86}, {5441, 166},
        {5116, 491},
        {5140, 467},
        {1376, 2560, 1671},
    };
}

inline constexpr std::size_t kReferenceCases = 5607;

namespace detail {

inline std::vector<double> normalized(std::vector<double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    for (double& x : v) x /= s;
    return v;
}

} // namespace detail

// A 31-feature generator imitating the published population: class prior
// and severity mix follow the whole-population outcome counts, the age-group
// CPT reproduces the aging share per class, and every other feature is a
// reference marginal tilted by class and by a random tree parent.
inline GroundTruthModel make_reference_model(std::uint64_t seed)
{
    Schema schema = reference_schema();
    const auto counts = reference_state_counts();
    const std::size_t nf = schema.feature_count();
    Rng rng(derive_seed(seed, 0x7a11));

    TanStructure s;
    s.root = 0;
    s.parent.assign(nf, std::nullopt);
    for (std::size_t f = 1; f < nf; ++f) s.parent[f] = static_cast<std::size_t>(rng.below(f));

    constexpr double neg = 3569.0, pos = 2038.0;
    const std::array<double, 2> prior{neg / kReferenceCases, pos / kReferenceCases};

    std::vector<std::vector<double>> tables(nf);
    // Age group: Older share per class from the aging breakdown (636 benign,
    // 739 malignant of 1375); Younger/Middle split the rest 2091:2141.
    {
        const double old_share[2] = {636.0 / neg, 739.0 / pos};
        for (int c = 0; c < 2; ++c) {
            const double rest = 1.0 - old_share[c];
            tables[0].push_back(rest * 2091.0 / 4232.0);
            tables[0].push_back(rest * 2141.0 / 4232.0);
            tables[0].push_back(old_share[c]);
        }
    }
    for (std::size_t f = 1; f < nf; ++f) {
        const std::size_t k = schema.feature(f).state_count();
        const std::size_t pk = schema.feature(*s.parent[f]).state_count();
        std::vector<double> base(k);
        for (std::size_t st = 0; st < k; ++st) base[st] = std::max(counts[f][st], 0.5);
        base = detail::normalized(base);
        std::vector<double> class_tilt(k), parent_tilt(pk * k);
        for (double& t : class_tilt) t = 0.8 * rng.normal();
        for (double& t : parent_tilt) t = 0.4 * rng.normal();
        for (int c = 0; c < 2; ++c)
            for (std::size_t ps = 0; ps < pk; ++ps) {
                std::vector<double> row(k);
                for (std::size_t st = 0; st < k; ++st)
                    row[st] = base[st] * std::exp((c ? 0.5 : -0.5) * class_tilt[st] + parent_tilt[ps * k + st]);
                row = detail::normalized(row);
                tables[f].insert(tables[f].end(), row.begin(), row.end());
            }
    }

    GroundTruthModel g{TanModel(std::move(schema), Task::bm, std::move(s), 0.0, prior, std::move(tables)), seed,
                       kReferenceCases, {}, 0.05};
    g.severity_mix[0] = {1.0, 0.0, 0.0, 0.0, 0.0};
    g.severity_mix[1] = {0.0, 134.0 / pos, 179.0 / pos, 216.0 / pos, 1509.0 / pos};
    return g;
}

// Exact P(x_f | c) for every feature, propagated down the tree.
inline std::vector<std::array<std::vector<double>, 2>> class_conditional_marginals(const TanModel& m)
{
    const std::size_t nf = m.schema().feature_count();
    std::vector<std::array<std::vector<double>, 2>> out(nf);
    for (std::size_t f : m.structure().topological_order()) {
        const std::size_t k = m.schema().feature(f).state_count();
        const auto& p = m.structure().parent[f];
        for (int c = 0; c < 2; ++c) {
            auto& dst = out[f][c];
            dst.assign(k, 0.0);
            for (std::size_t ps = 0; ps < m.parent_states(f); ++ps) {
                const double w = p ? out[*p][c][ps] : 1.0;
                for (std::size_t s = 0; s < k; ++s) dst[s] += w * m.probability(f, c, ps, s);
            }
        }
    }
    return out;
}

// Exact I(X_f; X_parent(f) | C) in nats under the model.
inline double tree_edge_cmi(const TanModel& m, std::size_t f)
{
    const auto& p = m.structure().parent.at(f);
    if (!p) throw Error("tree_edge_cmi: feature has no tree parent");
    const auto marg = class_conditional_marginals(m);
    const std::size_t k = m.schema().feature(f).state_count();
    double sum = 0.0;
    for (int c = 0; c < 2; ++c)
        for (std::size_t ps = 0; ps < m.parent_states(f); ++ps)
            for (std::size_t s = 0; s < k; ++s) {
                const double cond = m.probability(f, c, ps, s);
                const double joint = m.prior()[c] * marg[*p][c][ps] * cond;
                if (joint > 0.0) sum += joint * std::log(cond / marg[f][c][s]);
            }
    return sum;
}

// Random tree model over `features` variables with 2 or 3 states where every
// tree edge carries at least `cmi_floor` nats of conditional mutual
// information and every state keeps class-conditional probability of at
// least `state_floor`, so no (class, parent state) cell is rare. Each child
// copies a class-shifted version of its parent's state with probability
// 0.7-0.85; a child has 3 states only under a 3-state parent. CPT rows are
// redrawn until both floors hold.
inline GroundTruthModel make_strong_truth(std::size_t features, std::uint64_t seed, double cmi_floor = 0.05,
                                          double state_floor = 0.2)
{
    if (features < 2) throw Error("make_strong_truth: need at least 2 features");
    Rng rng(derive_seed(seed, 0x5eed));
    TanStructure s;
    s.parent.assign(features, std::nullopt);
    for (std::size_t f = 1; f < features; ++f) s.parent[f] = static_cast<std::size_t>(rng.below(f));

    std::vector<Variable> vars;
    for (std::size_t f = 0; f < features; ++f) {
        Variable v{"F" + std::to_string(f), {}, Role::imaging};
        const bool may_be_ternary = !s.parent[f] || vars[*s.parent[f]].states.size() == 3;
        const std::size_t k = may_be_ternary ? 2 + rng.below(2) : 2;
        for (std::size_t st = 0; st < k; ++st) v.states.push_back("s" + std::to_string(st));
        vars.push_back(std::move(v));
    }
    vars.push_back(Variable{"Outcome", {"Benign", "LG", "IntG", "HG", "Invasive"}, Role::class_label});
    Schema schema(std::move(vars), "Outcome");
    const std::array<double, 2> prior{0.5, 0.5};

    std::vector<std::vector<double>> tables(features);
    {
        const std::size_t k = schema.feature(0).state_count();
        for (int c = 0; c < 2; ++c) {
            std::vector<double> row(k);
            do {
                for (double& v : row) v = 0.5 + rng.uniform();
                row = detail::normalized(row);
            } while (*std::min_element(row.begin(), row.end()) < state_floor);
            tables[0].insert(tables[0].end(), row.begin(), row.end());
        }
    }
    for (std::size_t f = 1; f < features; ++f) {
        const std::size_t k = schema.feature(f).state_count();
        const std::size_t pk = schema.feature(*s.parent[f]).state_count();
        for (int attempt = 0;; ++attempt) {
            if (attempt == 1000) throw Error("make_strong_truth: cannot reach the CMI and state floors");
            std::vector<double> t;
            for (int c = 0; c < 2; ++c) {
                const std::size_t shift = rng.below(k);
                for (std::size_t ps = 0; ps < pk; ++ps) {
                    const double keep = 0.7 + 0.15 * rng.uniform();
                    std::vector<double> rest(k);
                    for (double& v : rest) v = 0.5 + rng.uniform();
                    rest[(ps + shift) % k] = 0.0;
                    rest = detail::normalized(rest);
                    for (std::size_t st = 0; st < k; ++st)
                        t.push_back(st == (ps + shift) % k ? keep : (1.0 - keep) * rest[st]);
                }
            }
            tables[f] = t;
            // Edge CMI depends only on ancestors, which are already final.
            std::vector<std::vector<double>> partial = tables;
            TanStructure sub = s;
            for (std::size_t g = f + 1; g < features; ++g) {
                sub.parent[g] = 0;
                partial[g].assign(2 * schema.feature(0).state_count() * schema.feature(g).state_count(),
                                  1.0 / static_cast<double>(schema.feature(g).state_count()));
            }
            const TanModel probe(schema, Task::bm, sub, 0.0, prior, partial);
            if (tree_edge_cmi(probe, f) < cmi_floor) continue;
            const auto marg = class_conditional_marginals(probe);
            if (std::min(*std::min_element(marg[f][0].begin(), marg[f][0].end()),
                         *std::min_element(marg[f][1].begin(), marg[f][1].end())) >= state_floor)
                break;
        }
    }
    GroundTruthModel g{TanModel(std::move(schema), Task::bm, std::move(s), 0.0, prior, std::move(tables)), seed,
                       20000, {}, 0.0};
    g.severity_mix[0] = {1.0, 0.0, 0.0, 0.0, 0.0};
    g.severity_mix[1] = {0.0, 0.0, 0.0, 0.0, 1.0};
    return g;
}

// Cases per independently seeded sampling block.
inline constexpr std::size_t kSampleBlock = 4096;

// Ancestral sampling: class from the prior, features in tree order given
// (class, parent state), severity from the class's mix. Block b of the index
// range uses its own derived seed, so blocks can be drawn in parallel and the
// result is independent of the thread count.
inline Dataset sample_dataset(const GroundTruthModel& truth, std::size_t n, std::uint64_t seed)
{
    if (n == 0) throw Error("sample_dataset: n must be at least 1");
    const TanModel& m = truth.model;
    if (!m.valid()) throw Error("sample_dataset: ground-truth model has undefined distributions");
    const std::size_t nf = m.schema().feature_count();
    const auto order = m.structure().topological_order();
    const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
    std::vector<std::vector<CaseRecord>> parts(blocks);
    const Date base = Date::from_ymd(1997, 1, 6);
    constexpr int kDateSpan = 5468; // through 2011-12-27

    parallel_for(blocks, thread_budget(), [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        const std::size_t lo = b * kSampleBlock, hi = std::min(n, lo + kSampleBlock);
        auto& out = parts[b];
        out.reserve(hi - lo);
        std::vector<double> row;
        for (std::size_t i = lo; i < hi; ++i) {
            CaseRecord rec;
            const int c = rng.uniform() < m.prior()[1] ? 1 : 0;
            rec.states.assign(nf, 0);
            for (std::size_t f : order) {
                const auto& p = m.structure().parent[f];
                const std::size_t ps = p ? rec.states[*p] : 0;
                const std::size_t k = m.schema().feature(f).state_count();
                const std::size_t off = m.row_offset(f, c, ps);
                row.assign(m.tables()[f].begin() + off, m.tables()[f].begin() + off + k);
                rec.states[f] = static_cast<std::uint16_t>(rng.categorical(row));
            }
            const std::vector<double> mix(truth.severity_mix[c].begin(), truth.severity_mix[c].end());
            rec.outcome = kAllSeverities[rng.categorical(mix)];
            const double u = rng.uniform();
            if (!out.empty() && u < truth.repeat_patient_rate)
                rec.patient_id = out[rng.below(out.size())].patient_id;
            else {
                char id[24];
                std::snprintf(id, sizeof id, "P%07zu", i + 1);
                rec.patient_id = id;
            }
            rec.exam_date = Date{base.days + static_cast<int>(rng.below(kDateSpan))};
            out.push_back(std::move(rec));
        }
    });

    Dataset ds(m.schema());
    for (auto& part : parts)
        for (auto& rec : part) ds.add(std::move(rec));
    return ds;
}

// Fraction of the true undirected tree edges present in the learned tree.
inline double structure_recovery_score(const TanStructure& learned, const TanStructure& truth)
{
    if (learned.feature_count() != truth.feature_count())
        throw Error("structure_recovery_score: feature sets differ (" + std::to_string(learned.feature_count()) +
                    " vs " + std::to_string(truth.feature_count()) + ")");
    const auto truth_edges = truth.undirected_edges();
    if (truth_edges.empty()) return 1.0;
    const auto le = learned.undirected_edges();
    const std::set<Edge> learned_edges(le.begin(), le.end());
    std::size_t hit = 0;
    for (const Edge& e : truth_edges) hit += learned_edges.count(e);
    return static_cast<double>(hit) / static_cast<double>(truth_edges.size());
}

inline nlohmann::json ground_truth_to_json(const GroundTruthModel& g)
{
    nlohmann::json doc = model_to_json(g.model);
    nlohmann::json mix = nlohmann::json::array();
    for (const auto& row : g.severity_mix) {
        nlohmann::json r = nlohmann::json::array();
        for (double p : row) r.push_back(format_exact(p));
        mix.push_back(r);
    }
    doc["generation"] = {{"seed", g.seed},
                         {"target_size", g.target_size},
                         {"severity_mix", mix},
                         {"repeat_patient_rate", format_exact(g.repeat_patient_rate)}};
    return doc;
}

inline GroundTruthModel ground_truth_from_json(const nlohmann::json& doc)
{
    GroundTruthModel g;
    g.model = model_from_json(doc);
    try {
        const auto& gen = doc.at("generation");
        g.seed = gen.at("seed").get<std::uint64_t>();
        g.target_size = gen.at("target_size").get<std::size_t>();
        for (int c = 0; c < 2; ++c)
            for (int s = 0; s < 5; ++s) g.severity_mix[c][s] = parse_real(gen.at("severity_mix").at(c).at(s).get<std::string>());
        g.repeat_patient_rate = parse_real(gen.value("repeat_patient_rate", std::string("0")));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("ground-truth model: malformed generation block: ") + e.what());
    }
    return g;
}

} // namespace tanwb
