#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tanwb/model.hpp"

using namespace tanwb;

namespace {

Schema two_feature_schema()
{
    return Schema({{"A", {"s1", "s2"}, Role::imaging},
                   {"B", {"s1", "s2"}, Role::imaging},
                   {"Outcome", {"Benign", "LG", "IntG", "HG", "Invasive"}, Role::class_label}},
                  "Outcome");
}

TanStructure chain(std::size_t n)
{
    TanStructure s;
    s.parent.assign(n, std::nullopt);
    for (std::size_t f = 1; f < n; ++f) s.parent[f] = f - 1;
    return s;
}

} // namespace

TEST(Cpts, SmoothedEstimates)
{
    const Schema schema = two_feature_schema();
    CountCube counts({2, 2});
    // Class 0: A counts {3, 1}; B always s1.
    for (std::uint16_t a : {0, 0, 0, 1}) {
        const std::uint16_t r[] = {a, 0};
        counts.add(0, r);
    }
    // Class 1: A counts {1, 1}.
    for (std::uint16_t a : {0, 1}) {
        const std::uint16_t r[] = {a, 1};
        counts.add(1, r);
    }
    const TanModel ml = estimate_cpts(schema, Task::bm, counts, chain(2), 0.0);
    EXPECT_DOUBLE_EQ(ml.probability(0, 0, 0, 0), 0.75);
    EXPECT_DOUBLE_EQ(ml.probability(0, 0, 0, 1), 0.25);
    EXPECT_DOUBLE_EQ(ml.probability(0, 1, 0, 0), 0.5);
    EXPECT_DOUBLE_EQ(ml.probability(0, 1, 0, 1), 0.5);

    const TanModel sm = estimate_cpts(schema, Task::bm, counts, chain(2), 0.5);
    EXPECT_DOUBLE_EQ(sm.probability(0, 0, 0, 0), 0.7);
    EXPECT_DOUBLE_EQ(sm.probability(0, 0, 0, 1), 0.3);
    EXPECT_DOUBLE_EQ(sm.prior()[0], 4.5 / 7.0);
    // Class 0, A = s2: one record, B = s1.
    EXPECT_DOUBLE_EQ(sm.probability(1, 0, 1, 0), 1.5 / 2.0);
    EXPECT_TRUE(sm.valid());
}

TEST(Cpts, ZeroAlphaWithUnseenParentIsInvalid)
{
    const Schema schema = two_feature_schema();
    CountCube counts({2, 2});
    const std::uint16_t r0[] = {0, 0}, r1[] = {0, 1};
    counts.add(0, r0);
    counts.add(1, r1);
    const TanModel m = estimate_cpts(schema, Task::bm, counts, chain(2), 0.0);
    EXPECT_FALSE(m.valid());
    const std::uint16_t x[] = {0, 0};
    EXPECT_THROW(posterior(m, x), Error);
    EXPECT_THROW(estimate_cpts(schema, Task::bm, counts, chain(2), -1.0), Error);
}

TEST(Cpts, RowsSumToOneAndConvergeToFrequencies)
{
    Rng rng(4);
    const TanModel truth = oracle::random_model(rng, 5, 4);
    const Schema& schema = truth.schema();
    CountCube counts(schema.state_counts());
    Rng draw(9);
    for (int i = 0; i < 3000; ++i) {
        std::vector<std::uint16_t> x(5);
        for (std::size_t f = 0; f < 5; ++f) x[f] = static_cast<std::uint16_t>(draw.below(schema.feature(f).state_count()));
        counts.add(static_cast<int>(draw.below(2)), x);
    }
    const auto s = learn_structure(counts);
    const TanModel m = estimate_cpts(schema, Task::bm, counts, s, 0.5);
    const TanModel tiny = estimate_cpts(schema, Task::bm, counts, s, 1e-9);
    const TanModel ml = estimate_cpts(schema, Task::bm, counts, s, 0.0);
    for (std::size_t f = 0; f < 5; ++f)
        for (int c = 0; c < 2; ++c)
            for (std::size_t ps = 0; ps < m.parent_states(f); ++ps) {
                double sum = 0.0;
                for (std::size_t st = 0; st < schema.feature(f).state_count(); ++st) {
                    sum += m.probability(f, c, ps, st);
                    if (ml.valid()) EXPECT_NEAR(tiny.probability(f, c, ps, st), ml.probability(f, c, ps, st), 1e-8);
                }
                EXPECT_NEAR(sum, 1.0, 1e-12);
            }
}

TEST(Posterior, MatchesJointEnumeration)
{
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const TanModel m = oracle::random_model(rng, 1 + rng.below(6), 4);
        oracle::for_each_assignment(m.schema().state_counts(), [&](const std::vector<std::uint16_t>& x) {
            const double p = posterior(m, x);
            EXPECT_NEAR(p, oracle::enumerated_posterior(m, x), 1e-12);
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
        });
    }
}

TEST(Posterior, UniformModelGivesOneHalf)
{
    const Schema schema = two_feature_schema();
    std::vector<std::vector<double>> tables{std::vector<double>(4, 0.5), std::vector<double>(8, 0.5)};
    const TanModel m(schema, Task::bm, chain(2), 0.5, {0.5, 0.5}, tables);
    oracle::for_each_assignment({2, 2}, [&](const std::vector<std::uint16_t>& x) { EXPECT_EQ(posterior(m, x), 0.5); });
    const std::uint16_t bad[] = {0, 2};
    EXPECT_THROW(posterior(m, bad), Error);
    const std::uint16_t short_record[] = {0};
    EXPECT_THROW(posterior(m, short_record), Error);
}

TEST(Posterior, ThirtyFeaturesDoNotUnderflow)
{
    Rng rng(12);
    std::vector<Variable> v;
    for (int f = 0; f < 30; ++f) v.push_back({"F" + std::to_string(f), {"a", "b"}, Role::imaging});
    v.push_back({"Outcome", {"Benign", "LG", "IntG", "HG", "Invasive"}, Role::class_label});
    std::vector<std::vector<double>> tables(30);
    tables[0] = {1e-12, 1 - 1e-12, 1e-11, 1 - 1e-11};
    for (int f = 1; f < 30; ++f) tables[f] = {1e-12, 1 - 1e-12, 1e-12, 1 - 1e-12, 1e-11, 1 - 1e-11, 1e-11, 1 - 1e-11};
    const TanModel m(Schema(v, "Outcome"), Task::bm, chain(30), 0.5, {0.5, 0.5}, tables);
    const std::vector<std::uint16_t> x(30, 0);
    const double p = posterior(m, x);
    EXPECT_TRUE(std::isfinite(p));
    EXPECT_GT(p, 0.999);
}

TEST(ModelJson, BitExactRoundTrip)
{
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const TanModel m = oracle::random_model(rng, 1 + rng.below(6), 4);
        const TanModel back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
        EXPECT_EQ(back.schema(), m.schema());
        EXPECT_EQ(back.structure(), m.structure());
        EXPECT_EQ(back.prior(), m.prior());
        EXPECT_EQ(back.tables(), m.tables());
        EXPECT_EQ(model_to_json(back).dump(), model_to_json(m).dump());
    }
}

TEST(ModelJson, RejectsTamperedDocuments)
{
    Rng rng(2);
    const auto doc = model_to_json(oracle::random_model(rng, 3, 3));
    auto bad_hash = doc;
    bad_hash["schema_hash"] = "0000000000000000";
    EXPECT_THROW(model_from_json(bad_hash), Error);
    auto bad_format = doc;
    bad_format["format"] = "other";
    EXPECT_THROW(model_from_json(bad_format), Error);
    auto missing = doc;
    missing.erase("cpts");
    EXPECT_THROW(model_from_json(missing), Error);
    EXPECT_THROW(load_model_file("/nonexistent/model.json"), IoError);
}

TEST(Train, MutualInformationSwitch)
{
    Rng rng(6);
    const TanModel truth = oracle::random_model(rng, 4, 3);
    Dataset ds(truth.schema());
    for (int i = 0; i < 500; ++i) {
        std::vector<std::uint16_t> x(4);
        for (std::size_t f = 0; f < 4; ++f) x[f] = static_cast<std::uint16_t>(rng.below(truth.schema().feature(f).state_count()));
        ds.add({"p" + std::to_string(i), Date{0}, x, rng.below(2) ? Severity::Invasive : Severity::Benign});
    }
    const TanModel a = train(ds, Task::bm, LearnOptions{EdgeWeight::mutual_information, 0.5});
    EXPECT_EQ(a.edge_weight(), EdgeWeight::mutual_information);
    EXPECT_NO_THROW(a.structure().validate());
    EXPECT_EQ(model_from_json(model_to_json(a)).edge_weight(), EdgeWeight::mutual_information);
    EXPECT_THROW(train(Dataset(truth.schema()), Task::bm), Error);
}
