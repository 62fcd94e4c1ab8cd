#pragma once

#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "tanwb/dataset.hpp"

namespace tanwb {

struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignment; // case index -> fold

    std::vector<std::size_t> test_indices(std::size_t fold) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(std::size_t fold) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] != fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> fold_sizes() const
    {
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t f : assignment) ++sizes[f];
        return sizes;
    }
};

// Patient-grouped, stratified k-fold plan.
//
// Cases of one patient form an indivisible group. A group is placed in the
// stratum (age group x severity) of its most severe case. Strata are visited
// in a fixed order; inside a stratum the groups are shuffled with `seed` and
// each is dealt to the fold holding the fewest cases of that stratum, ties
// going to the fold with the fewest cases overall and then to the next fold
// in rotation. With singleton groups this is plain round-robin.
inline FoldPlan build_fold_plan(const Dataset& ds, std::size_t k, std::uint64_t seed)
{
    if (k < 2) throw Error("build_fold_plan: k must be at least 2");
    if (ds.empty()) throw Error("build_fold_plan: empty dataset");

    struct Group {
        std::vector<std::size_t> cases;
        std::size_t lead = 0; // most severe case, first wins ties
    };
    std::vector<Group> groups;
    std::unordered_map<std::string, std::size_t> group_of;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto [it, fresh] = group_of.try_emplace(ds[i].patient_id, groups.size());
        if (fresh) groups.push_back(Group{{}, i});
        Group& g = groups[it->second];
        g.cases.push_back(i);
        if (rank(ds[i].outcome) > rank(ds[g.lead].outcome)) g.lead = i;
    }
    if (k > groups.size())
        throw Error("build_fold_plan: k=" + std::to_string(k) + " exceeds the number of distinct patients (" +
                    std::to_string(groups.size()) + ")");

    const auto age = ds.age_group_feature();
    std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const CaseRecord& lead = ds[groups[g].lead];
        int age_state = age ? static_cast<int>(lead.states[*age]) : -1;
        strata[{age_state, rank(lead.outcome)}].push_back(g);
    }

    Rng rng(seed);
    FoldPlan plan;
    plan.k = k;
    plan.assignment.assign(ds.size(), 0);
    std::vector<std::size_t> total(k, 0);
    std::size_t cursor = 0;
    for (auto& [key, members] : strata) {
        rng.shuffle(members);
        std::vector<std::size_t> in_stratum(k, 0);
        for (std::size_t g : members) {
            std::size_t best = cursor % k;
            for (std::size_t step = 1; step < k; ++step) {
                std::size_t f = (cursor + step) % k;
                if (std::tie(in_stratum[f], total[f]) < std::tie(in_stratum[best], total[best])) best = f;
            }
            const std::size_t n = groups[g].cases.size();
            in_stratum[best] += n;
            total[best] += n;
            for (std::size_t c : groups[g].cases) plan.assignment[c] = best;
            cursor = best + 1;
        }
    }
    return plan;
}

} // namespace tanwb
