#include "robrlhf/contamination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace robrlhf {

AttackStrategy attack_from_name(const std::string& name) {
    if (name == "flip-margin")
        return AttackStrategy::LabelFlipMaxMargin;
    if (name == "replace")
        return AttackStrategy::TrajectoryReplace;
    if (name == "flip-random")
        return AttackStrategy::RandomFlip;
    throw std::invalid_argument("unknown attack strategy: " + name);
}

std::string attack_name(AttackStrategy strategy) {
    switch (strategy) {
    case AttackStrategy::LabelFlipMaxMargin: return "flip-margin";
    case AttackStrategy::TrajectoryReplace: return "replace";
    case AttackStrategy::RandomFlip: return "flip-random";
    }
    return "unknown";
}

namespace {

// Indices of the k largest scores, ties broken by lower index.
std::vector<int> top_k(const Vector& scores, int k) {
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    idx.resize(k);
    return idx;
}

} // namespace

PreferenceDataset corrupt(const FeatureMap& features, const PreferenceDataset& data,
                          const AttackSpec& spec, const std::optional<Vector>& theta_star) {
    if (spec.epsilon < 0.0)
        throw std::invalid_argument("corrupt: epsilon must be nonnegative");
    if (spec.epsilon >= 0.5)
        throw std::invalid_argument(
            "corrupt: epsilon >= 0.5 exceeds the estimators' identifiability limit");

    const int n = data.size();
    const int budget = std::min(static_cast<int>(std::floor(spec.epsilon * n)), n);
    PreferenceDataset out = data;
    if (budget == 0)
        return out;

    const bool needs_theta = spec.strategy != AttackStrategy::RandomFlip;
    if (needs_theta && !theta_star)
        throw std::invalid_argument("corrupt: this strategy needs the true reward parameter");

    switch (spec.strategy) {
    case AttackStrategy::LabelFlipMaxMargin: {
        const Matrix X = pair_feature_differences(features, data);
        const Vector margins = (X * *theta_star).cwiseAbs();
        for (int i : top_k(margins, budget)) {
            out.pairs[i].label = -out.pairs[i].label;
            out.pairs[i].corrupted = true;
        }
        break;
    }
    case AttackStrategy::TrajectoryReplace: {
        // Worst trajectory already present in the data; swapping it in keeps
        // every feature-norm invariant intact.
        double worst_reward = std::numeric_limits<double>::infinity();
        const Trajectory* worst = nullptr;
        for (const PreferencePair& pair : data.pairs) {
            for (const Trajectory* t : {&pair.tau0, &pair.tau1}) {
                const double r = trajectory_reward(features, *t, *theta_star);
                if (r < worst_reward) {
                    worst_reward = r;
                    worst = t;
                }
            }
        }
        // Hit the most confidently ordered pairs: replacing tau1 there turns
        // their labels into maximally misleading evidence.
        Vector conf(n);
        const Matrix X = pair_feature_differences(features, data);
        for (int i = 0; i < n; ++i)
            conf[i] = data.pairs[i].label * X.row(i).dot(*theta_star);
        for (int i : top_k(conf, budget)) {
            out.pairs[i].tau1 = *worst;
            out.pairs[i].corrupted = true;
        }
        break;
    }
    case AttackStrategy::RandomFlip: {
        Rng rng(derive_seed(spec.seed, phase::attack));
        std::vector<int> perm = rng.permutation(n);
        for (int k = 0; k < budget; ++k) {
            out.pairs[perm[k]].label = -out.pairs[perm[k]].label;
            out.pairs[perm[k]].corrupted = true;
        }
        break;
    }
    }
    return out;
}

} // namespace robrlhf
