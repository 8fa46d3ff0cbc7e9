#pragma once

#include "robrlhf/preference.hpp"

#include <optional>

namespace robrlhf {

enum class AttackStrategy {
    LabelFlipMaxMargin, // flip o on the pairs with largest |theta*' x^n|
    TrajectoryReplace,  // swap tau1 for the dataset trajectory most anti-aligned with theta*
    RandomFlip,         // flip o on uniformly chosen pairs
};

AttackStrategy attack_from_name(const std::string& name);
std::string attack_name(AttackStrategy strategy);

struct AttackSpec {
    double epsilon = 0.0; // fraction of tuples the attacker may rewrite
    AttackStrategy strategy = AttackStrategy::RandomFlip;
    std::uint64_t seed = 0;
};

/**
 * Huber contamination: rewrites exactly min(floor(epsilon * N), N) tuples and
 * sets their corrupted flags. The margin and replace strategies require the
 * true reward parameter as side information. Rejects epsilon >= 0.5, the
 * identifiability limit of the downstream estimators.
 */
PreferenceDataset corrupt(const FeatureMap& features, const PreferenceDataset& data,
                          const AttackSpec& spec,
                          const std::optional<Vector>& theta_star = std::nullopt);

} // namespace robrlhf
