#pragma once

#include "robrlhf/mdp.hpp"

#include <optional>
#include <string>

namespace robrlhf {

/// Sigmoid link used by the preference model.
inline double link_sigmoid(double x) { return sigmoid(x); }

/// One comparison: label +1 means tau1 was preferred over tau0.
struct PreferencePair {
    Trajectory tau0;
    Trajectory tau1;
    int label = 1; // in {+1, -1}
    bool corrupted = false; // diagnostic only; estimators never read it
};

struct PreferenceDataset {
    std::vector<PreferencePair> pairs;
    int horizon = 0;
    int feature_dim = 0;

    int size() const { return static_cast<int>(pairs.size()); }
};

/**
 * Draws N independent comparisons: tau0 ~ mu0, tau1 ~ mu1, and label +1 with
 * probability sigma(r*(tau1) - r*(tau0)). Each pair uses its own derived RNG
 * stream so generation order does not affect the result.
 */
PreferenceDataset sample_dataset(const LinearMdp& mdp, const Policy& mu0, const Policy& mu1,
                                 int count, Rng& rng);

/// Rows x^n = phi(tau1) - phi(tau0), one per pair, N x (H*d).
Matrix pair_feature_differences(const FeatureMap& features, const PreferenceDataset& data);

IntVector pair_labels(const PreferenceDataset& data);

struct CoverageDiagnostics {
    Matrix sigma_diff; // E[(phi0 - phi1)(phi0 - phi1)'], (H*d) x (H*d)
    Matrix sigma_avg;  // E[(phi0 + phi1)(phi0 + phi1)']
    double xi = 0.0;    // lambda_min(sigma_diff) / sqrt(H)
    double alpha = 0.0; // relative condition number on the behavior row space
    double nu = 0.0;    // target feature through the squared pseudo-inverse of sigma_avg
    double kappa = 0.0; // bound on |d sigma^{-1}(p)/dp| over achievable p
    bool exact = true;  // enumeration vs Monte-Carlo moments
    double mc_standard_error = 0.0;
};

struct DiagnosticsOptions {
    double enumeration_cap = 1e6; // switch to Monte-Carlo above (S*A)^H paths
    int mc_samples = 20000;
    std::uint64_t seed = 1;
};

/**
 * Coverage constants for the behavior pair (mu0, mu1) against the target
 * policy. Moments are exact by trajectory enumeration when the trajectory
 * space is below the cap, else Monte-Carlo with a reported standard error.
 * alpha compares the (target, mu1) difference covariance against the behavior
 * one restricted to its row space; +inf signals the target leaves that space.
 */
CoverageDiagnostics coverage_diagnostics(const LinearMdp& mdp, const Policy& mu0,
                                         const Policy& mu1, const Policy& target,
                                         const DiagnosticsOptions& options = {});

/// JSON-lines serialization, one pair per line, trajectories as index lists.
std::string dataset_to_jsonl(const PreferenceDataset& data);
PreferenceDataset dataset_from_jsonl(const std::string& text);

} // namespace robrlhf
