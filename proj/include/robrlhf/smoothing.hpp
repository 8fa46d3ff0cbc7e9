#pragma once

#include "robrlhf/common.hpp"

#include <functional>

namespace robrlhf {

enum class SmoothingRadiusRule {
    TheoremForm, // mu = sqrt(noise) / sqrt(8 * dim)
    ProofForm,   // mu = sqrt(noise) / (diam(E) * sqrt(L))
};

struct SmoothingConfig {
    double mu = -1.0; // smoothing radius; <= 0 derives it from the rule below
    int samples = 100;       // K directions per gradient estimate
    double box_halfwidth = 4.0; // E = [-hw, hw]^dim keeps the normalizer above 1/2
    double lipschitz = 1.0;     // L of the target function
    double value_bound = 1.0;   // M, max |f|
    double domain_diameter = 1.0; // D of the feasible set
    double oracle_noise = 1e-3;   // bound on |oracle - f|
    SmoothingRadiusRule radius_rule = SmoothingRadiusRule::TheoremForm;

    double resolved_mu(int dim) const;
    double box_diameter(int dim) const { return 2.0 * box_halfwidth * std::sqrt(double(dim)); }
};

using ValueOracle = std::function<double(const Vector&)>;

/// Standard normal vector conditioned on the box [-hw, hw]^dim, by per-coordinate rejection.
Vector sample_restricted_normal(int dim, double halfwidth, Rng& rng);

/**
 * One-point-difference estimate of the smoothed gradient of
 * f(theta) = oracle(theta) - reference_feature' theta:
 * (1/K) sum_k [(V(theta + mu u_k) - V(theta) - mu ref'u_k) / mu] u_k.
 * Costs K+1 oracle evaluations.
 */
Vector gaussian_subgradient(const ValueOracle& oracle, const Vector& theta,
                            const Vector& reference_feature, const SmoothingConfig& config,
                            Rng& rng);

struct BiasedPgdResult {
    Vector theta_bar; // uniform average of the post-projection iterates
    int oracle_calls = 0;
    bool iterates_feasible = true; // membership audit when a checker is supplied
};

/**
 * Projected subgradient descent driven by gaussian_subgradient. Runs T steps
 * theta <- Proj(theta - eta g) and returns the iterate average; T == 0
 * returns the start point. eta <= 0 selects D mu / (M diam(E)).
 */
BiasedPgdResult biased_pgd(const ValueOracle& oracle, const Vector& reference_feature,
                           const std::function<Vector(const Vector&)>& projection,
                           const Vector& theta0, const SmoothingConfig& config, int iterations,
                           double eta, Rng& rng,
                           const std::function<bool(const Vector&)>& membership = nullptr);

} // namespace robrlhf
