#include "robrlhf/smoothing.hpp"

#include <cmath>

namespace robrlhf {

double SmoothingConfig::resolved_mu(int dim) const {
    if (mu > 0.0)
        return mu;
    const double noise = std::max(oracle_noise, 1e-12);
    if (radius_rule == SmoothingRadiusRule::TheoremForm)
        return std::sqrt(noise) / std::sqrt(8.0 * dim);
    return std::sqrt(noise) / (box_diameter(dim) * std::sqrt(std::max(lipschitz, 1e-12)));
}

Vector sample_restricted_normal(int dim, double halfwidth, Rng& rng) {
    // The standard normal restricted to a box factorizes per coordinate, so
    // coordinate-wise rejection samples the restriction exactly.
    Vector u(dim);
    for (int i = 0; i < dim; ++i) {
        double z;
        do {
            z = rng.normal();
        } while (std::abs(z) > halfwidth);
        u[i] = z;
    }
    return u;
}

Vector gaussian_subgradient(const ValueOracle& oracle, const Vector& theta,
                            const Vector& reference_feature, const SmoothingConfig& config,
                            Rng& rng) {
    const int dim = static_cast<int>(theta.size());
    const double mu = config.resolved_mu(dim);
    const double base = oracle(theta);
    Vector estimate = Vector::Zero(dim);
    for (int k = 0; k < config.samples; ++k) {
        const Vector u = sample_restricted_normal(dim, config.box_halfwidth, rng);
        const double shifted = oracle(theta + mu * u);
        const double term = (shifted - base - mu * reference_feature.dot(u)) / mu;
        estimate += term * u;
    }
    return estimate / static_cast<double>(config.samples);
}

BiasedPgdResult biased_pgd(const ValueOracle& oracle, const Vector& reference_feature,
                           const std::function<Vector(const Vector&)>& projection,
                           const Vector& theta0, const SmoothingConfig& config, int iterations,
                           double eta, Rng& rng,
                           const std::function<bool(const Vector&)>& membership) {
    BiasedPgdResult result;
    if (iterations <= 0) {
        result.theta_bar = theta0;
        return result;
    }
    const int dim = static_cast<int>(theta0.size());
    const double mu = config.resolved_mu(dim);
    if (eta <= 0.0)
        eta = config.domain_diameter * mu /
              (std::max(config.value_bound, 1e-12) * config.box_diameter(dim));

    Vector theta = theta0;
    Vector sum = Vector::Zero(dim);
    for (int t = 0; t < iterations; ++t) {
        const Vector g = gaussian_subgradient(oracle, theta, reference_feature, config, rng);
        theta = projection(theta - eta * g);
        if (membership && !membership(theta))
            result.iterates_feasible = false;
        sum += theta;
    }
    result.theta_bar = sum / static_cast<double>(iterations);
    result.oracle_calls = iterations * (config.samples + 1);
    return result;
}

} // namespace robrlhf
