#pragma once

#include "robrlhf/common.hpp"

#include <optional>

namespace robrlhf {

enum class RobustMeanMethod {
    SpectralFilter,    // iterative top-eigenvector tail removal
    TrimmedCoordinate, // per-coordinate mean of the middle (1-2eps) range
};

struct RobustMeanConfig {
    double epsilon = 0.0; // contamination fraction, in [0, 0.5)
    RobustMeanMethod method = RobustMeanMethod::SpectralFilter;
    int max_rounds = 20;
    // Variance proxy sigma^2 for the filter stopping rule; a median-based
    // scale estimate is used when absent.
    std::optional<double> sigma_bound;
    double threshold_constant = 9.0; // filter stops once lambda_max <= C * sigma^2
};

/**
 * Mean of an epsilon-corrupted sample, rows of `points`. With epsilon zero
 * this is exactly the sample mean. The spectral filter repeatedly removes the
 * epsilon-tail of squared projections onto the top covariance eigenvector
 * until the top eigenvalue falls under the threshold.
 */
Vector robust_mean(const Matrix& points, const RobustMeanConfig& config);

/**
 * Second-moment matrix estimated by robust_mean over the flattened outer
 * products x x', reshaped and symmetrized.
 */
Matrix robust_covariance(const Matrix& points, const RobustMeanConfig& config);

} // namespace robrlhf
