#pragma once

#include "robrlhf/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace robrlhf {

/**
 * Average Bradley-Terry log-likelihood (1/n) sum log sigma(y_i * theta' x_i)
 * over the given rows, and its gradient. Evaluated on the log1p branch that
 * stays finite for saturated inputs.
 */
double average_log_likelihood(const Vector& theta, const Matrix& X, const IntVector& y);
double average_log_likelihood(const Vector& theta, const Matrix& X, const IntVector& y,
                              std::span<const int> subset);
Vector average_log_likelihood_gradient(const Vector& theta, const Matrix& X, const IntVector& y);
Vector average_log_likelihood_gradient(const Vector& theta, const Matrix& X, const IntVector& y,
                                       std::span<const int> subset);

/// Per-row log-likelihoods log sigma(y_i * theta' x_i).
Vector pointwise_log_likelihood(const Vector& theta, const Matrix& X, const IntVector& y);

struct TrimmedMleConfig {
    double epsilon = 0.0;
    double eta_slack = -1.0;   // stopping slack; <= 0 selects max(epsilon^2, 1e-10)
    double ball_radius = 0.0;  // required; sqrt(H*d) for the RLHF pipelines
    int max_outer_iters = 200;
    double inner_tol = 1e-8;   // gradient-mapping norm for the inner ascent
    int inner_max_iters = 2000;
};

struct RewardEstimate {
    Vector theta_hat;
    std::vector<int> subset; // kept indices, size ceil((1-eps)N), selected under theta_hat
    double subset_avg_log_likelihood = 0.0;
    double stationarity_gap = 0.0; // norm of (1/N) sum_{subset} grad log-lik at theta_hat
    bool converged = false;
    int outer_iterations = 0;
    // Sum of subset log-likelihoods after each (select, fit) round; the
    // alternating scheme makes this nondecreasing.
    std::vector<double> objective_history;
};

/**
 * Alternating trimmed maximum likelihood: select the ceil((1-eps)N) rows of
 * highest log-likelihood under the current parameter (ties by index), then
 * maximize the subset likelihood over the norm ball by projected gradient
 * ascent with backtracking. Stops once a round improves the subset
 * log-likelihood sum by at most eta_slack and returns the pre-round iterate.
 */
RewardEstimate trimmed_mle(const Matrix& X, const IntVector& y, const TrimmedMleConfig& config);

/**
 * Directional stationarity (1/N) sum_{n in S} grad log-lik(theta_hat)' u with
 * u the unit vector toward theta_ref and S the trimmed subset under theta_hat.
 */
double stationarity_gap(const Vector& theta_hat, const Matrix& X, const IntVector& y,
                        double epsilon, const Vector& theta_ref);

/// zeta = 6 eps H sqrt(d) + 2 (d/N) ln(H N / delta); N is the full dataset size.
double confidence_zeta(double epsilon, int horizon, int dim, int total_count, double delta);

/**
 * Likelihood ball around the trimmed estimate: parameters inside the norm
 * ball whose average log-likelihood on the estimation half is within zeta of
 * the estimate's. Convex (intersection of a ball and a superlevel set of a
 * concave function) and never empty since the center belongs to it.
 */
struct ConfidenceSet {
    Vector theta_hat;
    double zeta = 0.0;
    double ball_radius = 0.0;
    Matrix X;    // estimation-half feature differences
    IntVector y; // matching labels
    double center_avg_log_likelihood = 0.0;
};

ConfidenceSet make_confidence_set(const Vector& theta_hat, double zeta, double ball_radius,
                                  Matrix X, IntVector y);

bool confidence_contains(const ConfidenceSet& set, const Vector& theta);

/**
 * Euclidean projection onto the confidence set: bisection on the multiplier
 * of the single concave likelihood constraint, with the ball handled by
 * closed-form projection inside the inner solves. Accurate to ~1e-6 in the
 * projected point; always returns a member.
 */
Vector confidence_project(const ConfidenceSet& set, const Vector& theta);

std::string estimate_to_json(const RewardEstimate& estimate);

} // namespace robrlhf
