#include "robrlhf/reward_estimation.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace robrlhf {

namespace {

std::vector<int> all_indices(Eigen::Index n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

} // namespace

Vector pointwise_log_likelihood(const Vector& theta, const Matrix& X, const IntVector& y) {
    const Vector z = X * theta;
    Vector out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
        out[i] = log_sigmoid(y[i] * z[i]);
    return out;
}

double average_log_likelihood(const Vector& theta, const Matrix& X, const IntVector& y,
                              std::span<const int> subset) {
    if (subset.empty())
        throw std::invalid_argument("average_log_likelihood: empty subset");
    const Vector z = X * theta;
    double total = 0.0;
    for (int i : subset)
        total += log_sigmoid(y[i] * z[i]);
    return total / static_cast<double>(subset.size());
}

double average_log_likelihood(const Vector& theta, const Matrix& X, const IntVector& y) {
    const auto idx = all_indices(X.rows());
    return average_log_likelihood(theta, X, y, idx);
}

Vector average_log_likelihood_gradient(const Vector& theta, const Matrix& X, const IntVector& y,
                                       std::span<const int> subset) {
    if (subset.empty())
        throw std::invalid_argument("average_log_likelihood_gradient: empty subset");
    const Vector z = X * theta;
    Vector g = Vector::Zero(theta.size());
    for (int i : subset) {
        // d/dtheta log sigma(y z) = y x / (1 + exp(y z))
        const double w = y[i] / (1.0 + std::exp(std::min(y[i] * z[i], 500.0)));
        g += w * X.row(i).transpose();
    }
    return g / static_cast<double>(subset.size());
}

Vector average_log_likelihood_gradient(const Vector& theta, const Matrix& X, const IntVector& y) {
    const auto idx = all_indices(X.rows());
    return average_log_likelihood_gradient(theta, X, y, idx);
}

namespace {

// Projected gradient ascent of the average subset log-likelihood over the
// norm ball, with Armijo backtracking. Concave objective, so a stationary
// gradient mapping certifies the constrained maximum.
Vector maximize_subset_likelihood(const Matrix& X, const IntVector& y,
                                  std::span<const int> subset, const Vector& init,
                                  double radius, double tol, int max_iters) {
    Vector theta = project_to_ball(init, radius);
    double f = average_log_likelihood(theta, X, y, subset);
    double step = 1.0;
    for (int it = 0; it < max_iters; ++it) {
        const Vector g = average_log_likelihood_gradient(theta, X, y, subset);
        const Vector mapped = project_to_ball(theta + g, radius) - theta;
        if (mapped.norm() <= tol)
            break;
        step = std::min(step * 2.0, 1e6);
        bool accepted = false;
        for (int back = 0; back < 60; ++back) {
            const Vector trial = project_to_ball(theta + step * g, radius);
            const double trial_f = average_log_likelihood(trial, X, y, subset);
            if (trial_f >= f + 1e-4 * g.dot(trial - theta)) {
                theta = trial;
                f = trial_f;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            break;
    }
    return theta;
}

std::vector<int> select_top(const Vector& scores, int keep) {
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

RewardEstimate trimmed_mle(const Matrix& X, const IntVector& y, const TrimmedMleConfig& config) {
    const int n = static_cast<int>(X.rows());
    if (n < 2)
        throw std::invalid_argument("trimmed_mle: need at least 2 points");
    if (config.epsilon < 0.0 || config.epsilon >= 0.5)
        throw std::invalid_argument("trimmed_mle: epsilon must lie in [0, 0.5)");
    if (config.ball_radius <= 0.0)
        throw std::invalid_argument("trimmed_mle: ball_radius must be positive");

    const int keep = static_cast<int>(std::ceil((1.0 - config.epsilon) * n));
    const double eta =
        config.eta_slack > 0.0 ? config.eta_slack : std::max(config.epsilon * config.epsilon, 1e-10);

    RewardEstimate est;
    Vector theta = Vector::Zero(X.cols());
    std::vector<int> subset;
    for (int outer = 0; outer < config.max_outer_iters; ++outer) {
        est.outer_iterations = outer + 1;
        const Vector ll = pointwise_log_likelihood(theta, X, y);
        subset = select_top(ll, keep);
        double before = 0.0;
        for (int i : subset)
            before += ll[i];

        const Vector theta_next =
            maximize_subset_likelihood(X, y, subset, theta, config.ball_radius,
                                       config.inner_tol, config.inner_max_iters);
        const double after =
            average_log_likelihood(theta_next, X, y, subset) * static_cast<double>(keep);
        est.objective_history.push_back(after);

        if (after - before <= eta) {
            est.converged = true;
            break; // return the pre-round iterate, whose subset this is
        }
        theta = theta_next;
    }

    if (!est.converged) {
        // Out of rounds; the latest iterate is still monotone-valid.
        const Vector ll = pointwise_log_likelihood(theta, X, y);
        subset = select_top(ll, keep);
    }

    est.theta_hat = theta;
    est.subset = subset;
    est.subset_avg_log_likelihood = average_log_likelihood(theta, X, y, subset);
    est.stationarity_gap =
        (average_log_likelihood_gradient(theta, X, y, subset) * static_cast<double>(keep) / n)
            .norm();
    return est;
}

double stationarity_gap(const Vector& theta_hat, const Matrix& X, const IntVector& y,
                        double epsilon, const Vector& theta_ref) {
    const int n = static_cast<int>(X.rows());
    const int keep = static_cast<int>(std::ceil((1.0 - epsilon) * n));
    const Vector ll = pointwise_log_likelihood(theta_hat, X, y);
    const std::vector<int> subset = select_top(ll, keep);
    const Vector direction = theta_ref - theta_hat;
    const double norm = direction.norm();
    if (norm == 0.0)
        throw std::invalid_argument("stationarity_gap: reference equals the estimate");
    const Vector g =
        average_log_likelihood_gradient(theta_hat, X, y, subset) * static_cast<double>(keep) / n;
    return g.dot(direction) / norm;
}

double confidence_zeta(double epsilon, int horizon, int dim, int total_count, double delta) {
    if (horizon <= 0 || dim <= 0 || total_count <= 0 || delta <= 0.0 || delta >= 1.0)
        throw std::invalid_argument("confidence_zeta: invalid arguments");
    return 6.0 * epsilon * horizon * std::sqrt(static_cast<double>(dim)) +
           2.0 * (static_cast<double>(dim) / total_count) *
               std::log(static_cast<double>(horizon) * total_count / delta);
}

ConfidenceSet make_confidence_set(const Vector& theta_hat, double zeta, double ball_radius,
                                  Matrix X, IntVector y) {
    ConfidenceSet set;
    set.theta_hat = theta_hat;
    set.zeta = zeta;
    set.ball_radius = ball_radius;
    set.X = std::move(X);
    set.y = std::move(y);
    set.center_avg_log_likelihood = average_log_likelihood(theta_hat, set.X, set.y);
    return set;
}

bool confidence_contains(const ConfidenceSet& set, const Vector& theta) {
    if (theta.norm() > set.ball_radius * (1.0 + 1e-12) + 1e-12)
        return false;
    const double diff =
        average_log_likelihood(theta, set.X, set.y) - set.center_avg_log_likelihood;
    return diff >= -set.zeta - 1e-12;
}

namespace {

// Inner subproblem of the projection: minimize 0.5|u - target|^2 - lambda * ll(u)
// over the ball. Strongly convex; projected gradient with backtracking.
Vector penalized_projection(const ConfidenceSet& set, const Vector& target, double lambda,
                            Vector u) {
    const double radius = set.ball_radius;
    double step = 1.0;
    double f = 0.5 * (u - target).squaredNorm() -
               lambda * average_log_likelihood(u, set.X, set.y);
    for (int it = 0; it < 400; ++it) {
        const Vector grad =
            (u - target) - lambda * average_log_likelihood_gradient(u, set.X, set.y);
        const Vector mapped = project_to_ball(u - grad, radius) - u;
        if (mapped.norm() <= 1e-10 * std::max(1.0, target.norm()))
            break;
        step = std::min(step * 2.0, 1e4);
        bool accepted = false;
        for (int back = 0; back < 60; ++back) {
            const Vector trial = project_to_ball(u - step * grad, radius);
            const double trial_f = 0.5 * (trial - target).squaredNorm() -
                                   lambda * average_log_likelihood(trial, set.X, set.y);
            if (trial_f <= f + 1e-4 * grad.dot(trial - u)) {
                u = trial;
                f = trial_f;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            break;
    }
    return u;
}

double constraint_value(const ConfidenceSet& set, const Vector& u) {
    return average_log_likelihood(u, set.X, set.y) - set.center_avg_log_likelihood + set.zeta;
}

} // namespace

Vector confidence_project(const ConfidenceSet& set, const Vector& theta) {
    if (confidence_contains(set, theta))
        return theta;

    const Vector ball_point = project_to_ball(theta, set.ball_radius);
    if (constraint_value(set, ball_point) >= 0.0)
        return ball_point; // likelihood constraint inactive: radial projection

    // The likelihood constraint is active. Bisect its multiplier; larger
    // lambda pulls the solution toward the likelihood maximizer, which is
    // feasible because the center is.
    double lo = 0.0;
    double hi = 1.0;
    Vector u = ball_point;
    Vector u_hi;
    for (int grow = 0; grow < 80; ++grow) {
        u_hi = penalized_projection(set, theta, hi, u);
        if (constraint_value(set, u_hi) >= 0.0)
            break;
        lo = hi;
        hi *= 2.0;
        u = u_hi;
        if (grow == 79)
            throw std::runtime_error("confidence_project: multiplier search failed");
    }

    Vector feasible = u_hi;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Vector u_mid = penalized_projection(set, theta, mid, feasible);
        const double c = constraint_value(set, u_mid);
        if (std::abs(c) <= 1e-10)
            return u_mid;
        if (c >= 0.0) {
            hi = mid;
            feasible = u_mid;
        } else {
            lo = mid;
        }
        if (hi - lo <= 1e-12 * std::max(1.0, hi))
            break;
    }
    return feasible;
}

std::string estimate_to_json(const RewardEstimate& estimate) {
    nlohmann::json j;
    j["theta_hat"] = std::vector<double>(estimate.theta_hat.data(),
                                         estimate.theta_hat.data() + estimate.theta_hat.size());
    j["subset"] = estimate.subset;
    j["subset_avg_log_likelihood"] = estimate.subset_avg_log_likelihood;
    j["stationarity_gap"] = estimate.stationarity_gap;
    j["converged"] = estimate.converged;
    j["outer_iterations"] = estimate.outer_iterations;
    return j.dump();
}

} // namespace robrlhf
