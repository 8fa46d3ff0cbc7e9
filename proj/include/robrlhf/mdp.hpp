#pragma once

#include "robrlhf/common.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace robrlhf {

/**
 * Explicit tabular feature map phi : (state, action) -> R^d.
 *
 * Rows of `table` are indexed by s * num_actions + a and every row has
 * Euclidean norm at most one.
 */
struct FeatureMap {
    int num_states = 0;
    int num_actions = 0;
    int dim = 0;
    Matrix table; // (S*A) x d

    Eigen::Index row_index(int s, int a) const {
        return static_cast<Eigen::Index>(s) * num_actions + a;
    }
    auto row(int s, int a) const { return table.row(row_index(s, a)); }
};

/**
 * Finite-horizon linear MDP: transitions P_h(.|s,a) = mu_h phi(s,a) and
 * rewards r_h(s,a) = phi(s,a)' theta_h, both linear in a shared feature map.
 */
struct LinearMdp {
    int horizon = 0;
    int num_states = 0;
    int num_actions = 0;
    Vector rho;                     // initial state distribution, size S
    std::vector<Matrix> mu;         // per step, S x d; row s' is mu_h(s')
    std::vector<Vector> theta_star; // per step, size d
    FeatureMap features;

    int feature_dim() const { return features.dim; }

    /// Raw transition matrix for step h: (S*A) x S, row (s,a), column s'.
    Matrix transition_matrix(int h) const {
        return features.table * mu[h].transpose();
    }

    /// Transition matrix with least-squares dust below zero clipped off.
    Matrix transition_matrix_clipped(int h) const {
        return transition_matrix(h).cwiseMax(0.0);
    }

    /// True reward parameter flattened to R^{H*d}, step-major.
    Vector theta_star_flat() const;
};

inline Eigen::Ref<const Vector> theta_step(const Vector& theta_flat, int h, int d) {
    return theta_flat.segment(static_cast<Eigen::Index>(h) * d, d);
}

/// One episode: states has length H+1, actions has length H.
struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions;

    int horizon() const { return static_cast<int>(actions.size()); }
    bool operator==(const Trajectory&) const = default;
};

/// Per-step action distributions, H matrices of shape S x A.
struct TabularPolicy {
    std::vector<Matrix> action_probs;
};

/// pi_h(a|s) proportional to exp(temperature * phi(s,a)' weights_h).
struct SoftmaxLinearPolicy {
    std::vector<Vector> weights;
    double temperature = 1.0;
};

class Policy;

/// Episode-level mixture: a component is drawn once per episode.
struct MixturePolicy {
    std::vector<Policy> components;
    std::vector<double> weights;
};

class Policy {
public:
    using Repr = std::variant<TabularPolicy, SoftmaxLinearPolicy, MixturePolicy>;

    Policy() : repr_(TabularPolicy{}) {}
    Policy(TabularPolicy p) : repr_(std::move(p)) {}
    Policy(SoftmaxLinearPolicy p) : repr_(std::move(p)) {}
    Policy(MixturePolicy p) : repr_(std::move(p)) {}

    const Repr& repr() const { return repr_; }
    bool is_mixture() const { return std::holds_alternative<MixturePolicy>(repr_); }

private:
    Repr repr_;
};

/// Uniformly random action at every state and step.
Policy uniform_policy(int horizon, int num_states, int num_actions);

/// Action probabilities pi_h(a|s) as an S x A matrix. Throws for mixtures.
Matrix policy_step_matrix(const FeatureMap& features, const Policy& policy, int h);

/**
 * Checks every structural invariant of the MDP and returns one message per
 * violation, naming the offending (h, s, a) where applicable. An empty
 * result means the instance is valid.
 */
std::vector<std::string> validate(const LinearMdp& mdp);

/// Rolls out one episode from rho under the policy; deterministic per Rng state.
Trajectory sample_trajectory(const LinearMdp& mdp, const Policy& policy, Rng& rng);

/// Concatenated per-step features [phi(s_1,a_1); ...; phi(s_H,a_H)] in R^{H*d}.
Vector trajectory_feature(const FeatureMap& features, const Trajectory& traj);

/// Total reward phi(tau)' theta_flat.
double trajectory_reward(const FeatureMap& features, const Trajectory& traj,
                         const Vector& theta_flat);

struct OptimalSolution {
    double value = 0.0;
    Policy policy; // deterministic greedy, argmax ties to the lowest action index
};

/**
 * Exact backward-induction optimum for rewards r_h(s,a) = phi(s,a)' theta_h.
 * theta_flat is the step-major flattening of (theta_1, ..., theta_H).
 */
OptimalSolution optimal_value(const LinearMdp& mdp, const Vector& theta_flat);

/// Exact policy evaluation by dynamic programming; mixtures evaluate affinely.
double evaluate_policy(const LinearMdp& mdp, const Policy& policy, const Vector& theta_flat);

/// q_h(s,a) = P(s_h = s, a_h = a) under the policy, one S x A matrix per step.
struct OccupancyMeasure {
    std::vector<Matrix> q;
};

/// Exact forward recursion; mixtures combine component occupancies affinely.
OccupancyMeasure occupancy_measure(const LinearMdp& mdp, const Policy& policy);

/// Average feature Phi' q_h at step h (0-based), a vector in R^d.
Vector expected_feature(const LinearMdp& mdp, const Policy& policy, int h);

/// E[phi(tau)] in R^{H*d}: the per-step expected features concatenated.
Vector expected_trajectory_feature(const LinearMdp& mdp, const Policy& policy);

/**
 * Enumerates every positive-probability trajectory under the policy and calls
 * visit(trajectory, probability). Intended for small instances; the caller is
 * responsible for checking (S*A)^H is affordable.
 */
void for_each_trajectory(const LinearMdp& mdp, const Policy& policy,
                         const std::function<void(const Trajectory&, double)>& visit);

/// Number of (state, action) sequences, (S*A)^H, saturating at overflow.
double trajectory_space_size(const LinearMdp& mdp);

struct MdpGeneratorOptions {
    // Norm of each per-step reward parameter after projection onto the
    // feature-difference subspace (the component along sum_{s'} mu_h(s') is
    // removed; it only shifts all step-h rewards by a constant).
    double reward_norm = 1.0;
    int max_attempts = 16;
};

/**
 * Random valid linear MDP. Builds a row-stochastic transition kernel from d
 * anchor state-action pairs, assigns every other pair convex anchor weights
 * as its feature, recovers mu_h by least squares and re-validates; instances
 * that fail validation are rejected and regenerated.
 */
LinearMdp random_linear_mdp(int num_states, int num_actions, int dim, int horizon, Rng& rng,
                            const MdpGeneratorOptions& options = {});

/// JSON document {H, S, A, d, rho, features, mu, theta_star}, row-major nesting.
std::string mdp_to_json(const LinearMdp& mdp);
LinearMdp mdp_from_json(const std::string& text);

} // namespace robrlhf
