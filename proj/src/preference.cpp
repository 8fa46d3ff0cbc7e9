#include "robrlhf/preference.hpp"

#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace robrlhf {

PreferenceDataset sample_dataset(const LinearMdp& mdp, const Policy& mu0, const Policy& mu1,
                                 int count, Rng& rng) {
    if (count < 2)
        throw std::invalid_argument("sample_dataset: need at least 2 pairs");
    PreferenceDataset data;
    data.horizon = mdp.horizon;
    data.feature_dim = mdp.feature_dim();
    data.pairs.reserve(count);
    const Vector theta = mdp.theta_star_flat();
    for (int n = 0; n < count; ++n) {
        Rng pair_rng = rng.derived(phase::pair, static_cast<std::uint64_t>(n));
        PreferencePair pair;
        pair.tau0 = sample_trajectory(mdp, mu0, pair_rng);
        pair.tau1 = sample_trajectory(mdp, mu1, pair_rng);
        const double diff = trajectory_reward(mdp.features, pair.tau1, theta) -
                            trajectory_reward(mdp.features, pair.tau0, theta);
        pair.label = pair_rng.uniform() < link_sigmoid(diff) ? 1 : -1;
        data.pairs.push_back(std::move(pair));
    }
    return data;
}

Matrix pair_feature_differences(const FeatureMap& features, const PreferenceDataset& data) {
    const Eigen::Index dim = static_cast<Eigen::Index>(data.horizon) * data.feature_dim;
    Matrix X(data.size(), dim);
    for (int n = 0; n < data.size(); ++n)
        X.row(n) = (trajectory_feature(features, data.pairs[n].tau1) -
                    trajectory_feature(features, data.pairs[n].tau0))
                       .transpose();
    return X;
}

IntVector pair_labels(const PreferenceDataset& data) {
    IntVector y(data.size());
    for (int n = 0; n < data.size(); ++n)
        y[n] = data.pairs[n].label;
    return y;
}

namespace {

struct FeatureMoments {
    Vector mean;   // E[phi(tau)]
    Matrix second; // E[phi(tau) phi(tau)']
    bool exact = true;
    double standard_error = 0.0;
};

FeatureMoments policy_moments(const LinearMdp& mdp, const Policy& policy,
                              const DiagnosticsOptions& options, std::uint64_t stream) {
    const Eigen::Index dim = static_cast<Eigen::Index>(mdp.horizon) * mdp.feature_dim();
    FeatureMoments m;
    m.mean = Vector::Zero(dim);
    m.second = Matrix::Zero(dim, dim);

    if (trajectory_space_size(mdp) <= options.enumeration_cap) {
        for_each_trajectory(mdp, policy, [&](const Trajectory& traj, double p) {
            const Vector f = trajectory_feature(mdp.features, traj);
            m.mean += p * f;
            m.second += p * (f * f.transpose());
        });
        return m;
    }

    m.exact = false;
    Rng rng(derive_seed(options.seed, phase::diagnostics, stream));
    Matrix sum_sq = Matrix::Zero(dim, dim);
    const int n = options.mc_samples;
    for (int i = 0; i < n; ++i) {
        const Trajectory traj = sample_trajectory(mdp, policy, rng);
        const Vector f = trajectory_feature(mdp.features, traj);
        m.mean += f;
        m.second += f * f.transpose();
        sum_sq += (f * f.transpose()).cwiseAbs2();
    }
    m.mean /= n;
    m.second /= n;
    // largest per-entry standard error of the second-moment estimate
    const Matrix var = (sum_sq / n - m.second.cwiseAbs2()).cwiseMax(0.0);
    m.standard_error = std::sqrt(var.maxCoeff() / n);
    return m;
}

Matrix pair_covariance(const FeatureMoments& a, const FeatureMoments& b, double sign) {
    // E[(phi_a + s*phi_b)(phi_a + s*phi_b)'] for independent draws.
    Matrix out = a.second + b.second + sign * (a.mean * b.mean.transpose()) +
                 sign * (b.mean * a.mean.transpose());
    return 0.5 * (out + out.transpose());
}

double relative_condition_number(const Matrix& target, const Matrix& behavior) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(behavior);
    const Vector evals = eig.eigenvalues();
    const double lmax = evals.maxCoeff();
    const double cut = std::max(lmax, 1.0) * 1e-10;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < evals.size(); ++i)
        if (evals[i] > cut)
            keep.push_back(i);
    if (keep.empty())
        return target.norm() > 1e-10 ? std::numeric_limits<double>::infinity() : 0.0;

    Matrix U(behavior.rows(), static_cast<Eigen::Index>(keep.size()));
    Vector lambda(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        U.col(k) = eig.eigenvectors().col(keep[k]);
        lambda[k] = evals[keep[k]];
    }

    // Any target mass outside the behavior row space makes the ratio infinite.
    const Matrix proj = U * U.transpose();
    const Matrix outside = target - proj * target * proj;
    if (outside.norm() > 1e-8 * std::max(1.0, target.norm()))
        return std::numeric_limits<double>::infinity();

    const Vector inv_sqrt = lambda.cwiseSqrt().cwiseInverse();
    const Matrix reduced =
        inv_sqrt.asDiagonal() * (U.transpose() * target * U) * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> red(0.5 * (reduced + reduced.transpose()));
    return std::max(0.0, red.eigenvalues().maxCoeff());
}

double reward_range(const LinearMdp& mdp) {
    // Max minus min total reward over trajectories reachable with positive
    // probability, by forward reachability plus min/max dynamic programming.
    const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
    std::vector<std::vector<bool>> reach(H + 1, std::vector<bool>(S, false));
    for (int s = 0; s < S; ++s)
        reach[0][s] = mdp.rho[s] > 1e-12;
    std::vector<Matrix> P(H);
    for (int h = 0; h < H; ++h) {
        P[h] = mdp.transition_matrix_clipped(h);
        for (int s = 0; s < S; ++s) {
            if (!reach[h][s])
                continue;
            for (int a = 0; a < A; ++a) {
                const auto row = P[h].row(mdp.features.row_index(s, a));
                for (int next = 0; next < S; ++next)
                    if (row[next] > 1e-12)
                        reach[h + 1][next] = true;
            }
        }
    }
    const double neg_inf = -std::numeric_limits<double>::infinity();
    Vector hi_next = Vector::Zero(S), lo_next = Vector::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        Vector hi = Vector::Constant(S, neg_inf), lo = Vector::Constant(S, -neg_inf);
        for (int s = 0; s < S; ++s) {
            if (!reach[h][s])
                continue;
            for (int a = 0; a < A; ++a) {
                const Eigen::Index i = mdp.features.row_index(s, a);
                const double r = mdp.features.row(s, a).dot(mdp.theta_star[h]);
                double best_hi = neg_inf, best_lo = -neg_inf;
                for (int next = 0; next < S; ++next) {
                    if (P[h](i, next) <= 1e-12)
                        continue;
                    best_hi = std::max(best_hi, hi_next[next]);
                    best_lo = std::min(best_lo, lo_next[next]);
                }
                if (best_hi == neg_inf) { // horizon end handled by zero vectors
                    best_hi = 0.0;
                    best_lo = 0.0;
                }
                hi[s] = std::max(hi[s], r + best_hi);
                lo[s] = std::min(lo[s], r + best_lo);
            }
        }
        hi_next = hi;
        lo_next = lo;
    }
    double max_r = neg_inf, min_r = -neg_inf;
    for (int s = 0; s < S; ++s) {
        if (!reach[0][s])
            continue;
        max_r = std::max(max_r, hi_next[s]);
        min_r = std::min(min_r, lo_next[s]);
    }
    return max_r > min_r ? max_r - min_r : 0.0;
}

} // namespace

CoverageDiagnostics coverage_diagnostics(const LinearMdp& mdp, const Policy& mu0,
                                         const Policy& mu1, const Policy& target,
                                         const DiagnosticsOptions& options) {
    const FeatureMoments m0 = policy_moments(mdp, mu0, options, 0);
    const FeatureMoments m1 = policy_moments(mdp, mu1, options, 1);
    const FeatureMoments mt = policy_moments(mdp, target, options, 2);

    CoverageDiagnostics diag;
    diag.exact = m0.exact && m1.exact && mt.exact;
    diag.mc_standard_error =
        std::max({m0.standard_error, m1.standard_error, mt.standard_error});
    diag.sigma_diff = pair_covariance(m0, m1, -1.0);
    diag.sigma_avg = pair_covariance(m0, m1, +1.0);

    Eigen::SelfAdjointEigenSolver<Matrix> diff_eig(diag.sigma_diff);
    diag.xi = std::max(0.0, diff_eig.eigenvalues().minCoeff()) /
              std::sqrt(static_cast<double>(mdp.horizon));

    const Matrix target_diff = pair_covariance(mt, m1, -1.0);
    diag.alpha = relative_condition_number(target_diff, diag.sigma_diff);

    // nu = m' pinv(sigma_avg)^2 m with relative singular-value cutoff 1e-10.
    Eigen::SelfAdjointEigenSolver<Matrix> avg_eig(diag.sigma_avg);
    const Vector evals = avg_eig.eigenvalues();
    const double cut = std::max(evals.maxCoeff(), 0.0) * 1e-10;
    Vector pinv_m = Vector::Zero(mt.mean.size());
    for (Eigen::Index i = 0; i < evals.size(); ++i)
        if (evals[i] > cut)
            pinv_m += (avg_eig.eigenvectors().col(i).dot(mt.mean) / evals[i]) *
                      avg_eig.eigenvectors().col(i);
    diag.nu = pinv_m.squaredNorm();

    const double p_edge = link_sigmoid(-reward_range(mdp));
    diag.kappa = 1.0 / (p_edge * (1.0 - p_edge));
    return diag;
}

std::string dataset_to_jsonl(const PreferenceDataset& data) {
    std::ostringstream os;
    for (const PreferencePair& pair : data.pairs) {
        nlohmann::json j;
        j["tau0"] = {{"states", pair.tau0.states}, {"actions", pair.tau0.actions}};
        j["tau1"] = {{"states", pair.tau1.states}, {"actions", pair.tau1.actions}};
        j["o"] = pair.label;
        j["corrupted"] = pair.corrupted;
        os << j.dump() << '\n';
    }
    return os.str();
}

PreferenceDataset dataset_from_jsonl(const std::string& text) {
    PreferenceDataset data;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        PreferencePair pair;
        pair.tau0.states = j.at("tau0").at("states").get<std::vector<int>>();
        pair.tau0.actions = j.at("tau0").at("actions").get<std::vector<int>>();
        pair.tau1.states = j.at("tau1").at("states").get<std::vector<int>>();
        pair.tau1.actions = j.at("tau1").at("actions").get<std::vector<int>>();
        pair.label = j.at("o").get<int>();
        pair.corrupted = j.value("corrupted", false);
        data.pairs.push_back(std::move(pair));
    }
    if (!data.pairs.empty())
        data.horizon = data.pairs.front().tau0.horizon();
    return data;
}

} // namespace robrlhf
