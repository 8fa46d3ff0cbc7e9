#include "robrlhf/mdp.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace robrlhf {

namespace {

constexpr double kProbDust = 1e-12;  // clip threshold for least-squares dust
constexpr double kSumTol = 1e-9;
constexpr double kNormTol = 1e-9;

std::string at(int h, int s, int a) {
    std::ostringstream os;
    os << " at (h=" << h << ", s=" << s << ", a=" << a << ")";
    return os.str();
}

} // namespace

double median(std::vector<double> values) {
    if (values.empty())
        throw std::invalid_argument("median: empty input");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1)
        return hi;
    std::nth_element(values.begin(), values.begin() + mid - 1, values.end());
    return 0.5 * (hi + values[mid - 1]);
}

Vector LinearMdp::theta_star_flat() const {
    const int d = feature_dim();
    Vector flat(static_cast<Eigen::Index>(horizon) * d);
    for (int h = 0; h < horizon; ++h)
        flat.segment(static_cast<Eigen::Index>(h) * d, d) = theta_star[h];
    return flat;
}

Policy uniform_policy(int horizon, int num_states, int num_actions) {
    TabularPolicy p;
    p.action_probs.assign(horizon,
                          Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
    return Policy(std::move(p));
}

Matrix policy_step_matrix(const FeatureMap& features, const Policy& policy, int h) {
    if (const auto* tab = std::get_if<TabularPolicy>(&policy.repr()))
        return tab->action_probs.at(h);
    if (const auto* soft = std::get_if<SoftmaxLinearPolicy>(&policy.repr())) {
        const int S = features.num_states, A = features.num_actions;
        Matrix probs(S, A);
        for (int s = 0; s < S; ++s) {
            Vector logits(A);
            for (int a = 0; a < A; ++a)
                logits[a] = soft->temperature * features.row(s, a).dot(soft->weights.at(h));
            const double m = logits.maxCoeff();
            Vector e = (logits.array() - m).exp();
            probs.row(s) = e.transpose() / e.sum();
        }
        return probs;
    }
    throw std::invalid_argument("policy_step_matrix: mixture policies have no per-step matrix");
}

std::vector<std::string> validate(const LinearMdp& mdp) {
    std::vector<std::string> violations;
    const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
    const int d = mdp.features.dim;

    if (d < 1)
        violations.push_back("feature dimension must be at least 1");
    if (mdp.features.table.rows() != static_cast<Eigen::Index>(S) * A ||
        mdp.features.table.cols() != d) {
        violations.push_back("feature table shape does not match (S*A, d)");
        return violations;
    }
    if (static_cast<int>(mdp.mu.size()) != H || static_cast<int>(mdp.theta_star.size()) != H) {
        violations.push_back("mu/theta_star must have one entry per step");
        return violations;
    }

    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            if (mdp.features.row(s, a).norm() > 1.0 + kNormTol)
                violations.push_back("feature norm exceeds 1" + at(-1, s, a));

    if (mdp.rho.size() != S) {
        violations.push_back("rho size does not match state count");
    } else {
        if (mdp.rho.minCoeff() < -kProbDust)
            violations.push_back("rho has a negative entry");
        if (std::abs(mdp.rho.sum() - 1.0) > kSumTol)
            violations.push_back("rho does not sum to 1");
    }

    const double sqrt_d = std::sqrt(static_cast<double>(d));
    for (int h = 0; h < H; ++h) {
        if (mdp.mu[h].rows() != S || mdp.mu[h].cols() != d) {
            violations.push_back("mu shape mismatch at h=" + std::to_string(h));
            continue;
        }
        if (mdp.theta_star[h].size() != d) {
            violations.push_back("theta_star size mismatch at h=" + std::to_string(h));
            continue;
        }
        if (mdp.theta_star[h].norm() > sqrt_d + kNormTol)
            violations.push_back("theta norm exceeds sqrt(d) at h=" + std::to_string(h));
        Vector measure_sum = mdp.mu[h].colwise().sum();
        if (measure_sum.norm() > sqrt_d + kNormTol)
            violations.push_back("measure norm exceeds sqrt(d) at h=" + std::to_string(h));

        const Matrix P = mdp.transition_matrix(h);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const auto row = P.row(mdp.features.row_index(s, a));
                if (row.minCoeff() < -kProbDust)
                    violations.push_back("transition has negative probability" + at(h, s, a));
                if (std::abs(row.sum() - 1.0) > kSumTol)
                    violations.push_back("transition not stochastic" + at(h, s, a));
            }
        }
    }
    return violations;
}

namespace {

int sample_from_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, Rng& rng) {
    Vector w = row.transpose().cwiseMax(0.0);
    return rng.categorical(w);
}

const Policy& pick_component(const MixturePolicy& mix, Rng& rng) {
    Vector w = Eigen::Map<const Vector>(mix.weights.data(), mix.weights.size());
    return mix.components.at(rng.categorical(w));
}

} // namespace

Trajectory sample_trajectory(const LinearMdp& mdp, const Policy& policy, Rng& rng) {
    if (const auto* mix = std::get_if<MixturePolicy>(&policy.repr()))
        return sample_trajectory(mdp, pick_component(*mix, rng), rng);

    Trajectory traj;
    traj.states.reserve(mdp.horizon + 1);
    traj.actions.reserve(mdp.horizon);
    int s = rng.categorical(mdp.rho);
    traj.states.push_back(s);
    for (int h = 0; h < mdp.horizon; ++h) {
        const Matrix probs = policy_step_matrix(mdp.features, policy, h);
        const int a = sample_from_row(probs.row(s), rng);
        const Matrix P = mdp.transition_matrix_clipped(h);
        const int next = sample_from_row(P.row(mdp.features.row_index(s, a)), rng);
        traj.actions.push_back(a);
        traj.states.push_back(next);
        s = next;
    }
    return traj;
}

Vector trajectory_feature(const FeatureMap& features, const Trajectory& traj) {
    const int H = traj.horizon(), d = features.dim;
    Vector out(static_cast<Eigen::Index>(H) * d);
    for (int h = 0; h < H; ++h)
        out.segment(static_cast<Eigen::Index>(h) * d, d) =
            features.row(traj.states[h], traj.actions[h]).transpose();
    return out;
}

double trajectory_reward(const FeatureMap& features, const Trajectory& traj,
                         const Vector& theta_flat) {
    return trajectory_feature(features, traj).dot(theta_flat);
}

OptimalSolution optimal_value(const LinearMdp& mdp, const Vector& theta_flat) {
    const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
    const int d = mdp.feature_dim();
    if (theta_flat.size() != static_cast<Eigen::Index>(H) * d)
        throw std::invalid_argument("optimal_value: theta size must be H*d");

    TabularPolicy greedy;
    greedy.action_probs.assign(H, Matrix::Zero(S, A));
    Vector v_next = Vector::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        const Matrix P = mdp.transition_matrix_clipped(h);
        const Vector r = mdp.features.table * theta_step(theta_flat, h, d);
        Vector v(S);
        for (int s = 0; s < S; ++s) {
            int best = 0;
            double best_q = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const Eigen::Index i = mdp.features.row_index(s, a);
                const double q = r[i] + P.row(i).dot(v_next);
                if (q > best_q) { // strict: ties keep the lowest action index
                    best_q = q;
                    best = a;
                }
            }
            v[s] = best_q;
            greedy.action_probs[h](s, best) = 1.0;
        }
        v_next = v;
    }
    return {mdp.rho.dot(v_next), Policy(std::move(greedy))};
}

double evaluate_policy(const LinearMdp& mdp, const Policy& policy, const Vector& theta_flat) {
    if (const auto* mix = std::get_if<MixturePolicy>(&policy.repr())) {
        double value = 0.0;
        for (std::size_t i = 0; i < mix->components.size(); ++i)
            value += mix->weights[i] * evaluate_policy(mdp, mix->components[i], theta_flat);
        return value;
    }
    const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
    const int d = mdp.feature_dim();
    Vector v_next = Vector::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        const Matrix P = mdp.transition_matrix_clipped(h);
        const Vector r = mdp.features.table * theta_step(theta_flat, h, d);
        const Matrix probs = policy_step_matrix(mdp.features, policy, h);
        Vector v = Vector::Zero(S);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const Eigen::Index i = mdp.features.row_index(s, a);
                v[s] += probs(s, a) * (r[i] + P.row(i).dot(v_next));
            }
        v_next = v;
    }
    return mdp.rho.dot(v_next);
}

OccupancyMeasure occupancy_measure(const LinearMdp& mdp, const Policy& policy) {
    const int H = mdp.horizon, S = mdp.num_states, A = mdp.num_actions;
    if (const auto* mix = std::get_if<MixturePolicy>(&policy.repr())) {
        OccupancyMeasure total;
        total.q.assign(H, Matrix::Zero(S, A));
        for (std::size_t i = 0; i < mix->components.size(); ++i) {
            const OccupancyMeasure part = occupancy_measure(mdp, mix->components[i]);
            for (int h = 0; h < H; ++h)
                total.q[h] += mix->weights[i] * part.q[h];
        }
        return total;
    }

    OccupancyMeasure occ;
    occ.q.assign(H, Matrix::Zero(S, A));
    Vector state_dist = mdp.rho;
    for (int h = 0; h < H; ++h) {
        const Matrix probs = policy_step_matrix(mdp.features, policy, h);
        for (int s = 0; s < S; ++s)
            occ.q[h].row(s) = state_dist[s] * probs.row(s);
        const Matrix P = mdp.transition_matrix_clipped(h);
        Vector next = Vector::Zero(S);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                next += occ.q[h](s, a) * P.row(mdp.features.row_index(s, a)).transpose();
        state_dist = next;
    }
    return occ;
}

Vector expected_feature(const LinearMdp& mdp, const Policy& policy, int h) {
    const OccupancyMeasure occ = occupancy_measure(mdp, policy);
    const int S = mdp.num_states, A = mdp.num_actions;
    Vector out = Vector::Zero(mdp.feature_dim());
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out += occ.q[h](s, a) * mdp.features.row(s, a).transpose();
    return out;
}

Vector expected_trajectory_feature(const LinearMdp& mdp, const Policy& policy) {
    const OccupancyMeasure occ = occupancy_measure(mdp, policy);
    const int d = mdp.feature_dim();
    Vector out = Vector::Zero(static_cast<Eigen::Index>(mdp.horizon) * d);
    for (int h = 0; h < mdp.horizon; ++h) {
        Vector step = Vector::Zero(d);
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a)
                step += occ.q[h](s, a) * mdp.features.row(s, a).transpose();
        out.segment(static_cast<Eigen::Index>(h) * d, d) = step;
    }
    return out;
}

namespace {

void enumerate_rec(const LinearMdp& mdp, const std::vector<Matrix>& probs,
                   const std::vector<Matrix>& P, Trajectory& traj, int h, double prob,
                   const std::function<void(const Trajectory&, double)>& visit) {
    if (prob <= 0.0)
        return;
    if (h == mdp.horizon) {
        visit(traj, prob);
        return;
    }
    const int s = traj.states.back();
    for (int a = 0; a < mdp.num_actions; ++a) {
        const double pa = probs[h](s, a);
        if (pa <= 0.0)
            continue;
        const auto row = P[h].row(mdp.features.row_index(s, a));
        for (int next = 0; next < mdp.num_states; ++next) {
            const double pt = row[next];
            if (pt <= 0.0)
                continue;
            traj.actions.push_back(a);
            traj.states.push_back(next);
            enumerate_rec(mdp, probs, P, traj, h + 1, prob * pa * pt, visit);
            traj.actions.pop_back();
            traj.states.pop_back();
        }
    }
}

} // namespace

void for_each_trajectory(const LinearMdp& mdp, const Policy& policy,
                         const std::function<void(const Trajectory&, double)>& visit) {
    if (const auto* mix = std::get_if<MixturePolicy>(&policy.repr())) {
        for (std::size_t i = 0; i < mix->components.size(); ++i) {
            const double w = mix->weights[i];
            for_each_trajectory(mdp, mix->components[i],
                                [&](const Trajectory& t, double p) { visit(t, w * p); });
        }
        return;
    }
    std::vector<Matrix> probs(mdp.horizon), P(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        probs[h] = policy_step_matrix(mdp.features, policy, h);
        P[h] = mdp.transition_matrix_clipped(h);
    }
    Trajectory traj;
    for (int s = 0; s < mdp.num_states; ++s) {
        if (mdp.rho[s] <= 0.0)
            continue;
        traj.states.assign(1, s);
        traj.actions.clear();
        enumerate_rec(mdp, probs, P, traj, 0, mdp.rho[s], visit);
    }
}

double trajectory_space_size(const LinearMdp& mdp) {
    return std::pow(static_cast<double>(mdp.num_states) * mdp.num_actions, mdp.horizon);
}

LinearMdp random_linear_mdp(int num_states, int num_actions, int dim, int horizon, Rng& rng,
                            const MdpGeneratorOptions& options) {
    if (dim < 1 || dim > num_states * num_actions)
        throw std::invalid_argument("random_linear_mdp: need 1 <= d <= S*A");
    if (horizon < 1 || num_states < 1 || num_actions < 1)
        throw std::invalid_argument("random_linear_mdp: dimensions must be positive");

    const int SA = num_states * num_actions;
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        LinearMdp mdp;
        mdp.horizon = horizon;
        mdp.num_states = num_states;
        mdp.num_actions = num_actions;
        mdp.features.num_states = num_states;
        mdp.features.num_actions = num_actions;
        mdp.features.dim = dim;

        // Anchor pairs carry basis features; every other pair gets convex
        // anchor weights, so the induced kernel is row-stochastic by
        // construction and the feature norms stay within the unit ball.
        Matrix phi = Matrix::Zero(SA, dim);
        for (int i = 0; i < dim; ++i)
            phi(i, i) = 1.0;
        for (int i = dim; i < SA; ++i) {
            Vector w(dim);
            for (int k = 0; k < dim; ++k)
                w[k] = -std::log(1.0 - rng.uniform());
            phi.row(i) = (w / w.sum()).transpose();
        }
        mdp.features.table = phi;

        // Row-stochastic anchor kernels, then mu by least squares.
        mdp.mu.resize(horizon);
        for (int h = 0; h < horizon; ++h) {
            Matrix anchorP(dim, num_states);
            for (int i = 0; i < dim; ++i) {
                Vector w(num_states);
                for (int s = 0; s < num_states; ++s)
                    w[s] = -std::log(1.0 - rng.uniform());
                anchorP.row(i) = (w / w.sum()).transpose();
            }
            Matrix full = phi * anchorP; // (SA x S), realizable by construction
            // mu_h' solves phi * mu_h' = P_h in the least-squares sense.
            Matrix muT = phi.colPivHouseholderQr().solve(full); // d x S
            mdp.mu[h] = muT.transpose();
        }

        Vector rho(num_states);
        for (int s = 0; s < num_states; ++s)
            rho[s] = -std::log(1.0 - rng.uniform());
        mdp.rho = rho / rho.sum();

        // Reward parameters live in the identifiable subspace: the component
        // along sum_{s'} mu_h(s') shifts every step-h reward by a constant
        // and cancels in all feature differences.
        mdp.theta_star.resize(horizon);
        for (int h = 0; h < horizon; ++h) {
            Vector m = mdp.mu[h].colwise().sum();
            Vector theta = rng.normal_vector(dim);
            if (m.squaredNorm() > 0)
                theta -= (theta.dot(m) / m.squaredNorm()) * m;
            const double n = theta.norm();
            const double target = std::min(options.reward_norm, std::sqrt(double(dim)));
            mdp.theta_star[h] = n > 0 ? Vector(theta * (target / n)) : theta;
        }

        if (validate(mdp).empty())
            return mdp;
    }
    throw std::runtime_error("random_linear_mdp: failed to generate a valid instance");
}

std::string mdp_to_json(const LinearMdp& mdp) {
    nlohmann::json j;
    j["H"] = mdp.horizon;
    j["S"] = mdp.num_states;
    j["A"] = mdp.num_actions;
    j["d"] = mdp.feature_dim();
    j["rho"] = std::vector<double>(mdp.rho.data(), mdp.rho.data() + mdp.rho.size());
    nlohmann::json features = nlohmann::json::array();
    for (Eigen::Index r = 0; r < mdp.features.table.rows(); ++r) {
        std::vector<double> row(mdp.features.table.row(r).begin(), mdp.features.table.row(r).end());
        features.push_back(row);
    }
    j["features"] = features;
    nlohmann::json mu = nlohmann::json::array();
    for (const Matrix& m : mdp.mu) {
        nlohmann::json step = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            step.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
        mu.push_back(step);
    }
    j["mu"] = mu;
    nlohmann::json theta = nlohmann::json::array();
    for (const Vector& t : mdp.theta_star)
        theta.push_back(std::vector<double>(t.data(), t.data() + t.size()));
    j["theta_star"] = theta;
    return j.dump();
}

LinearMdp mdp_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    LinearMdp mdp;
    mdp.horizon = j.at("H").get<int>();
    mdp.num_states = j.at("S").get<int>();
    mdp.num_actions = j.at("A").get<int>();
    const int d = j.at("d").get<int>();
    mdp.features.num_states = mdp.num_states;
    mdp.features.num_actions = mdp.num_actions;
    mdp.features.dim = d;

    const auto rho = j.at("rho").get<std::vector<double>>();
    mdp.rho = Eigen::Map<const Vector>(rho.data(), rho.size());

    const auto feats = j.at("features").get<std::vector<std::vector<double>>>();
    mdp.features.table.resize(feats.size(), d);
    for (std::size_t r = 0; r < feats.size(); ++r)
        mdp.features.table.row(r) = Eigen::Map<const Vector>(feats[r].data(), d).transpose();

    for (const auto& step : j.at("mu")) {
        const auto rows = step.get<std::vector<std::vector<double>>>();
        Matrix m(rows.size(), d);
        for (std::size_t r = 0; r < rows.size(); ++r)
            m.row(r) = Eigen::Map<const Vector>(rows[r].data(), d).transpose();
        mdp.mu.push_back(std::move(m));
    }
    for (const auto& step : j.at("theta_star")) {
        const auto t = step.get<std::vector<double>>();
        mdp.theta_star.push_back(Eigen::Map<const Vector>(t.data(), t.size()));
    }
    return mdp;
}

} // namespace robrlhf
