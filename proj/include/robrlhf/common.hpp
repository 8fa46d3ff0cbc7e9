#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace robrlhf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

/// SplitMix64 finalizer, used to derive independent seed streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                    std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ (0xd1b54a32d192ed03ULL * (tag + 1))) + index);
}

// Stream tags for hierarchical seed derivation. A (seed, tag, index) triple
// fully determines a stream, independent of how much any other stream consumed.
namespace phase {
inline constexpr std::uint64_t mdp = 1;
inline constexpr std::uint64_t dataset = 2;
inline constexpr std::uint64_t pair = 3;
inline constexpr std::uint64_t attack = 4;
inline constexpr std::uint64_t split = 5;
inline constexpr std::uint64_t oracle = 6;
inline constexpr std::uint64_t smoothing = 7;
inline constexpr std::uint64_t partition = 8;
inline constexpr std::uint64_t diagnostics = 9;
} // namespace phase

/**
 * Deterministic random generator with derived sub-streams.
 *
 * derived(tag, index) depends only on the base seed, never on how many draws
 * this instance has produced, so work can be re-ordered or parallelized
 * without changing results.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

    std::uint64_t seed() const { return seed_; }

    Rng derived(std::uint64_t tag, std::uint64_t index = 0) const {
        return Rng(derive_seed(seed_, tag, index));
    }

    /// Uniform draw in [0, 1).
    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }

    /// Standard normal draw.
    double normal() {
        return std::normal_distribution<double>(0.0, 1.0)(gen_);
    }

    Vector normal_vector(Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v[i] = normal();
        return v;
    }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0)
            throw std::invalid_argument("uniform_int: n must be positive");
        return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(gen_));
    }

    /// Index drawn from an (unnormalized, nonnegative) weight vector.
    int categorical(const Eigen::Ref<const Vector>& weights) {
        const double total = weights.sum();
        if (!(total > 0.0))
            throw std::invalid_argument("categorical: weights must have positive sum");
        double u = uniform() * total;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            u -= std::max(weights[i], 0.0);
            if (u <= 0.0)
                return static_cast<int>(i);
        }
        return static_cast<int>(weights.size() - 1);
    }

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        for (int i = 0; i < n; ++i)
            p[i] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(p[i], p[uniform_int(i + 1)]);
        return p;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

inline double sigmoid(double z) {
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(sigmoid(z)) evaluated on the numerically safe branch.
inline double log_sigmoid(double z) {
    if (z >= 0.0)
        return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

/// Euclidean projection onto the centered ball of the given radius.
template <class Derived>
Vector project_to_ball(const Eigen::MatrixBase<Derived>& x, double radius) {
    const double n = x.norm();
    if (n <= radius)
        return x;
    return x * (radius / n);
}

/// Median of a copy of the values; average of middle two for even counts.
double median(std::vector<double> values);

} // namespace robrlhf
