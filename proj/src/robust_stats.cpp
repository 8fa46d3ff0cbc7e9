#include "robrlhf/robust_stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace robrlhf {

namespace {

double median_scale_estimate(const Matrix& points) {
    const Eigen::Index n = points.rows(), d = points.cols();
    Vector center(d);
    std::vector<double> buffer(n);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < n; ++i)
            buffer[i] = points(i, j);
        center[j] = median(buffer);
    }
    std::vector<double> dist2(n);
    for (Eigen::Index i = 0; i < n; ++i)
        dist2[i] = (points.row(i).transpose() - center).squaredNorm();
    // For a clean d-dimensional sample the median squared distance is close
    // to d * sigma^2; crude but only a fallback when no proxy is supplied.
    return median(std::move(dist2)) / static_cast<double>(d);
}

Vector spectral_filter_mean(const Matrix& points, const RobustMeanConfig& config) {
    std::vector<int> active(points.rows());
    std::iota(active.begin(), active.end(), 0);

    const double sigma2 =
        config.sigma_bound ? *config.sigma_bound : median_scale_estimate(points);
    const double threshold = config.threshold_constant * sigma2;

    Vector mean;
    for (int round = 0; round <= config.max_rounds; ++round) {
        const Eigen::Index n = static_cast<Eigen::Index>(active.size());
        mean = Vector::Zero(points.cols());
        for (int i : active)
            mean += points.row(i).transpose();
        mean /= static_cast<double>(n);

        if (n == 1 || round == config.max_rounds)
            return mean;

        Matrix cov = Matrix::Zero(points.cols(), points.cols());
        for (int i : active) {
            const Vector c = points.row(i).transpose() - mean;
            cov += c * c.transpose();
        }
        cov /= static_cast<double>(n);

        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        const Eigen::Index top = points.cols() - 1;
        if (eig.eigenvalues()[top] <= threshold)
            return mean;

        const Vector direction = eig.eigenvectors().col(top);
        std::vector<std::pair<double, int>> scores;
        scores.reserve(active.size());
        for (int i : active) {
            const double proj = (points.row(i).transpose() - mean).dot(direction);
            scores.emplace_back(proj * proj, i);
        }
        const int remove = static_cast<int>(std::ceil(config.epsilon * n));
        std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
            return a.first > b.first || (a.first == b.first && a.second < b.second);
        });
        if (remove >= static_cast<int>(scores.size()))
            throw std::runtime_error("robust_mean: filter degenerate, all points removed");
        active.clear();
        for (std::size_t k = remove; k < scores.size(); ++k)
            active.push_back(scores[k].second);
        std::sort(active.begin(), active.end());
    }
    return mean;
}

Vector trimmed_coordinate_mean(const Matrix& points, const RobustMeanConfig& config) {
    const Eigen::Index n = points.rows(), d = points.cols();
    const int cut = static_cast<int>(std::floor(config.epsilon * n));
    if (2 * cut >= n)
        throw std::runtime_error("robust_mean: trimming removes every point");
    Vector out(d);
    std::vector<double> column(n);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < n; ++i)
            column[i] = points(i, j);
        std::sort(column.begin(), column.end());
        double total = 0.0;
        for (Eigen::Index i = cut; i < n - cut; ++i)
            total += column[i];
        out[j] = total / static_cast<double>(n - 2 * cut);
    }
    return out;
}

} // namespace

Vector robust_mean(const Matrix& points, const RobustMeanConfig& config) {
    if (config.epsilon < 0.0 || config.epsilon >= 0.5)
        throw std::invalid_argument("robust_mean: epsilon must lie in [0, 0.5)");
    if (points.rows() == 0)
        throw std::invalid_argument("robust_mean: empty sample");

    if (config.epsilon == 0.0)
        return points.colwise().mean().transpose();

    switch (config.method) {
    case RobustMeanMethod::SpectralFilter:
        if (points.rows() < std::max<Eigen::Index>(2, points.cols()))
            throw std::invalid_argument("robust_mean: spectral filter needs at least max(2, d) points");
        return spectral_filter_mean(points, config);
    case RobustMeanMethod::TrimmedCoordinate:
        return trimmed_coordinate_mean(points, config);
    }
    throw std::logic_error("robust_mean: unknown method");
}

Matrix robust_covariance(const Matrix& points, const RobustMeanConfig& config) {
    const Eigen::Index n = points.rows(), d = points.cols();
    if (n == 0)
        throw std::invalid_argument("robust_covariance: empty sample");
    Matrix flat(n, d * d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Matrix outer = points.row(i).transpose() * points.row(i);
        flat.row(i) = Eigen::Map<const Vector>(outer.data(), d * d).transpose();
    }
    const Vector mean = robust_mean(flat, config);
    Matrix cov = Eigen::Map<const Matrix>(mean.data(), d, d);
    return 0.5 * (cov + cov.transpose());
}

} // namespace robrlhf
