#include "sit/toybox.hpp"

#include "sit/errors.hpp"
#include "sit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sit {

namespace {

GaussianMixture isotropic(const std::vector<Vector>& means, double std_dev)
{
    const auto K = means.size();
    std::vector<double> weights(K, 1.0 / static_cast<double>(K));
    // Equal weights must sum to 1 exactly enough for the mixture check.
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < K; ++k)
        sum += weights[k];
    weights.back() = 1.0 - sum;
    std::vector<Vector> variances(K, Vector::Constant(means.front().size(), std_dev * std_dev));
    return GaussianMixture::diagonal(weights, means, variances, true);
}

} // namespace

std::vector<std::string> preset_names()
{
    return {"two-gauss-1d", "grid-9", "ring-8", "two-moons-gmm"};
}

GaussianMixture preset(std::string_view name)
{
    if (name == "two-gauss-1d") {
        return GaussianMixture::diagonal({0.5, 0.5}, {Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)},
                                         {Vector::Ones(1), Vector::Ones(1)}, true);
    }
    if (name == "grid-9") {
        std::vector<Vector> means;
        for (double gx : {-4.0, 0.0, 4.0})
            for (double gy : {-4.0, 0.0, 4.0})
                means.push_back((Vector(2) << gx, gy).finished());
        return isotropic(means, 0.3);
    }
    if (name == "ring-8") {
        std::vector<Vector> means;
        for (int k = 0; k < 8; ++k) {
            const double angle = 2.0 * std::numbers::pi * k / 8.0;
            means.push_back((Vector(2) << 4.0 * std::cos(angle), 4.0 * std::sin(angle)).finished());
        }
        return isotropic(means, 0.2);
    }
    if (name == "two-moons-gmm") {
        std::vector<Vector> means;
        for (int k = 0; k < 6; ++k) {
            const double angle = std::numbers::pi * k / 5.0;
            means.push_back((Vector(2) << 2.0 * std::cos(angle), 2.0 * std::sin(angle)).finished());
        }
        for (int k = 0; k < 6; ++k) {
            const double angle = std::numbers::pi * k / 5.0;
            means.push_back((Vector(2) << 2.0 - 2.0 * std::cos(angle), 1.0 - 2.0 * std::sin(angle)).finished());
        }
        return isotropic(means, 0.2);
    }
    std::string known;
    for (const auto& p : preset_names())
        known += (known.empty() ? "" : ", ") + p;
    throw ConfigError("unknown dataset preset '" + std::string(name) + "' (expected " + known + ")");
}

LabeledSamples draw(const GaussianMixture& gmm, std::size_t n, std::uint64_t seed)
{
    if (n == 0)
        throw DomainError("draw requires n > 0");
    const auto d = static_cast<Eigen::Index>(gmm.dim());
    const std::size_t K = gmm.size();

    std::vector<double> cumulative(K);
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        acc += gmm.weight(k);
        cumulative[k] = acc;
    }
    std::vector<Matrix> factors;
    for (std::size_t k = 0; k < K; ++k)
        factors.push_back(gmm.covariance(k).llt().matrixL());

    LabeledSamples out;
    out.x.resize(static_cast<Eigen::Index>(n), d);
    out.labels.resize(n);
    Rng rng(seed);
    Vector z(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        k = std::min(k, K - 1);
        while (gmm.weight(k) == 0.0 && k > 0)
            --k;
        for (Eigen::Index j = 0; j < d; ++j)
            z[j] = rng.gaussian();
        out.x.row(static_cast<Eigen::Index>(i)) = (gmm.mean(k) + factors[k] * z).transpose();
        out.labels[i] = static_cast<int>(k);
    }
    return out;
}

} // namespace sit
