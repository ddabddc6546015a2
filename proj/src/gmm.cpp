#include "sit/gmm.hpp"

#include "sit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace sit {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct Scratch {
    std::vector<double> log_terms;
    std::vector<double> precision_diff;
    std::vector<double> cov_precision_diff;
    void reserve(std::size_t k, std::size_t d)
    {
        if (log_terms.size() < k)
            log_terms.resize(k);
        if (precision_diff.size() < k * d) {
            precision_diff.resize(k * d);
            cov_precision_diff.resize(k * d);
        }
    }
};

Scratch& scratch()
{
    thread_local Scratch s;
    return s;
}

} // namespace

GaussianMixture::GaussianMixture(std::vector<Component> components, bool class_per_component)
    : class_per_component_(class_per_component), components_(std::move(components))
{
    if (components_.empty())
        throw ConfigError("Gaussian mixture needs at least one component");
    dim_ = static_cast<std::size_t>(components_.front().mean.size());
    if (dim_ == 0)
        throw ConfigError("Gaussian mixture dimension must be positive");

    double total = 0.0;
    for (const auto& c : components_) {
        if (static_cast<std::size_t>(c.mean.size()) != dim_ || static_cast<std::size_t>(c.covariance.rows()) != dim_ ||
            static_cast<std::size_t>(c.covariance.cols()) != dim_)
            throw ConfigError("Gaussian mixture components disagree on dimension");
        if (!(c.weight >= 0.0))
            throw ConfigError("mixture weights must be nonnegative");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("mixture weights must sum to 1");

    for (const auto& c : components_) {
        if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + c.covariance.cwiseAbs().maxCoeff()))
            throw ConfigError("mixture covariance is not symmetric");
        Eigen_ e;
        const bool diagonal = (c.covariance - Matrix(c.covariance.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
        e.axis_aligned = diagonal;
        if (diagonal) {
            e.values.resize(dim_);
            for (std::size_t i = 0; i < dim_; ++i)
                e.values[i] = c.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
        } else {
            Eigen::SelfAdjointEigenSolver<Matrix> solver(c.covariance);
            e.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + dim_);
            e.basis.resize(dim_ * dim_);
            for (std::size_t i = 0; i < dim_; ++i)
                for (std::size_t j = 0; j < dim_; ++j)
                    e.basis[i * dim_ + j] = solver.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        for (double v : e.values)
            if (!(v > 0.0))
                throw ConfigError("mixture covariance is not positive definite");
        eig_.push_back(std::move(e));
        log_weights_.push_back(c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity());
    }
}

GaussianMixture GaussianMixture::diagonal(const std::vector<double>& weights, const std::vector<Vector>& means,
                                          const std::vector<Vector>& variances, bool class_per_component)
{
    if (weights.size() != means.size() || weights.size() != variances.size())
        throw ConfigError("mixture weights, means and variances differ in length");
    std::vector<Component> comps;
    for (std::size_t k = 0; k < weights.size(); ++k)
        comps.push_back({weights[k], means[k], Matrix(variances[k].asDiagonal())});
    return GaussianMixture(std::move(comps), class_per_component);
}

std::vector<double> GaussianMixture::weights() const
{
    std::vector<double> w;
    for (const auto& c : components_)
        w.push_back(c.weight);
    return w;
}

GaussianMixture GaussianMixture::component(std::size_t k) const
{
    Component c = components_.at(k);
    c.weight = 1.0;
    return GaussianMixture({c}, class_per_component_);
}

double GaussianMixture::log_component(std::size_t k, const double* x, double alpha, double sigma,
                                      double* precision_diff, double* cov_precision_diff) const
{
    const auto& e = eig_[k];
    const auto& mu = components_[k].mean;
    const std::size_t d = dim_;
    const double a2 = alpha * alpha;
    const double s2 = sigma * sigma;

    double quad = 0.0;
    double logdet = 0.0;
    if (e.axis_aligned) {
        for (std::size_t i = 0; i < d; ++i) {
            const double c = a2 * e.values[i] + s2;
            const double diff = x[i] - alpha * mu[static_cast<Eigen::Index>(i)];
            const double z = diff / c;
            quad += diff * z;
            logdet += std::log(c);
            precision_diff[i] = z;
            cov_precision_diff[i] = e.values[i] * z;
        }
    } else {
        // z = U^T diff in the eigenbasis; C^-1 diff = U (z / c)
        for (std::size_t i = 0; i < d; ++i) {
            precision_diff[i] = 0.0;
            cov_precision_diff[i] = 0.0;
        }
        for (std::size_t j = 0; j < d; ++j) {
            double z = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                z += e.basis[i * d + j] * (x[i] - alpha * mu[static_cast<Eigen::Index>(i)]);
            const double c = a2 * e.values[j] + s2;
            quad += z * z / c;
            logdet += std::log(c);
            for (std::size_t i = 0; i < d; ++i) {
                precision_diff[i] += e.basis[i * d + j] * (z / c);
                cov_precision_diff[i] += e.basis[i * d + j] * (e.values[j] * z / c);
            }
        }
    }
    return log_weights_[k] - 0.5 * (quad + logdet + static_cast<double>(d) * kLog2Pi);
}

double GaussianMixture::moments(std::span<const double> x, double alpha, double sigma, std::span<double> data_mean,
                                std::span<double> noise_mean, std::span<double> score, int only) const
{
    const std::size_t d = dim_;
    const std::size_t K = components_.size();
    if (x.size() != d)
        throw DomainError("point dimension does not match mixture dimension");
    if (alpha * alpha + sigma * sigma <= 0.0)
        throw SingularityError("alpha_t^2 + sigma_t^2 must be positive");

    Scratch& sc = scratch();
    sc.reserve(K, d);

    std::size_t first = 0;
    std::size_t last = K;
    if (only >= 0) {
        if (static_cast<std::size_t>(only) >= K)
            throw DomainError("component index out of range");
        first = static_cast<std::size_t>(only);
        last = first + 1;
    }

    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t k = first; k < last; ++k) {
        double lk = log_component(k, x.data(), alpha, sigma, &sc.precision_diff[k * d], &sc.cov_precision_diff[k * d]);
        if (only >= 0)
            lk -= log_weights_[k];
        sc.log_terms[k] = lk;
        max_log = std::max(max_log, lk);
    }
    double norm = 0.0;
    for (std::size_t k = first; k < last; ++k)
        norm += std::exp(sc.log_terms[k] - max_log);
    const double log_p = max_log + std::log(norm);

    for (auto* out : {&data_mean, &noise_mean, &score})
        std::fill(out->begin(), out->end(), 0.0);

    for (std::size_t k = first; k < last; ++k) {
        const double r = std::exp(sc.log_terms[k] - log_p);
        if (r == 0.0)
            continue;
        const double* pd = &sc.precision_diff[k * d];
        const double* cpd = &sc.cov_precision_diff[k * d];
        const auto& mu = components_[k].mean;
        if (!score.empty())
            for (std::size_t i = 0; i < d; ++i)
                score[i] -= r * pd[i];
        if (!noise_mean.empty())
            for (std::size_t i = 0; i < d; ++i)
                noise_mean[i] += r * sigma * pd[i];
        if (!data_mean.empty())
            for (std::size_t i = 0; i < d; ++i)
                data_mean[i] += r * (mu[static_cast<Eigen::Index>(i)] + alpha * cpd[i]);
    }
    return log_p;
}

Vector GaussianMixture::responsibilities(std::span<const double> x, double alpha, double sigma) const
{
    const std::size_t d = dim_;
    const std::size_t K = components_.size();
    if (x.size() != d)
        throw DomainError("point dimension does not match mixture dimension");
    std::vector<double> pd(d), cpd(d);
    Vector logs(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k)
        logs[static_cast<Eigen::Index>(k)] = log_component(k, x.data(), alpha, sigma, pd.data(), cpd.data());
    const double m = logs.maxCoeff();
    Vector r = (logs.array() - m).exp();
    return r / r.sum();
}

double GaussianMixture::log_density(std::span<const double> x, const Schedule& s, double t) const
{
    return moments(x, s.alpha(t), s.sigma(t), {}, {}, {});
}

Vector gmm_marginal_score(const GaussianMixture& gmm, const Schedule& s, const Vector& x, double t)
{
    Vector out(x.size());
    gmm.moments({x.data(), static_cast<std::size_t>(x.size())}, s.alpha(t), s.sigma(t), {}, {},
                {out.data(), static_cast<std::size_t>(out.size())});
    return out;
}

Vector gmm_marginal_velocity(const GaussianMixture& gmm, const Schedule& s, const Vector& x, double t)
{
    const auto d = static_cast<std::size_t>(x.size());
    Vector data_mean(x.size()), noise_mean(x.size());
    gmm.moments({x.data(), d}, s.alpha(t), s.sigma(t), {data_mean.data(), d}, {noise_mean.data(), d}, {});
    return s.alpha_dot(t) * data_mean + s.sigma_dot(t) * noise_mean;
}

} // namespace sit
