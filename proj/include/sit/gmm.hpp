#pragma once

#include "sit/schedule.hpp"
#include "sit/types.hpp"

#include <span>
#include <vector>

namespace sit {

/// Ground-truth data distribution sum_k w_k N(mu_k, Sigma_k).
///
/// Under the interpolant the time-t marginal stays a mixture,
///   p_t = sum_k w_k N(alpha_t mu_k, alpha_t^2 Sigma_k + sigma_t^2 I),
/// so the score, the posterior means E[x_*|x_t], E[eps|x_t] and the velocity
/// are all available in closed form. Each covariance is stored by its
/// eigendecomposition, which makes alpha^2 Sigma + sigma^2 I diagonal in a
/// fixed basis for every t.
class GaussianMixture {
public:
    struct Component {
        double weight;
        Vector mean;
        Matrix covariance;
    };

    GaussianMixture(std::vector<Component> components, bool class_per_component = false);

    /// Diagonal covariances given per component as variance vectors.
    static GaussianMixture diagonal(const std::vector<double>& weights, const std::vector<Vector>& means,
                                    const std::vector<Vector>& variances, bool class_per_component = false);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return components_.size(); }
    bool class_per_component() const noexcept { return class_per_component_; }
    double weight(std::size_t k) const { return components_[k].weight; }
    const Vector& mean(std::size_t k) const { return components_[k].mean; }
    const Matrix& covariance(std::size_t k) const { return components_[k].covariance; }
    std::vector<double> weights() const;

    /// Restriction to a single component (the class-conditional law when
    /// classes are components).
    GaussianMixture component(std::size_t k) const;

    /// Closed-form posterior moments at (x, t). `only` restricts the mixture
    /// to one component. Outputs may be empty spans when not needed.
    /// Returns log p_t(x).
    double moments(std::span<const double> x, double alpha, double sigma, std::span<double> data_mean,
                   std::span<double> noise_mean, std::span<double> score, int only = -1) const;

    /// Posterior component probabilities p_t(k | x).
    Vector responsibilities(std::span<const double> x, double alpha, double sigma) const;

    double log_density(std::span<const double> x, const Schedule& s, double t) const;

private:
    struct Eigen_ {
        std::vector<double> basis; // row-major d x d, columns are eigenvectors
        std::vector<double> values;
        bool axis_aligned;
    };

    double log_component(std::size_t k, const double* x, double alpha, double sigma, double* precision_diff,
                         double* cov_precision_diff) const;

    std::size_t dim_ = 0;
    bool class_per_component_ = false;
    std::vector<Component> components_;
    std::vector<Eigen_> eig_;
    std::vector<double> log_weights_;
};

Vector gmm_marginal_score(const GaussianMixture& gmm, const Schedule& s, const Vector& x, double t);

/// alpha_dot E[x_*|x] + sigma_dot E[eps|x] from the posterior means. Equal to
/// (alpha_dot/alpha) x - lambda sigma s(x,t) wherever alpha_t != 0, and still
/// finite at alpha_t = 0.
Vector gmm_marginal_velocity(const GaussianMixture& gmm, const Schedule& s, const Vector& x, double t);

} // namespace sit
