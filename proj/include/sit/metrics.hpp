#pragma once

#include "sit/diffusion.hpp"
#include "sit/field.hpp"
#include "sit/gmm.hpp"
#include "sit/profile.hpp"
#include "sit/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sit {

/// V-statistic energy distance 2 E|a-b| - E|a-a'| - E|b-b'| over all pairs
/// (including i = j), so it is nonnegative and exactly zero for identical
/// multisets. One-dimensional inputs use an O(n log n) sorted route.
double energy_distance(const Samples& a, const Samples& b, Exec exec = Exec::Parallel);

namespace reference {
/// Direct triple loop, kept as the independent check of the kernels above.
double energy_distance(const Samples& a, const Samples& b);
} // namespace reference

struct PermutationTest {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> null_statistics;
    /// Upper quantile of the permutation null.
    double null_quantile(double q) const;
};

/// Two-sample permutation test on the energy distance.
PermutationTest energy_permutation_test(const Samples& a, const Samples& b, std::size_t permutations,
                                        std::uint64_t seed);

/// Two-sample Kolmogorov-Smirnov statistic per coordinate.
std::vector<double> ks_statistics(const Samples& a, const Samples& b);

/// Fraction of samples whose nearest mixture mean is component k.
std::vector<double> mode_occupancy(const Samples& x, const GaussianMixture& gmm);

struct PathLength {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Trapezoidal estimate of int E|v(x_t, t)|^2 dt over `t_grid`, with x_t
/// built from the given data points and fresh noise (one path per point).
PathLength path_length(const FieldModel& field, const Samples& data, const std::vector<double>& t_grid,
                       std::uint64_t seed);
PathLength path_length(const FieldModel& field, const GaussianMixture& data, std::size_t n_mc,
                       const std::vector<double>& t_grid, std::uint64_t seed);

/// Pointwise KL-bound integrand with optional integration cost:
///   (1/2) L / w (1 + w / (2 lambda sigma))^2 + eta w.
/// `inv_lambda_sigma` is 1 / (lambda_t sigma_t), which is finite (zero) at alpha_t = 0.
double kl_integrand(double loss, double w, double inv_lambda_sigma, double eta = 0.0);

/// Minimiser over w of kl_integrand: sqrt(L / (L c^2 + 2 eta)) with
/// c = inv_lambda_sigma / 2 (w^KL at eta = 0, w^{KL,eta} otherwise).
double kl_integrand_argmin(double loss, double inv_lambda_sigma, double eta);
/// Its minimum value, (L c)(1 + sqrt(1 + 2 eta / (L c^2))).
double kl_integrand_min(double loss, double inv_lambda_sigma, double eta);

/// 1 / (lambda_t sigma_t) = alpha / (sigma (sigma_dot alpha - alpha_dot sigma)).
double inverse_lambda_sigma(const Schedule& s, double t);

/// Trapezoidal bound (1/2) int L / w (1 + w / (2 lambda sigma))^2 dt + eta int w dt
/// over [t_lo, t_hi]; +infinity when the integrand is not finite somewhere
/// on the window (e.g. sigma_t = 0 at an edge).
double kl_bound(const LossProfile& profile, const Schedule& s, const DiffusionCoefficient& diffusion,
                std::optional<double> eta, double t_lo, double t_hi, std::size_t intervals = 1000);

/// Flat metric report: insertion-ordered `name value` pairs.
class MetricReport {
public:
    void set(const std::string& name, double value);
    void set_text(const std::string& name, const std::string& value);
    std::optional<double> get(const std::string& name) const;
    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

    void write_text(std::ostream& out) const;
    void write_json(std::ostream& out) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace sit
