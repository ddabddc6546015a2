#pragma once

#include <string>
#include <string_view>

namespace sit {

enum class ScheduleKind { SbdmVp, Linear, Gvp };

/// Interpolant x_t = alpha_t x_* + sigma_t eps with t=0 data and t=1 noise.
///
/// SBDM-VP uses an affine beta_t = beta_min + t (beta_max - beta_min); the
/// integral of beta is taken in closed form.
class Schedule {
public:
    static constexpr double kDefaultBetaMin = 0.1;
    static constexpr double kDefaultBetaMax = 20.0;

    static Schedule linear() { return Schedule(ScheduleKind::Linear); }
    static Schedule gvp() { return Schedule(ScheduleKind::Gvp); }
    static Schedule sbdm_vp(double beta_min = kDefaultBetaMin, double beta_max = kDefaultBetaMax);

    ScheduleKind kind() const noexcept { return kind_; }
    double beta_min() const noexcept { return beta_min_; }
    double beta_max() const noexcept { return beta_max_; }

    double alpha(double t) const;
    double sigma(double t) const;
    double alpha_dot(double t) const;
    /// Throws SingularityError for SBDM-VP at t = 0.
    double sigma_dot(double t) const;

    /// SBDM-VP only: beta_t and its integral over [0, t].
    double beta(double t) const;
    double beta_integral(double t) const;

    /// lambda_t = sigma_dot - alpha_dot sigma / alpha. Throws where alpha_t = 0.
    double lambda(double t) const;

    /// alpha_dot sigma - alpha sigma_dot, the denominator of the velocity-to-score map.
    double conversion_denominator(double t) const;

    std::string name() const;
    bool operator==(const Schedule&) const = default;

private:
    explicit Schedule(ScheduleKind kind) : kind_(kind) {}

    ScheduleKind kind_;
    double beta_min_ = kDefaultBetaMin;
    double beta_max_ = kDefaultBetaMax;
};

/// Parses `linear`, `gvp`, `sbdm-vp`, or `sbdm-vp:<beta_min>:<beta_max>`.
Schedule parse_schedule(std::string_view text);

} // namespace sit
