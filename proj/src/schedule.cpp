#include "sit/schedule.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sit {

namespace {

void check_time(double t)
{
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("time " + format_double(t) + " outside [0, 1]");
}

constexpr double kHalfPi = 0.5 * std::numbers::pi;

} // namespace

Schedule Schedule::sbdm_vp(double beta_min, double beta_max)
{
    if (!(beta_min >= 0.0) || !(beta_max >= 0.0) || beta_min + beta_max <= 0.0)
        throw DomainError("SBDM-VP requires nonnegative beta_min, beta_max, not both zero");
    Schedule s(ScheduleKind::SbdmVp);
    s.beta_min_ = beta_min;
    s.beta_max_ = beta_max;
    return s;
}

double Schedule::beta(double t) const
{
    check_time(t);
    return beta_min_ + t * (beta_max_ - beta_min_);
}

double Schedule::beta_integral(double t) const
{
    check_time(t);
    return beta_min_ * t + 0.5 * (beta_max_ - beta_min_) * t * t;
}

double Schedule::alpha(double t) const
{
    check_time(t);
    switch (kind_) {
    case ScheduleKind::Linear:
        return 1.0 - t;
    case ScheduleKind::Gvp:
        // cos(pi/2) is not exactly zero in floating point.
        return t == 1.0 ? 0.0 : std::cos(kHalfPi * t);
    case ScheduleKind::SbdmVp:
        return std::exp(-0.5 * beta_integral(t));
    }
    return 0.0;
}

double Schedule::sigma(double t) const
{
    check_time(t);
    switch (kind_) {
    case ScheduleKind::Linear:
        return t;
    case ScheduleKind::Gvp:
        return t == 1.0 ? 1.0 : std::sin(kHalfPi * t);
    case ScheduleKind::SbdmVp:
        return std::sqrt(-std::expm1(-beta_integral(t)));
    }
    return 0.0;
}

double Schedule::alpha_dot(double t) const
{
    check_time(t);
    switch (kind_) {
    case ScheduleKind::Linear:
        return -1.0;
    case ScheduleKind::Gvp:
        return -kHalfPi * (t == 1.0 ? 1.0 : std::sin(kHalfPi * t));
    case ScheduleKind::SbdmVp:
        return -0.5 * beta(t) * alpha(t);
    }
    return 0.0;
}

double Schedule::sigma_dot(double t) const
{
    check_time(t);
    switch (kind_) {
    case ScheduleKind::Linear:
        return 1.0;
    case ScheduleKind::Gvp:
        return kHalfPi * alpha(t);
    case ScheduleKind::SbdmVp: {
        const double s = sigma(t);
        if (s == 0.0)
            throw SingularityError("SBDM-VP sigma_dot is singular at t = 0");
        const double a = alpha(t);
        return beta(t) * a * a / (2.0 * s);
    }
    }
    return 0.0;
}

double Schedule::lambda(double t) const
{
    const double a = alpha(t);
    if (a == 0.0)
        throw SingularityError("lambda_t is singular where alpha_t = 0 (t = " + format_double(t) + ")");
    if (kind_ == ScheduleKind::SbdmVp) {
        // sigma_dot - alpha_dot sigma / alpha collapses to beta / (2 sigma).
        const double s = sigma(t);
        if (s == 0.0)
            throw SingularityError("SBDM-VP lambda_t is singular at t = 0");
        return beta(t) / (2.0 * s);
    }
    return sigma_dot(t) - alpha_dot(t) * sigma(t) / a;
}

double Schedule::conversion_denominator(double t) const
{
    return alpha_dot(t) * sigma(t) - alpha(t) * sigma_dot(t);
}

std::string Schedule::name() const
{
    switch (kind_) {
    case ScheduleKind::Linear:
        return "linear";
    case ScheduleKind::Gvp:
        return "gvp";
    case ScheduleKind::SbdmVp:
        if (beta_min_ == kDefaultBetaMin && beta_max_ == kDefaultBetaMax)
            return "sbdm-vp";
        return "sbdm-vp:" + format_double(beta_min_) + ":" + format_double(beta_max_);
    }
    return "?";
}

Schedule parse_schedule(std::string_view text)
{
    if (text == "linear")
        return Schedule::linear();
    if (text == "gvp")
        return Schedule::gvp();
    if (text == "sbdm-vp")
        return Schedule::sbdm_vp();
    constexpr std::string_view prefix = "sbdm-vp:";
    if (text.starts_with(prefix)) {
        const auto rest = text.substr(prefix.size());
        const auto colon = rest.find(':');
        if (colon == std::string_view::npos)
            throw ConfigError("expected sbdm-vp:<beta_min>:<beta_max>, got '" + std::string(text) + "'");
        return Schedule::sbdm_vp(parse_double(rest.substr(0, colon)), parse_double(rest.substr(colon + 1)));
    }
    throw ConfigError("unknown schedule '" + std::string(text) + "' (expected sbdm-vp, linear, gvp)");
}

} // namespace sit
