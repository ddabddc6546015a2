#pragma once

#include "sit/profile.hpp"
#include "sit/schedule.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace sit {

enum class DiffusionKind { Sigma, SineSquared, KL, KLEta, Constant, Zero };

/// The reverse-SDE diffusion coefficient w_t. A free choice at sampling
/// time: the SDE keeps the interpolant marginals for any w_t >= 0.
class DiffusionCoefficient {
public:
    static DiffusionCoefficient sigma() { return DiffusionCoefficient(DiffusionKind::Sigma); }
    static DiffusionCoefficient sine_squared() { return DiffusionCoefficient(DiffusionKind::SineSquared); }
    static DiffusionCoefficient kl() { return DiffusionCoefficient(DiffusionKind::KL); }
    static DiffusionCoefficient kl_eta(double eta, std::shared_ptr<const LossProfile> profile = nullptr);
    static DiffusionCoefficient constant(double level);
    static DiffusionCoefficient zero() { return DiffusionCoefficient(DiffusionKind::Zero); }

    DiffusionKind kind() const noexcept { return kind_; }
    double eta() const noexcept { return eta_; }
    double level() const noexcept { return level_; }
    const LossProfile* profile() const noexcept { return profile_.get(); }
    bool needs_profile() const noexcept { return kind_ == DiffusionKind::KLEta; }
    DiffusionCoefficient with_profile(std::shared_ptr<const LossProfile> profile) const;

    /// Config/CLI spelling: sigma, sin2, kl, kl-eta:<eta>, const:<v>, zero.
    std::string name() const;

private:
    explicit DiffusionCoefficient(DiffusionKind kind) : kind_(kind) {}

    DiffusionKind kind_;
    double eta_ = 0.0;
    double level_ = 0.0;
    std::shared_ptr<const LossProfile> profile_;
};

DiffusionCoefficient parse_diffusion(std::string_view text);

/// w^KL = 2 (sigma_dot sigma - alpha_dot sigma^2 / alpha) = 2 lambda sigma.
double w_kl(const Schedule& s, double t);

/// Evaluates w_t. Throws SingularityError for KL where alpha_t = 0 and
/// ConfigError for KLEta without a loss profile.
double w(const DiffusionCoefficient& d, const Schedule& s, double t);

} // namespace sit
