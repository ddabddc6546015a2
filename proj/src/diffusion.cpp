#include "sit/diffusion.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace sit {

DiffusionCoefficient DiffusionCoefficient::kl_eta(double eta, std::shared_ptr<const LossProfile> profile)
{
    if (!(eta >= 0.0))
        throw DomainError("kl-eta requires eta >= 0");
    DiffusionCoefficient d(DiffusionKind::KLEta);
    d.eta_ = eta;
    d.profile_ = std::move(profile);
    return d;
}

DiffusionCoefficient DiffusionCoefficient::constant(double level)
{
    if (!(level >= 0.0))
        throw DomainError("constant diffusion level must be >= 0");
    DiffusionCoefficient d(DiffusionKind::Constant);
    d.level_ = level;
    return d;
}

DiffusionCoefficient DiffusionCoefficient::with_profile(std::shared_ptr<const LossProfile> profile) const
{
    DiffusionCoefficient d = *this;
    d.profile_ = std::move(profile);
    return d;
}

std::string DiffusionCoefficient::name() const
{
    switch (kind_) {
    case DiffusionKind::Sigma:
        return "sigma";
    case DiffusionKind::SineSquared:
        return "sin2";
    case DiffusionKind::KL:
        return "kl";
    case DiffusionKind::KLEta:
        return "kl-eta:" + format_double(eta_);
    case DiffusionKind::Constant:
        return "const:" + format_double(level_);
    case DiffusionKind::Zero:
        return "zero";
    }
    return "?";
}

DiffusionCoefficient parse_diffusion(std::string_view text)
{
    if (text == "sigma")
        return DiffusionCoefficient::sigma();
    if (text == "sin2")
        return DiffusionCoefficient::sine_squared();
    if (text == "kl")
        return DiffusionCoefficient::kl();
    if (text == "zero")
        return DiffusionCoefficient::zero();
    try {
        if (text.starts_with("kl-eta:"))
            return DiffusionCoefficient::kl_eta(parse_double(text.substr(7)));
        if (text.starts_with("const:"))
            return DiffusionCoefficient::constant(parse_double(text.substr(6)));
    } catch (const DomainError& e) {
        throw ConfigError(std::string(text) + ": " + e.what());
    }
    throw ConfigError("unknown diffusion coefficient '" + std::string(text) +
                      "' (expected sigma, sin2, kl, kl-eta:<eta>, const:<v>, zero)");
}

double w_kl(const Schedule& s, double t)
{
    return 2.0 * s.lambda(t) * s.sigma(t);
}

namespace {

// 1 / w^KL, finite (zero) where alpha_t = 0.
double inverse_w_kl(const Schedule& s, double t)
{
    const double a = s.alpha(t);
    if (a == 0.0)
        return 0.0;
    const double wk = w_kl(s, t);
    if (wk == 0.0)
        return std::numeric_limits<double>::infinity();
    return 1.0 / wk;
}

} // namespace

double w(const DiffusionCoefficient& d, const Schedule& s, double t)
{
    switch (d.kind()) {
    case DiffusionKind::Sigma:
        return s.sigma(t);
    case DiffusionKind::SineSquared: {
        if (!(t >= 0.0 && t <= 1.0))
            throw DomainError("time " + format_double(t) + " outside [0, 1]");
        const double v = std::sin(std::numbers::pi * t);
        return v * v;
    }
    case DiffusionKind::KL:
        return w_kl(s, t);
    case DiffusionKind::KLEta: {
        if (d.profile() == nullptr || d.profile()->empty())
            throw ConfigError("diffusion '" + d.name() + "' requires a per-time loss profile L_t");
        if (d.eta() == 0.0)
            return w_kl(s, t);
        const double L = (*d.profile())(t);
        // w^KL sqrt(L / (L + 2 eta w^KL^2)) written as sqrt(L / (L / w^KL^2 + 2 eta))
        // so the alpha_t -> 0 limit sqrt(L / (2 eta)) is reached without overflow.
        const double inv = inverse_w_kl(s, t);
        if (std::isinf(inv))
            return 0.0;
        const double denom = L * inv * inv + 2.0 * d.eta();
        return std::sqrt(L / denom);
    }
    case DiffusionKind::Constant:
        return d.level();
    case DiffusionKind::Zero:
        return 0.0;
    }
    return 0.0;
}

} // namespace sit
