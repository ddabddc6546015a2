#include "sit/field.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"

#include <string>
#include <vector>

namespace sit {

namespace {

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

} // namespace

Vector FieldModel::evaluate(const Vector& x, double t, ClassLabel y) const
{
    Vector out(x.size());
    evaluate(view(x), t, y, view(out));
    return out;
}

void FieldModel::evaluate_batch(const Samples& x, double t, ClassLabel y, Samples& out) const
{
    const auto d = static_cast<std::size_t>(x.cols());
    out.resize(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        evaluate(std::span<const double>(x.row(r).data(), d), t, y, std::span<double>(out.row(r).data(), d));
}

void FieldModel::evaluate_points(const Samples& x, std::span<const double> t, std::span<const int> labels,
                                 Samples& out) const
{
    const auto d = static_cast<std::size_t>(x.cols());
    out.resize(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const auto i = static_cast<std::size_t>(r);
        const ClassLabel y = labels.empty() || labels[i] < 0 ? ClassLabel{} : ClassLabel{labels[i]};
        evaluate(std::span<const double>(x.row(r).data(), d), t[i], y, std::span<double>(out.row(r).data(), d));
    }
}

void FieldModel::check_label(ClassLabel y) const
{
    if (!y)
        return;
    const auto c = conditioning();
    if (!c)
        throw ConfigError("class label given to an unconditional model");
    if (*y < 0 || *y >= c->classes)
        throw DomainError("class label " + std::to_string(*y) + " out of range [0, " + std::to_string(c->classes) + ")");
}

Vector interpolate(const Schedule& s, const Vector& x_star, const Vector& eps, double t)
{
    if (x_star.size() != eps.size())
        throw DomainError("interpolate: x_star and eps differ in dimension");
    return s.alpha(t) * x_star + s.sigma(t) * eps;
}

void score_from_velocity(const Schedule& s, std::span<const double> v, std::span<const double> x, double t,
                         std::span<double> out)
{
    const double sig = s.sigma(t);
    if (sig == 0.0)
        throw SingularityError("score from velocity is singular where sigma_t = 0 (t = " + format_double(t) + ")");
    const double a = s.alpha(t);
    const double ad = s.alpha_dot(t);
    const double denom = sig * s.conversion_denominator(t);
    if (denom == 0.0)
        throw SingularityError("score from velocity: zero denominator at t = " + format_double(t));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (a * v[i] - ad * x[i]) / denom;
}

void velocity_from_score(const Schedule& s, std::span<const double> score, std::span<const double> x, double t,
                         std::span<double> out)
{
    const double a = s.alpha(t);
    if (a == 0.0)
        throw SingularityError("velocity from score is singular where alpha_t = 0 (t = " + format_double(t) + ")");
    const double drift = s.alpha_dot(t) / a;
    const double scale = s.lambda(t) * s.sigma(t);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = drift * x[i] - scale * score[i];
}

Vector score_from_velocity(const Schedule& s, const Vector& v, const Vector& x, double t)
{
    Vector out(x.size());
    score_from_velocity(s, view(v), view(x), t, view(out));
    return out;
}

Vector velocity_from_score(const Schedule& s, const Vector& score, const Vector& x, double t)
{
    Vector out(x.size());
    velocity_from_score(s, view(score), view(x), t, view(out));
    return out;
}

AnalyticGmmField::AnalyticGmmField(GaussianMixture gmm, Schedule schedule, Prediction prediction)
    : gmm_(std::move(gmm)), schedule_(schedule), prediction_(prediction)
{
}

std::optional<Conditioning> AnalyticGmmField::conditioning() const
{
    if (!gmm_.class_per_component())
        return std::nullopt;
    return Conditioning{static_cast<int>(gmm_.size())};
}

void AnalyticGmmField::evaluate(std::span<const double> x, double t, ClassLabel y, std::span<double> out) const
{
    check_label(y);
    const int only = y ? *y : -1;
    const double a = schedule_.alpha(t);
    const double s = schedule_.sigma(t);
    if (prediction_ == Prediction::Score) {
        gmm_.moments(x, a, s, {}, {}, out, only);
        return;
    }
    thread_local std::vector<double> data_mean, noise_mean;
    data_mean.resize(x.size());
    noise_mean.resize(x.size());
    gmm_.moments(x, a, s, data_mean, noise_mean, {}, only);
    const double ad = schedule_.alpha_dot(t);
    const double sd = schedule_.sigma_dot(t);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = ad * data_mean[i] + sd * noise_mean[i];
}

ConvertedField::ConvertedField(const FieldModel& inner, Prediction target) : inner_(inner), target_(target) {}

void ConvertedField::evaluate(std::span<const double> x, double t, ClassLabel y, std::span<double> out) const
{
    if (inner_.prediction() == target_) {
        inner_.evaluate(x, t, y, out);
        return;
    }
    thread_local std::vector<double> native;
    native.resize(x.size());
    inner_.evaluate(x, t, y, native);
    if (target_ == Prediction::Score)
        score_from_velocity(inner_.schedule(), native, x, t, out);
    else
        velocity_from_score(inner_.schedule(), native, x, t, out);
}

void ConvertedField::evaluate_batch(const Samples& x, double t, ClassLabel y, Samples& out) const
{
    if (inner_.prediction() == target_) {
        inner_.evaluate_batch(x, t, y, out);
        return;
    }
    Samples native;
    inner_.evaluate_batch(x, t, y, native);
    if (target_ == Prediction::Score)
        score_from_velocity_batch(inner_.schedule(), native, x, t, out);
    else
        velocity_from_score_batch(inner_.schedule(), native, x, t, out);
}

void score_from_velocity_batch(const Schedule& s, const Samples& v, const Samples& x, double t, Samples& out)
{
    const double sig = s.sigma(t);
    if (sig == 0.0)
        throw SingularityError("score from velocity is singular where sigma_t = 0 (t = " + format_double(t) + ")");
    const double a = s.alpha(t);
    const double ad = s.alpha_dot(t);
    const double denom = sig * s.conversion_denominator(t);
    if (denom == 0.0)
        throw SingularityError("score from velocity: zero denominator at t = " + format_double(t));
    out.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        out.data()[i] = (a * v.data()[i] - ad * x.data()[i]) / denom;
}

void velocity_from_score_batch(const Schedule& s, const Samples& score, const Samples& x, double t, Samples& out)
{
    const double a = s.alpha(t);
    if (a == 0.0)
        throw SingularityError("velocity from score is singular where alpha_t = 0 (t = " + format_double(t) + ")");
    const double drift = s.alpha_dot(t) / a;
    const double scale = s.lambda(t) * s.sigma(t);
    out.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        out.data()[i] = drift * x.data()[i] - scale * score.data()[i];
}

void guided_field_batch(const FieldModel& model, double zeta, const Samples& x, double t, int y, Samples& out)
{
    if (!model.conditioning())
        throw ConfigError("guidance requires a class-conditional model");
    if (!(zeta >= 0.0))
        throw DomainError("guidance scale must be >= 0");
    Samples uncond;
    model.evaluate_batch(x, t, ClassLabel{y}, out);
    model.evaluate_batch(x, t, ClassLabel{}, uncond);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out.data()[i] = zeta * out.data()[i] + (1.0 - zeta) * uncond.data()[i];
}

void guided_field(const FieldModel& model, double zeta, std::span<const double> x, double t, int y,
                  std::span<double> out)
{
    if (!model.conditioning())
        throw ConfigError("guidance requires a class-conditional model");
    if (!(zeta >= 0.0))
        throw DomainError("guidance scale must be >= 0");
    thread_local std::vector<double> uncond;
    uncond.resize(x.size());
    model.evaluate(x, t, ClassLabel{y}, out);
    model.evaluate(x, t, ClassLabel{}, uncond);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = zeta * out[i] + (1.0 - zeta) * uncond[i];
}

Vector guided_field(const FieldModel& model, double zeta, const Vector& x, double t, int y)
{
    Vector out(x.size());
    guided_field(model, zeta, view(x), t, y, view(out));
    return out;
}

} // namespace sit
