#pragma once

#include "sit/gmm.hpp"
#include "sit/schedule.hpp"
#include "sit/types.hpp"

#include <memory>
#include <optional>
#include <span>

namespace sit {

/// Label space of a conditional model. The null token is ClassLabel{}.
struct Conditioning {
    int classes;
};

/// A velocity or score field f(x, t, y) tied to one interpolant schedule.
/// Evaluation is const and safe to call concurrently.
class FieldModel {
public:
    virtual ~FieldModel() = default;

    virtual Prediction prediction() const = 0;
    virtual const Schedule& schedule() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::optional<Conditioning> conditioning() const { return std::nullopt; }

    virtual void evaluate(std::span<const double> x, double t, ClassLabel y, std::span<double> out) const = 0;

    /// Row-wise evaluation of a block of points; models with a cheaper
    /// batched path override this. Results must not depend on how rows are
    /// grouped into blocks beyond the fixed block layout used by samplers.
    virtual void evaluate_batch(const Samples& x, double t, ClassLabel y, Samples& out) const;

    /// Per-row times and labels (label < 0 is the null token).
    virtual void evaluate_points(const Samples& x, std::span<const double> t, std::span<const int> labels,
                                 Samples& out) const;

    Vector evaluate(const Vector& x, double t, ClassLabel y = {}) const;

protected:
    void check_label(ClassLabel y) const;
};

/// x_t = alpha_t x_* + sigma_t eps.
Vector interpolate(const Schedule& s, const Vector& x_star, const Vector& eps, double t);

/// s = (alpha v - alpha_dot x) / (sigma (alpha_dot sigma - alpha sigma_dot)).
/// Throws SingularityError where sigma_t = 0.
void score_from_velocity(const Schedule& s, std::span<const double> v, std::span<const double> x, double t,
                         std::span<double> out);
/// v = (alpha_dot / alpha) x - lambda sigma s. Throws SingularityError where alpha_t = 0.
void velocity_from_score(const Schedule& s, std::span<const double> score, std::span<const double> x, double t,
                         std::span<double> out);

Vector score_from_velocity(const Schedule& s, const Vector& v, const Vector& x, double t);
Vector velocity_from_score(const Schedule& s, const Vector& score, const Vector& x, double t);

/// Exact field of a Gaussian mixture. When the mixture is labelled, class k
/// is component k and the conditional field uses that component alone.
class AnalyticGmmField final : public FieldModel {
public:
    AnalyticGmmField(GaussianMixture gmm, Schedule schedule, Prediction prediction);

    Prediction prediction() const override { return prediction_; }
    const Schedule& schedule() const override { return schedule_; }
    std::size_t dim() const override { return gmm_.dim(); }
    std::optional<Conditioning> conditioning() const override;
    const GaussianMixture& mixture() const noexcept { return gmm_; }

    using FieldModel::evaluate;
    void evaluate(std::span<const double> x, double t, ClassLabel y, std::span<double> out) const override;

private:
    GaussianMixture gmm_;
    Schedule schedule_;
    Prediction prediction_;
};

/// Presents a field under the other prediction type via the score/velocity
/// map. Does not own the wrapped model.
class ConvertedField final : public FieldModel {
public:
    ConvertedField(const FieldModel& inner, Prediction target);

    Prediction prediction() const override { return target_; }
    const Schedule& schedule() const override { return inner_.schedule(); }
    std::size_t dim() const override { return inner_.dim(); }
    std::optional<Conditioning> conditioning() const override { return inner_.conditioning(); }

    using FieldModel::evaluate;
    void evaluate(std::span<const double> x, double t, ClassLabel y, std::span<double> out) const override;
    void evaluate_batch(const Samples& x, double t, ClassLabel y, Samples& out) const override;

private:
    const FieldModel& inner_;
    Prediction target_;
};

/// zeta f(x,t,y) + (1 - zeta) f(x,t,null). Requires a conditional model and a real class.
void guided_field(const FieldModel& model, double zeta, std::span<const double> x, double t, int y,
                  std::span<double> out);
Vector guided_field(const FieldModel& model, double zeta, const Vector& x, double t, int y);
void guided_field_batch(const FieldModel& model, double zeta, const Samples& x, double t, int y, Samples& out);

/// Row-wise conversions over a block.
void score_from_velocity_batch(const Schedule& s, const Samples& v, const Samples& x, double t, Samples& out);
void velocity_from_score_batch(const Schedule& s, const Samples& score, const Samples& x, double t, Samples& out);

} // namespace sit
