#include "sit/learner.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"
#include "sit/toybox.hpp"

#include <cmath>
#include <string>

namespace sit {

std::string objective_name(Objective o)
{
    switch (o) {
    case Objective::VelocityLoss:
        return "velocity";
    case Objective::ScoreLoss:
        return "score";
    case Objective::WeightedScoreLoss:
        return "score-weighted";
    }
    return "?";
}

Objective parse_objective(std::string_view text)
{
    if (text == "velocity")
        return Objective::VelocityLoss;
    if (text == "score")
        return Objective::ScoreLoss;
    if (text == "score-weighted")
        return Objective::WeightedScoreLoss;
    throw ConfigError("unknown objective '" + std::string(text) + "' (expected velocity, score, score-weighted)");
}

Prediction objective_prediction(Objective o)
{
    return o == Objective::VelocityLoss ? Prediction::Velocity : Prediction::Score;
}

LossTerms loss_terms(Objective objective, const Schedule& s, const Batch& batch)
{
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto d = batch.x_star.rows();
    if (batch.x_star.cols() != B || batch.eps.cols() != B || batch.eps.rows() != d)
        throw DomainError("batch shape mismatch");

    LossTerms terms;
    terms.x_t.resize(B, d);
    terms.offset.resize(d, B);
    terms.scale.resize(static_cast<std::size_t>(B));
    terms.weight.resize(static_cast<std::size_t>(B));
    for (Eigen::Index b = 0; b < B; ++b) {
        const double t = batch.t[static_cast<std::size_t>(b)];
        const double a = s.alpha(t);
        const double sig = s.sigma(t);
        terms.x_t.row(b) = (a * batch.x_star.col(b) + sig * batch.eps.col(b)).transpose();
        switch (objective) {
        case Objective::VelocityLoss:
            terms.scale[static_cast<std::size_t>(b)] = 1.0;
            terms.offset.col(b) = -(s.alpha_dot(t) * batch.x_star.col(b) + s.sigma_dot(t) * batch.eps.col(b));
            terms.weight[static_cast<std::size_t>(b)] = 1.0;
            break;
        case Objective::ScoreLoss:
        case Objective::WeightedScoreLoss: {
            if (sig == 0.0)
                throw SingularityError("score objective is singular where sigma_t = 0 (t = " + format_double(t) + ")");
            terms.scale[static_cast<std::size_t>(b)] = sig;
            terms.offset.col(b) = batch.eps.col(b);
            double weight = 1.0;
            if (objective == Objective::WeightedScoreLoss) {
                const double lam = s.lambda(t);
                weight = lam * lam;
            }
            terms.weight[static_cast<std::size_t>(b)] = weight;
            break;
        }
        }
    }
    return terms;
}

std::vector<double> per_sample_loss(const FieldModel& model, Objective objective, const Batch& batch)
{
    if (model.prediction() != objective_prediction(objective))
        throw ConfigError("objective " + objective_name(objective) + " needs a " +
                          prediction_name(objective_prediction(objective)) + " model");
    const LossTerms terms = loss_terms(objective, model.schedule(), batch);
    Samples out;
    model.evaluate_points(terms.x_t, batch.t, batch.labels, out);
    std::vector<double> losses(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto r = static_cast<Eigen::Index>(b);
        const Vector residual = terms.scale[b] * out.row(r).transpose() + terms.offset.col(r);
        losses[b] = terms.weight[b] * residual.squaredNorm();
    }
    return losses;
}

LossGradient loss_and_gradient(const MlpField& model, Objective objective, const Batch& batch)
{
    if (model.prediction() != objective_prediction(objective))
        throw ConfigError("objective " + objective_name(objective) + " needs a " +
                          prediction_name(objective_prediction(objective)) + " model");
    const Mlp& net = model.network();
    const LossTerms terms = loss_terms(objective, model.schedule(), batch);
    std::vector<int> labels = batch.labels;
    if (net.config().classes > 0)
        labels.resize(batch.size(), -1);

    Mlp::Tape tape;
    const Matrix out = net.forward(terms.x_t.transpose(), batch.t, labels, &tape);
    const auto B = static_cast<Eigen::Index>(batch.size());
    Matrix grad_out(out.rows(), B);
    LossGradient result;
    double total = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto i = static_cast<std::size_t>(b);
        const Vector residual = terms.scale[i] * out.col(b) + terms.offset.col(b);
        total += terms.weight[i] * residual.squaredNorm();
        grad_out.col(b) = (2.0 * terms.weight[i] * terms.scale[i] / static_cast<double>(B)) * residual;
    }
    result.loss = total / static_cast<double>(B);
    result.gradient.assign(net.parameter_count(), 0.0);
    net.backward(tape, grad_out, result.gradient);
    return result;
}

LossGradient loss_velocity(const MlpField& model, const Batch& batch)
{
    return loss_and_gradient(model, Objective::VelocityLoss, batch);
}

LossGradient loss_score(const MlpField& model, const Batch& batch)
{
    return loss_and_gradient(model, Objective::ScoreLoss, batch);
}

LossGradient loss_score_weighted(const MlpField& model, const Batch& batch)
{
    return loss_and_gradient(model, Objective::WeightedScoreLoss, batch);
}

std::size_t TrainingData::dim() const
{
    return mixture ? mixture->dim() : static_cast<std::size_t>(samples.cols());
}

int TrainingData::classes() const
{
    if (mixture)
        return mixture->class_per_component() ? static_cast<int>(mixture->size()) : 0;
    int top = -1;
    for (int l : labels)
        top = std::max(top, l);
    return top + 1;
}

TrainingData TrainingData::from_mixture(GaussianMixture gmm)
{
    TrainingData d;
    d.mixture = std::move(gmm);
    return d;
}

TrainingData TrainingData::from_samples(Samples x, std::vector<int> labels)
{
    if (x.rows() == 0)
        throw ConfigError("training sample table is empty");
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(x.rows()))
        throw ConfigError("training labels do not match sample count");
    TrainingData d;
    d.samples = std::move(x);
    d.labels = std::move(labels);
    return d;
}

std::pair<double, double> training_window(const TrainConfig& config)
{
    double lo = 0.0;
    double hi = 1.0;
    if (config.schedule.kind() == ScheduleKind::SbdmVp || config.objective != Objective::VelocityLoss)
        lo = 1e-5;
    if (config.objective == Objective::WeightedScoreLoss && config.schedule.kind() != ScheduleKind::SbdmVp)
        hi = 1.0 - 1e-5;
    lo = config.t_lo.value_or(lo);
    hi = config.t_hi.value_or(hi);
    if (!(lo >= 0.0 && hi <= 1.0 && lo < hi))
        throw ConfigError("training window requires 0 <= t_lo < t_hi <= 1");
    return {lo, hi};
}

Batch draw_batch(const TrainingData& data, std::size_t size, double t_lo, double t_hi, double dropout, bool conditional,
                 Rng& rng)
{
    const auto d = static_cast<Eigen::Index>(data.dim());
    const auto B = static_cast<Eigen::Index>(size);
    Batch batch;
    batch.x_star.resize(d, B);
    batch.eps.resize(d, B);
    batch.t.resize(size);
    batch.labels.assign(conditional ? size : 0, -1);

    std::vector<int> labels(size, -1);
    if (data.mixture) {
        const LabeledSamples drawn = draw(*data.mixture, size, rng.next());
        batch.x_star = drawn.x.transpose();
        labels = drawn.labels;
    } else {
        std::uniform_int_distribution<Eigen::Index> pick(0, data.samples.rows() - 1);
        for (Eigen::Index b = 0; b < B; ++b) {
            const Eigen::Index r = pick(rng.engine());
            batch.x_star.col(b) = data.samples.row(r).transpose();
            if (!data.labels.empty())
                labels[static_cast<std::size_t>(b)] = data.labels[static_cast<std::size_t>(r)];
        }
    }
    for (Eigen::Index b = 0; b < B; ++b) {
        for (Eigen::Index j = 0; j < d; ++j)
            batch.eps(j, b) = rng.gaussian();
        batch.t[static_cast<std::size_t>(b)] = rng.uniform(t_lo, t_hi);
        if (conditional) {
            const bool drop = rng.uniform() < dropout;
            batch.labels[static_cast<std::size_t>(b)] = drop ? -1 : labels[static_cast<std::size_t>(b)];
        }
    }
    return batch;
}

LossProfile estimate_loss_profile(const FieldModel& model, const TrainingData& data, double t_lo, double t_hi,
                                  std::size_t bins, std::size_t draws, std::uint64_t seed)
{
    if (bins == 0 || draws == 0)
        throw ConfigError("loss profile needs at least one bin and one draw");
    const bool conditional = model.conditioning().has_value();
    std::vector<double> edges(bins + 1), values(bins);
    for (std::size_t k = 0; k <= bins; ++k)
        edges[k] = t_lo + (t_hi - t_lo) * static_cast<double>(k) / static_cast<double>(bins);
    edges.back() = t_hi;

    const Schedule& s = model.schedule();
    for (std::size_t k = 0; k < bins; ++k) {
        Rng rng(seed, k);
        Batch batch = draw_batch(data, draws, edges[k], edges[k + 1], 0.0, conditional, rng);
        const LossTerms terms = loss_terms(Objective::VelocityLoss, s, batch);
        Samples out;
        model.evaluate_points(terms.x_t, batch.t, batch.labels, out);
        double total = 0.0;
        const auto d = static_cast<std::size_t>(out.cols());
        std::vector<double> v(d);
        for (std::size_t b = 0; b < draws; ++b) {
            const auto r = static_cast<Eigen::Index>(b);
            std::span<const double> row(out.row(r).data(), d);
            if (model.prediction() == Prediction::Score)
                velocity_from_score(s, row, std::span<const double>(terms.x_t.row(r).data(), d), batch.t[b], v);
            else
                std::copy(row.begin(), row.end(), v.begin());
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = v[j] + terms.offset(static_cast<Eigen::Index>(j), r);
                sq += diff * diff;
            }
            total += sq;
        }
        values[k] = total / static_cast<double>(draws);
    }
    return LossProfile(std::move(edges), std::move(values));
}

TrainResult train(const TrainConfig& config, const TrainingData& data)
{
    if (config.batch == 0 || config.steps == 0)
        throw ConfigError("training needs positive batch size and step count");
    if (!(config.learning_rate > 0.0))
        throw ConfigError("learning rate must be positive");
    if (!(config.label_dropout >= 0.0 && config.label_dropout <= 1.0))
        throw ConfigError("label dropout must lie in [0, 1]");
    const auto [t_lo, t_hi] = training_window(config);

    MlpConfig net_config = config.network;
    net_config.data_dim = data.dim();
    net_config.classes = config.conditional ? data.classes() : 0;
    if (config.conditional && net_config.classes <= 0)
        throw ConfigError("conditional training needs labelled data");

    Mlp network(net_config);
    network.initialize(derive_seed(config.seed, 1));
    MlpField model(std::move(network), config.schedule, objective_prediction(config.objective));

    const std::size_t P = model.network().parameter_count();
    std::vector<double> m(P, 0.0), v(P, 0.0);
    Rng rng(derive_seed(config.seed, 2));
    std::vector<double> curve;
    curve.reserve(config.steps);
    const double bins = 50.0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        const Batch batch = draw_batch(data, config.batch, t_lo, t_hi, config.label_dropout, config.conditional, rng);
        LossGradient lg = loss_and_gradient(model, config.objective, batch);
        if (!std::isfinite(lg.loss)) {
            const auto per = per_sample_loss(model, config.objective, batch);
            double t_bad = batch.t.front();
            for (std::size_t b = 0; b < per.size(); ++b)
                if (!std::isfinite(per[b])) {
                    t_bad = batch.t[b];
                    break;
                }
            const auto t_bin = static_cast<int>(std::min(bins - 1.0, std::floor((t_bad - t_lo) / (t_hi - t_lo) * bins)));
            throw NumericalError("non-finite training loss at step " + std::to_string(step) + ", t-bin " +
                                     std::to_string(t_bin) + " (t = " + format_double(t_bad) + ")",
                                 step);
        }
        curve.push_back(lg.loss);

        const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step + 1));
        const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step + 1));
        auto params = model.network().parameters();
        for (std::size_t i = 0; i < P; ++i) {
            const double g = lg.gradient[i];
            m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g;
            v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g * g;
            params[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.adam_eps);
        }
    }

    LossProfile profile = estimate_loss_profile(model, data, t_lo, t_hi, config.profile_bins, config.profile_draws,
                                                derive_seed(config.seed, 3));
    return TrainResult{std::move(model), std::move(profile), std::move(curve)};
}

} // namespace sit
