#pragma once

#include "sit/field.hpp"
#include "sit/gmm.hpp"
#include "sit/mlp.hpp"
#include "sit/profile.hpp"
#include "sit/rng.hpp"
#include "sit/schedule.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sit {

enum class Objective { VelocityLoss, ScoreLoss, WeightedScoreLoss };

std::string objective_name(Objective o);
Objective parse_objective(std::string_view text);
/// The prediction an objective trains.
Prediction objective_prediction(Objective o);

/// One minibatch; columns are entries. label < 0 is the null token.
struct Batch {
    Matrix x_star;
    Matrix eps;
    std::vector<double> t;
    std::vector<int> labels;
    std::size_t size() const { return t.size(); }
};

/// Per-entry pieces of weight * |scale * f(x_t) + offset|^2.
///   velocity:       scale 1,       offset -(alpha_dot x_* + sigma_dot eps), weight 1
///   score:          scale sigma_t, offset eps,                              weight 1
///   weighted score: scale sigma_t, offset eps,                              weight lambda_t^2
struct LossTerms {
    Samples x_t; // one row per entry
    std::vector<double> scale;
    Matrix offset; // d x B
    std::vector<double> weight;
};

LossTerms loss_terms(Objective objective, const Schedule& s, const Batch& batch);

/// Per-entry loss values of any field under an objective.
std::vector<double> per_sample_loss(const FieldModel& model, Objective objective, const Batch& batch);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Batch mean of the objective and its parameter gradient by reverse-mode
/// accumulation through the network.
LossGradient loss_velocity(const MlpField& model, const Batch& batch);
LossGradient loss_score(const MlpField& model, const Batch& batch);
LossGradient loss_score_weighted(const MlpField& model, const Batch& batch);
LossGradient loss_and_gradient(const MlpField& model, Objective objective, const Batch& batch);

/// Training data: an exact mixture or a fixed sample table.
struct TrainingData {
    std::optional<GaussianMixture> mixture;
    Samples samples;
    std::vector<int> labels;

    std::size_t dim() const;
    int classes() const;
    static TrainingData from_mixture(GaussianMixture gmm);
    static TrainingData from_samples(Samples x, std::vector<int> labels = {});
};

struct TrainConfig {
    Objective objective = Objective::VelocityLoss;
    Schedule schedule = Schedule::linear();
    MlpConfig network;
    std::size_t batch = 256;
    std::size_t steps = 5000;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double label_dropout = 0.1;
    bool conditional = false;
    std::optional<double> t_lo; // defaults depend on schedule and objective
    std::optional<double> t_hi;
    std::size_t profile_bins = 50;
    std::size_t profile_draws = 2000;
    std::uint64_t seed = 0;
};

/// Training-time window [t_lo, t_hi] after defaults.
std::pair<double, double> training_window(const TrainConfig& config);

/// Draws a batch: data, eps ~ N(0, I), t ~ U[t_lo, t_hi], labels with dropout.
Batch draw_batch(const TrainingData& data, std::size_t size, double t_lo, double t_hi, double dropout, bool conditional,
                 Rng& rng);

/// Binned Monte-Carlo estimate of the per-time velocity loss L_t. Score
/// models are mapped to velocity first.
LossProfile estimate_loss_profile(const FieldModel& model, const TrainingData& data, double t_lo, double t_hi,
                                  std::size_t bins, std::size_t draws, std::uint64_t seed);

struct TrainResult {
    MlpField model;
    LossProfile profile;
    std::vector<double> curve; // batch loss per step
};

/// Adam at a constant rate over `steps` minibatches. Throws NumericalError
/// on a non-finite loss.
TrainResult train(const TrainConfig& config, const TrainingData& data);

} // namespace sit
