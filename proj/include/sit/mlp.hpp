#pragma once

#include "sit/field.hpp"
#include "sit/schedule.hpp"
#include "sit/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sit {

struct MlpConfig {
    std::size_t data_dim = 1;
    std::vector<std::size_t> hidden{128, 128, 128};
    int time_frequencies = 16;
    double frequency_min = 1.0;
    double frequency_max = 1000.0;
    int classes = 0; // 0: unconditional
    int class_embed_dim = 8;

    std::size_t time_features() const { return 2 * static_cast<std::size_t>(time_frequencies); }
    std::size_t class_features() const { return classes > 0 ? static_cast<std::size_t>(class_embed_dim) : 0; }
    std::size_t input_dim() const { return data_dim + time_features() + class_features(); }
    bool operator==(const MlpConfig&) const = default;
};

/// Fully connected network f(x, t, y) with SiLU activations, sinusoidal
/// time features and a learned class-embedding table whose last row is the
/// null token. Parameters live in one flat vector.
class Mlp {
public:
    explicit Mlp(MlpConfig config);

    const MlpConfig& config() const noexcept { return config_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    /// Scaled-uniform initialisation from a seed.
    void initialize(std::uint64_t seed);

    /// Intermediate values kept for the backward pass.
    struct Tape {
        Matrix input;                 // input_dim x B
        std::vector<Matrix> pre;      // pre-activations per layer
        std::vector<Matrix> post;     // activations per hidden layer
        std::vector<int> class_rows;  // embedding row per column
    };

    /// Columns are batch entries. labels[b] < 0 selects the null token.
    Matrix forward(const Matrix& x, std::span<const double> t, std::span<const int> labels, Tape* tape = nullptr) const;

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
    void backward(const Tape& tape, const Matrix& grad_output, std::span<double> grad) const;

    Matrix time_features(std::span<const double> t) const;

private:
    struct Layer {
        std::size_t in, out, weight_offset, bias_offset;
    };

    MlpConfig config_;
    std::vector<Layer> layers_;
    std::size_t embed_offset_ = 0;
    std::vector<double> frequencies_;
    std::vector<double> params_;
};

/// A trained network presented as a velocity or score field.
class MlpField final : public FieldModel {
public:
    MlpField(Mlp network, Schedule schedule, Prediction prediction);

    Prediction prediction() const override { return prediction_; }
    const Schedule& schedule() const override { return schedule_; }
    std::size_t dim() const override { return network_.config().data_dim; }
    std::optional<Conditioning> conditioning() const override;

    using FieldModel::evaluate;
    void evaluate(std::span<const double> x, double t, ClassLabel y, std::span<double> out) const override;
    void evaluate_batch(const Samples& x, double t, ClassLabel y, Samples& out) const override;
    void evaluate_points(const Samples& x, std::span<const double> t, std::span<const int> labels,
                         Samples& out) const override;

    const Mlp& network() const noexcept { return network_; }
    Mlp& network() noexcept { return network_; }

    /// Versioned plain-text checkpoint.
    void save(std::ostream& out) const;
    void save(const std::string& path) const;
    static MlpField load(std::istream& in);
    static MlpField load(const std::string& path);

private:
    Mlp network_;
    Schedule schedule_;
    Prediction prediction_;
};

std::string prediction_name(Prediction p);
Prediction parse_prediction(std::string_view text);

} // namespace sit
