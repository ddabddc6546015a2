#pragma once

#include "sit/learner.hpp"
#include "sit/sampler.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sit {

/// One structured plain-text (JSON) file driving every subcommand. Enum
/// values are kept in their config spelling and validated on parse.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir; // empty: $SIT_OUTPUT_ROOT, else "."

    // Data: exactly one of preset / file.
    std::string dataset_preset = "two-gauss-1d";
    std::string dataset_file;

    std::string schedule = "linear";
    std::string prediction = "velocity";
    std::string objective = "velocity";

    struct Train {
        std::size_t steps = 5000;
        std::size_t batch = 256;
        double learning_rate = 1e-4;
        double label_dropout = 0.1;
        bool conditional = false;
        std::vector<std::size_t> hidden{128, 128, 128};
        std::optional<double> t_lo;
        std::optional<double> t_hi;
        std::size_t profile_bins = 50;
        std::size_t profile_draws = 2000;
        bool operator==(const Train&) const = default;
    } train;

    // Model used by sample / sweep: a checkpoint, else the analytic field
    // of the dataset preset.
    std::string checkpoint;
    std::string profile; // L_t table for kl-eta and kl-bound

    struct Sampler {
        std::string kind = "heun";
        int steps = 250;
        std::optional<double> t_start; // unset: default window
        std::optional<double> t_end;
        std::optional<double> last_step_to;
        bool no_last_step = false;
        std::string diffusion = "sigma";
        std::optional<double> zeta;
        std::optional<int> label;
        std::size_t n = 2000;
        bool operator==(const Sampler&) const = default;
    } sampler;

    struct Eval {
        std::vector<std::string> metrics{"energy", "ks", "occupancy"};
        std::size_t reference_n = 2000;
        std::size_t permutations = 200;
        std::size_t path_n = 10000;
        std::size_t path_points = 201;
        bool operator==(const Eval&) const = default;
    } eval;

    struct Sweep {
        std::vector<std::string> schedules;   // empty: {schedule}
        std::vector<std::string> predictions; // empty: {prediction}
        std::vector<std::string> samplers{"heun", "em"};
        std::vector<std::string> diffusions{"sigma"};
        std::vector<int> nfe{16, 32, 64, 128, 250};
        std::size_t n = 2000;
        bool operator==(const Sweep&) const = default;
    } sweep;

    bool operator==(const ExperimentConfig&) const = default;

    /// Throws ConfigError on unknown enum values or inconsistent fields.
    void validate() const;
    /// Output root after the environment fallback.
    std::string output_root() const;

    TrainConfig train_config() const;
    /// Sampler spec for the given model parameterisation (window defaults
    /// resolved here).
    SamplerSpec sampler_spec(const Schedule& s, Prediction p) const;
};

std::string to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

} // namespace sit
