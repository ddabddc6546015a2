#pragma once

#include "sit/config.hpp"
#include "sit/field.hpp"
#include "sit/learner.hpp"
#include "sit/metrics.hpp"

#include <iosfwd>
#include <memory>
#include <string>

namespace sit {

/// Field used by sample and sweep: the checkpoint when one is configured,
/// else the analytic field of the dataset preset under (schedule, prediction).
std::unique_ptr<FieldModel> make_model(const ExperimentConfig& config, const Schedule& s, Prediction p);
std::unique_ptr<FieldModel> make_model(const ExperimentConfig& config);

TrainingData load_training_data(const ExperimentConfig& config);

struct TrainOutputs {
    std::string checkpoint;
    std::string profile;
    std::string curve;
};

/// Trains and writes exactly three files: the checkpoint, `<ckpt>.profile`
/// (per-time loss table) and `<ckpt>.curve` (`step loss` rows).
TrainOutputs cmd_train(const ExperimentConfig& config, const std::string& checkpoint_path);

/// Samples and writes a sample file; returns field evaluations per trajectory.
std::size_t cmd_sample(const ExperimentConfig& config, const std::string& out_path);

/// Metrics of a sample file against exact reference draws. Writes the text
/// report to `report_path` and, when non-empty, the JSON twin.
MetricReport cmd_eval(const ExperimentConfig& config, const std::string& samples_path, const std::string& report_path,
                      const std::string& json_path = {});

struct SweepSummary {
    std::size_t cells = 0;
    std::size_t failed = 0;
    std::size_t reused = 0;
};

/// schedule x prediction x sampler x w x NFE grid. Each cell writes its own
/// report atomically and is skipped on re-run when already present.
SweepSummary cmd_sweep(const ExperimentConfig& config, const std::string& out_dir);

/// Schedule and diffusion values on a uniform grid of `points` times.
void cmd_info(const ExperimentConfig& config, std::ostream& out, std::size_t points);

/// Stable sub-seed for a named cell.
std::uint64_t cell_seed(std::uint64_t master, const std::string& coordinates);

} // namespace sit
