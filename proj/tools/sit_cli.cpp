// sit: train, sample, evaluate and sweep stochastic-interpolant models.

#include "sit/config.hpp"
#include "sit/errors.hpp"
#include "sit/experiment.hpp"
#include "sit/format.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

/// Flags shared by every subcommand; each one overrides its config key.
struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output, preset, data, schedule, prediction, objective;
    std::optional<std::string> checkpoint, analytic, profile;
    std::optional<std::size_t> train_steps, batch;
    std::optional<double> learning_rate;
    std::optional<bool> conditional;
    std::optional<std::string> sampler, diffusion;
    std::optional<int> steps, label;
    std::optional<double> zeta, t_start, t_end, last_step_to;
    bool no_last_step = false;
    std::optional<std::size_t> n, reference_n;
    std::vector<std::string> metrics;

    void add_common(CLI::App* app)
    {
        app->add_option("--config", config_path, "JSON experiment config");
        app->add_option("--seed", seed, "master seed");
        app->add_option("--output", output, "output root (default $SIT_OUTPUT_ROOT or .)");
        app->add_option("--preset", preset, "dataset preset");
        app->add_option("--schedule", schedule, "linear | gvp | sbdm-vp[:bmin:bmax]");
        app->add_option("--prediction", prediction, "velocity | score");
        app->add_option("--profile", profile, "per-time loss profile L_t");
    }

    void add_sampling(CLI::App* app)
    {
        app->add_option("--checkpoint", checkpoint, "trained model");
        app->add_option("--analytic", analytic, "use the exact field of a preset");
        app->add_option("--sampler", sampler, "heun | em");
        app->add_option("--steps", steps, "integration steps");
        app->add_option("--w", diffusion, "sigma | sin2 | kl | kl-eta:<eta> | const:<v> | zero");
        app->add_option("--zeta", zeta, "classifier-free guidance strength");
        app->add_option("--class", label, "class label");
        app->add_option("--n", n, "number of samples");
        app->add_option("--t-start", t_start);
        app->add_option("--t-end", t_end);
        app->add_option("--last-step-to", last_step_to);
        app->add_flag("--no-last-step", no_last_step, "skip the final noiseless step");
    }

    sit::ExperimentConfig apply() const
    {
        sit::ExperimentConfig c = config_path.empty() ? sit::ExperimentConfig{} : sit::load_config(config_path);
        if (seed) c.seed = *seed;
        if (output) c.output_dir = *output;
        if (preset) { c.dataset_preset = *preset; c.dataset_file.clear(); }
        if (analytic) { c.dataset_preset = *analytic; c.dataset_file.clear(); c.checkpoint.clear(); }
        if (data) { c.dataset_file = *data; c.dataset_preset.clear(); }
        if (schedule) c.schedule = *schedule;
        if (prediction) c.prediction = *prediction;
        if (objective) c.objective = *objective;
        if (checkpoint) c.checkpoint = *checkpoint;
        if (profile) c.profile = *profile;
        if (train_steps) c.train.steps = *train_steps;
        if (batch) c.train.batch = *batch;
        if (learning_rate) c.train.learning_rate = *learning_rate;
        if (conditional) c.train.conditional = *conditional;
        if (sampler) c.sampler.kind = *sampler;
        if (steps) c.sampler.steps = *steps;
        if (diffusion) c.sampler.diffusion = *diffusion;
        if (zeta) c.sampler.zeta = *zeta;
        if (label) c.sampler.label = *label;
        if (n) c.sampler.n = *n;
        if (t_start) c.sampler.t_start = *t_start;
        if (t_end) c.sampler.t_end = *t_end;
        if (last_step_to) c.sampler.last_step_to = *last_step_to;
        if (no_last_step) c.sampler.no_last_step = true;
        if (reference_n) c.eval.reference_n = *reference_n;
        if (!metrics.empty()) c.eval.metrics = metrics;
        c.validate();
        return c;
    }
};

std::string under_root(const sit::ExperimentConfig& c, const std::string& name)
{
    return (std::filesystem::path(c.output_root()) / name).string();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stochastic-interpolant generative models on toy distributions"};
    app.require_subcommand(1);
    Overrides o;
    std::string out_path, samples_path, json_path;
    std::size_t points = 11;

    auto* train = app.add_subcommand("train", "train an MLP field; writes CKPT, CKPT.profile, CKPT.curve");
    o.add_common(train);
    train->add_option("--data", o.data, "training sample file (instead of a preset)");
    train->add_option("--objective", o.objective, "velocity | score | score-weighted");
    train->add_option("--train-steps", o.train_steps, "optimizer steps");
    train->add_option("--batch", o.batch);
    train->add_option("--lr", o.learning_rate);
    train->add_option("--conditional", o.conditional, "train with class labels and null-token dropout");
    train->add_option("--out", out_path, "checkpoint path")->required();

    auto* sample = app.add_subcommand("sample", "draw samples with the Heun ODE or Euler-Maruyama SDE sampler");
    o.add_common(sample);
    o.add_sampling(sample);
    sample->add_option("--out", out_path, "sample file (default <root>/samples.txt)");

    auto* eval = app.add_subcommand("eval", "metrics of a sample file against exact reference draws");
    o.add_common(eval);
    o.add_sampling(eval);
    eval->add_option("--samples", samples_path, "sample file")->required();
    eval->add_option("--metrics", o.metrics, "energy ks occupancy permutation path-length kl-bound")->delimiter(',');
    eval->add_option("--reference-n", o.reference_n);
    eval->add_option("--out", out_path, "report (default <root>/report.txt)");
    eval->add_option("--json", json_path, "optional JSON report");

    auto* sweep = app.add_subcommand("sweep", "schedule x prediction x sampler x w x NFE grid");
    o.add_common(sweep);
    sweep->add_option("--checkpoint", o.checkpoint);
    sweep->add_option("--out", out_path, "sweep directory (default <root>/sweep)");

    auto* info = app.add_subcommand("info", "schedule and diffusion values on a time grid");
    o.add_common(info);
    info->add_option("--w", o.diffusion);
    info->add_option("--points", points, "grid points on [0, 1]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        const sit::ExperimentConfig config = o.apply();
        if (*train) {
            const auto files = sit::cmd_train(config, out_path);
            std::cout << "wrote " << files.checkpoint << ", " << files.profile << ", " << files.curve << '\n';
        } else if (*sample) {
            const std::string path = out_path.empty() ? under_root(config, "samples.txt") : out_path;
            const auto nfe = sit::cmd_sample(config, path);
            std::cout << "wrote " << config.sampler.n << " samples to " << path << " (nfe " << nfe << ")\n";
        } else if (*eval) {
            const std::string path = out_path.empty() ? under_root(config, "report.txt") : out_path;
            const auto report = sit::cmd_eval(config, samples_path, path, json_path);
            report.write_text(std::cout);
        } else if (*sweep) {
            const std::string dir = out_path.empty() ? under_root(config, "sweep") : out_path;
            const auto summary = sit::cmd_sweep(config, dir);
            std::cout << "sweep: " << summary.cells << " cells, " << summary.failed << " failed, " << summary.reused
                      << " reused -> " << dir << '\n';
        } else if (*info) {
            sit::cmd_info(config, std::cout, points);
        }
    } catch (const sit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const sit::NumericalError& e) {
        std::cerr << "numerical error at step " << e.step() << ": " << e.what() << '\n';
        return kExitNumerical;
    } catch (const sit::SingularityError& e) {
        std::cerr << "singular evaluation: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const sit::DomainError& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "file error: " << e.what() << '\n';
        return kExitConfig;
    }
    return 0;
}
