#include "sit/sampler.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"
#include "sit/rng.hpp"

#include <cmath>
#include <exception>
#include <string>
#include <vector>

namespace sit {

std::string sampler_name(SamplerKind kind)
{
    return kind == SamplerKind::HeunOde ? "heun" : "em";
}

SamplerKind parse_sampler(std::string_view text)
{
    if (text == "heun")
        return SamplerKind::HeunOde;
    if (text == "em")
        return SamplerKind::EulerMaruyamaSde;
    throw ConfigError("unknown sampler '" + std::string(text) + "' (expected heun, em)");
}

SamplerWindow default_window(const Schedule& s, Prediction prediction, SamplerKind kind)
{
    constexpr double kEmEnd = 4e-2;
    if (s.kind() == ScheduleKind::SbdmVp) {
        if (kind == SamplerKind::HeunOde)
            return {1.0, 1e-5, std::nullopt};
        return {1.0, kEmEnd, 0.0};
    }
    if (prediction == Prediction::Velocity) {
        if (kind == SamplerKind::HeunOde)
            return {1.0, 0.0, std::nullopt};
        return {1.0, kEmEnd, 0.0};
    }
    if (kind == SamplerKind::HeunOde)
        return {1.0 - 1e-5, 0.0, std::nullopt};
    return {1.0 - 1e-3, kEmEnd, 0.0};
}

std::vector<double> time_grid(double t_start, double t_end, int steps)
{
    if (steps <= 0)
        throw ConfigError("sampler steps must be positive");
    std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
    const double dt = (t_end - t_start) / steps;
    for (int i = 0; i < steps; ++i)
        grid[static_cast<std::size_t>(i)] = t_start + i * dt;
    grid.back() = t_end;
    return grid;
}

std::size_t nfe(const SamplerSpec& spec)
{
    const auto n = static_cast<std::size_t>(spec.steps);
    std::size_t per = spec.kind == SamplerKind::HeunOde ? 2 * n : n + (spec.last_step_to ? 1 : 0);
    return spec.guidance_zeta ? 2 * per : per;
}

void initial_noise(std::uint64_t seed, std::size_t trajectory, std::span<double> out)
{
    Rng rng(seed, trajectory);
    for (double& v : out)
        v = rng.gaussian();
}

namespace {

void validate(const FieldModel& model, const SamplerSpec& spec, ClassLabel y)
{
    if (spec.steps <= 0)
        throw ConfigError("sampler steps must be positive");
    if (!(spec.t_start > spec.t_end))
        throw ConfigError("sampler requires t_start > t_end");
    if (spec.t_start > 1.0 || spec.t_end < 0.0)
        throw ConfigError("sampler window must lie in [0, 1]");
    if (spec.last_step_to && !(*spec.last_step_to <= spec.t_end && *spec.last_step_to >= 0.0))
        throw ConfigError("last step target must lie in [0, t_end]");
    if (spec.guidance_zeta) {
        if (!model.conditioning())
            throw ConfigError("guidance requires a class-conditional model");
        if (!y)
            throw ConfigError("guidance requires a target class");
    }
}

/// Native field with optional guidance, then mapped to velocity and/or score.
class Drift {
public:
    Drift(const FieldModel& model, const SamplerSpec& spec, ClassLabel y)
        : model_(model), zeta_(spec.guidance_zeta), y_(y)
    {
    }

    void velocity(const Samples& x, double t, Samples& v)
    {
        native(x, t);
        if (model_.prediction() == Prediction::Velocity)
            v = native_;
        else
            velocity_from_score_batch(model_.schedule(), native_, x, t, v);
    }

    void both(const Samples& x, double t, Samples& v, Samples& s)
    {
        native(x, t);
        if (model_.prediction() == Prediction::Velocity) {
            v = native_;
            score_from_velocity_batch(model_.schedule(), native_, x, t, s);
        } else {
            s = native_;
            velocity_from_score_batch(model_.schedule(), native_, x, t, v);
        }
    }

private:
    void native(const Samples& x, double t)
    {
        if (zeta_)
            guided_field_batch(model_, *zeta_, x, t, *y_, native_);
        else
            model_.evaluate_batch(x, t, y_, native_);
    }

    const FieldModel& model_;
    std::optional<double> zeta_;
    ClassLabel y_;
    Samples native_;
};

void check_finite(const Samples& x, std::size_t step)
{
    if (!x.allFinite())
        throw NumericalError("non-finite sampler state at step " + std::to_string(step), step);
}

// Trajectories advance in lockstep within fixed blocks so batched field
// evaluations see the same block layout under any thread count.
constexpr std::size_t kBlock = 64;

template <class Block>
void for_each_block(std::size_t n, Exec exec, Block&& run)
{
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    auto range = [&](std::size_t b) {
        const std::size_t lo = b * kBlock;
        run(lo, std::min(n, lo + kBlock));
    };
    if (exec == Exec::Serial) {
        for (std::size_t b = 0; b < blocks; ++b)
            range(b);
        return;
    }
    // Exceptions may not cross the parallel region; keep the one from the
    // lowest block so failures are reported deterministically.
    std::exception_ptr error;
    std::size_t error_block = blocks;
    const auto count = static_cast<long long>(blocks);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long b = 0; b < count; ++b) {
        try {
            range(static_cast<std::size_t>(b));
        } catch (...) {
#pragma omp critical(sit_sampler_error)
            {
                if (static_cast<std::size_t>(b) < error_block) {
                    error_block = static_cast<std::size_t>(b);
                    error = std::current_exception();
                }
            }
        }
    }
    if (error)
        std::rethrow_exception(error);
}

} // namespace

SampleResult heun_sample(const FieldModel& model, const SamplerSpec& spec, std::size_t n, ClassLabel y, Exec exec)
{
    validate(model, spec, y);
    const auto d = static_cast<Eigen::Index>(model.dim());
    const auto grid = time_grid(spec.t_start, spec.t_end, spec.steps);
    const double dt = grid[1] - grid[0];

    SampleResult result;
    result.samples.resize(static_cast<Eigen::Index>(n), d);
    result.nfe_per_trajectory = nfe(spec);

    for_each_block(n, exec, [&](std::size_t lo, std::size_t hi) {
        const auto rows = static_cast<Eigen::Index>(hi - lo);
        Drift drift(model, spec, y);
        Samples x(rows, d), predictor, d0, d1;
        for (std::size_t i = lo; i < hi; ++i)
            initial_noise(spec.seed, i, {x.row(static_cast<Eigen::Index>(i - lo)).data(), static_cast<std::size_t>(d)});
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            drift.velocity(x, grid[k], d0);
            predictor = x + dt * d0;
            drift.velocity(predictor, grid[k + 1], d1);
            x += (0.5 * dt) * (d0 + d1);
            check_finite(x, k);
        }
        result.samples.middleRows(static_cast<Eigen::Index>(lo), rows) = x;
    });
    return result;
}

SampleResult euler_maruyama_sample(const FieldModel& model, const SamplerSpec& spec, std::size_t n, ClassLabel y,
                                   Exec exec)
{
    validate(model, spec, y);
    const auto d = static_cast<Eigen::Index>(model.dim());
    const Schedule& schedule = model.schedule();
    const auto grid = time_grid(spec.t_start, spec.t_end, spec.steps);
    const double dt = grid[1] - grid[0];
    const double sqrt_dt = std::sqrt(std::abs(dt));

    // w_t on the grid, evaluated once; singular points surface here.
    std::vector<double> wt(grid.size(), 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (k + 1 == grid.size() && !spec.last_step_to)
            break;
        wt[k] = w(spec.diffusion, schedule, grid[k]);
        if (!(wt[k] >= 0.0) || !std::isfinite(wt[k]))
            throw NumericalError("diffusion coefficient " + spec.diffusion.name() +
                                     " is not finite and nonnegative at t = " + format_double(grid[k]),
                                 k);
    }

    SampleResult result;
    result.samples.resize(static_cast<Eigen::Index>(n), d);
    result.nfe_per_trajectory = nfe(spec);

    for_each_block(n, exec, [&](std::size_t lo, std::size_t hi) {
        const auto rows = static_cast<Eigen::Index>(hi - lo);
        Drift drift(model, spec, y);
        std::vector<Rng> streams;
        streams.reserve(hi - lo);
        for (std::size_t i = lo; i < hi; ++i)
            streams.emplace_back(spec.seed, i);

        Samples x(rows, d), v, s;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index j = 0; j < d; ++j)
                x(r, j) = streams[static_cast<std::size_t>(r)].gaussian();

        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            drift.both(x, grid[k], v, s);
            const double sqrt_w = std::sqrt(wt[k]);
            for (Eigen::Index r = 0; r < rows; ++r) {
                Rng& rng = streams[static_cast<std::size_t>(r)];
                for (Eigen::Index j = 0; j < d; ++j) {
                    const double increment = rng.gaussian() * sqrt_dt;
                    x(r, j) += dt * (v(r, j) - 0.5 * wt[k] * s(r, j)) + sqrt_w * increment;
                }
            }
            check_finite(x, k);
        }
        if (spec.last_step_to) {
            // Noiseless final drift step.
            const std::size_t k = grid.size() - 1;
            const double h = *spec.last_step_to - grid[k];
            drift.both(x, grid[k], v, s);
            x += h * (v - (0.5 * wt[k]) * s);
            check_finite(x, k);
        }
        result.samples.middleRows(static_cast<Eigen::Index>(lo), rows) = x;
    });
    return result;
}

SampleResult sample(const FieldModel& model, const SamplerSpec& spec, std::size_t n, ClassLabel y, Exec exec)
{
    if (spec.kind == SamplerKind::HeunOde)
        return heun_sample(model, spec, n, y, exec);
    return euler_maruyama_sample(model, spec, n, y, exec);
}

} // namespace sit
