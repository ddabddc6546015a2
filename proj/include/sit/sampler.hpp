#pragma once

#include "sit/diffusion.hpp"
#include "sit/field.hpp"
#include "sit/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sit {

enum class SamplerKind { HeunOde, EulerMaruyamaSde };

std::string sampler_name(SamplerKind kind);
SamplerKind parse_sampler(std::string_view text);

/// Integration runs from t_start (noise side) down to t_end (data side).
struct SamplerSpec {
    SamplerKind kind = SamplerKind::HeunOde;
    double t_start = 1.0;
    double t_end = 0.0;
    int steps = 250;
    DiffusionCoefficient diffusion = DiffusionCoefficient::sigma(); // SDE only
    std::optional<double> last_step_to;                             // SDE only
    std::optional<double> guidance_zeta;
    std::uint64_t seed = 0;
};

struct SamplerWindow {
    double t_start;
    double t_end;
    std::optional<double> last_step_to;
    bool operator==(const SamplerWindow&) const = default;
};

/// Start/end times tuned per schedule, prediction and integrator, with the
/// Euler-Maruyama path finishing by one noiseless step to t = 0.
SamplerWindow default_window(const Schedule& s, Prediction prediction, SamplerKind kind);

/// Uniform grid t_i = t_start + i (t_end - t_start) / N, i = 0..N.
std::vector<double> time_grid(double t_start, double t_end, int steps);

/// Field evaluations per trajectory for a spec.
std::size_t nfe(const SamplerSpec& spec);

struct SampleResult {
    Samples samples;
    std::size_t nfe_per_trajectory = 0;
};

/// Probability-flow ODE by Heun's method (Euler predictor, trapezoidal
/// corrector). A score model is converted to velocity first.
SampleResult heun_sample(const FieldModel& model, const SamplerSpec& spec, std::size_t n, ClassLabel y = {},
                         Exec exec = Exec::Parallel);

/// Reverse-time SDE dX = (v - w s / 2) dt + sqrt(w) dW on the descending
/// grid, then an optional noiseless drift step to `last_step_to`.
SampleResult euler_maruyama_sample(const FieldModel& model, const SamplerSpec& spec, std::size_t n,
                                   ClassLabel y = {}, Exec exec = Exec::Parallel);

SampleResult sample(const FieldModel& model, const SamplerSpec& spec, std::size_t n, ClassLabel y = {},
                    Exec exec = Exec::Parallel);

/// Starting noise of trajectory i (shared by both integrators).
void initial_noise(std::uint64_t seed, std::size_t trajectory, std::span<double> out);

} // namespace sit
