// Serial reference path vs OpenMP kernel for the hot loops. Each pair is
// also checked for identical output, since the parallel kernels promise a
// fixed reduction order.

#include "sit/field.hpp"
#include "sit/metrics.hpp"
#include "sit/sampler.hpp"
#include "sit/toybox.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

using namespace sit;

namespace {

double best_of(int reps, const std::function<void()>& body)
{
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        body();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool same)
{
    std::printf("%-34s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  %s\n", name, serial, parallel,
                serial / parallel, same ? "identical" : "MISMATCH");
}

void bench_sampler(const char* name, const FieldModel& f, const SamplerSpec& spec, std::size_t n)
{
    Samples a, b;
    const double s = best_of(3, [&] { a = sample(f, spec, n, {}, Exec::Serial).samples; });
    const double p = best_of(3, [&] { b = sample(f, spec, n, {}, Exec::Parallel).samples; });
    report(name, s, p, a == b);
}

} // namespace

int main()
{
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());

    const auto grid = preset("grid-9");
    const AnalyticGmmField field(grid, Schedule::linear(), Prediction::Velocity);
    SamplerSpec heun;
    heun.steps = 100;
    heun.seed = 1;
    bench_sampler("heun grid-9 n=4096 steps=100", field, heun, 4096);

    SamplerSpec em = heun;
    em.kind = SamplerKind::EulerMaruyamaSde;
    em.t_end = 0.04;
    em.last_step_to = 0.0;
    bench_sampler("em grid-9 n=4096 steps=100", field, em, 4096);

    for (std::size_t n : {1000, 3000}) {
        const Samples a = draw(grid, n, 2).x, b = draw(grid, n, 3).x;
        double ds = 0, dp = 0;
        const double s = best_of(3, [&] { ds = energy_distance(a, b, Exec::Serial); });
        const double p = best_of(3, [&] { dp = energy_distance(a, b, Exec::Parallel); });
        char name[64];
        std::snprintf(name, sizeof name, "energy distance 2-D n=%zu", n);
        report(name, s, p, ds == dp);
    }

    const auto line = preset("two-gauss-1d");
    const Samples a = draw(line, 200000, 4).x, b = draw(line, 200000, 5).x;
    double ds = 0, dp = 0;
    const double s = best_of(3, [&] { ds = energy_distance(a, b, Exec::Serial); });
    const double p = best_of(3, [&] { dp = energy_distance(a, b, Exec::Parallel); });
    report("energy distance 1-D n=200000", s, p, ds == dp);
    return 0;
}
