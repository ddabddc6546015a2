#include "sit/errors.hpp"
#include "sit/field.hpp"
#include "sit/metrics.hpp"
#include "sit/sampler.hpp"
#include "sit/toybox.hpp"
#include "support.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>

using namespace sit;
using namespace sit::testing;
using doctest::Approx;

namespace {

/// Constant field; counts every single-point evaluation.
class CountingField final : public FieldModel {
public:
    CountingField(std::size_t d, double value, Prediction p = Prediction::Velocity, bool conditional = false)
        : d_(d), value_(value), p_(p), conditional_(conditional)
    {
    }
    Prediction prediction() const override { return p_; }
    const Schedule& schedule() const override { return s_; }
    std::size_t dim() const override { return d_; }
    std::optional<Conditioning> conditioning() const override
    {
        return conditional_ ? std::optional<Conditioning>(Conditioning{3}) : std::nullopt;
    }
    using FieldModel::evaluate;
    void evaluate(std::span<const double>, double, ClassLabel, std::span<double> out) const override
    {
        ++calls;
        for (double& o : out)
            o = value_;
    }
    mutable std::atomic<long> calls{0};

private:
    std::size_t d_;
    double value_;
    Prediction p_;
    bool conditional_;
    Schedule s_ = Schedule::linear();
};

SamplerSpec heun(int steps, double t0 = 1.0, double t1 = 0.0, std::uint64_t seed = 1)
{
    SamplerSpec spec;
    spec.kind = SamplerKind::HeunOde;
    spec.t_start = t0;
    spec.t_end = t1;
    spec.steps = steps;
    spec.seed = seed;
    return spec;
}

SamplerSpec em(int steps, DiffusionCoefficient w, double t0 = 1.0, double t1 = 0.04, std::optional<double> last = 0.0,
               std::uint64_t seed = 1)
{
    SamplerSpec spec;
    spec.kind = SamplerKind::EulerMaruyamaSde;
    spec.t_start = t0;
    spec.t_end = t1;
    spec.steps = steps;
    spec.diffusion = w;
    spec.last_step_to = last;
    spec.seed = seed;
    return spec;
}

Samples noise(std::uint64_t seed, std::size_t n, std::size_t d)
{
    Samples x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
        initial_noise(seed, i, {x.row(static_cast<Eigen::Index>(i)).data(), d});
    return x;
}

GaussianMixture aniso()
{
    Matrix cov(2, 2);
    cov << 2.0, 0.4, 0.4, 0.3;
    Vector mu(2);
    mu << 1.5, -1.0;
    return single(mu, cov);
}

double slope(const std::vector<double>& n, const std::vector<double>& err)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double x = std::log(n[i]), y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

} // namespace

TEST_CASE("time grid is uniform and ends exactly")
{
    const auto g = time_grid(1.0, 0.04, 7);
    REQUIRE(g.size() == 8);
    CHECK(g.front() == 1.0);
    CHECK(g.back() == 0.04);
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(g[i] == Approx(1.0 + i * (0.04 - 1.0) / 7));
    CHECK_THROWS_AS(time_grid(1, 0, 0), ConfigError);
}

TEST_CASE("default windows")
{
    const auto lin = Schedule::linear(), gvp = Schedule::gvp(), vp = Schedule::sbdm_vp();
    using P = Prediction;
    using K = SamplerKind;
    CHECK(default_window(vp, P::Velocity, K::EulerMaruyamaSde) == SamplerWindow{1.0, 0.04, 0.0});
    CHECK(default_window(gvp, P::Velocity, K::HeunOde) == SamplerWindow{1.0, 0.0, std::nullopt});
    CHECK(default_window(lin, P::Score, K::EulerMaruyamaSde) == SamplerWindow{1 - 1e-3, 0.04, 0.0});
    CHECK(default_window(lin, P::Velocity, K::HeunOde) == SamplerWindow{1.0, 0.0, std::nullopt});
    CHECK(default_window(lin, P::Velocity, K::EulerMaruyamaSde) == SamplerWindow{1.0, 0.04, 0.0});
    CHECK(default_window(vp, P::Velocity, K::HeunOde) == SamplerWindow{1.0, 1e-5, std::nullopt});
    CHECK(default_window(gvp, P::Score, K::HeunOde) == SamplerWindow{1 - 1e-5, 0.0, std::nullopt});
}

TEST_CASE("zero field returns the initial noise")
{
    CountingField zero(3, 0.0);
    const auto out = heun_sample(zero, heun(10), 100, {}, Exec::Serial);
    CHECK(out.samples == noise(1, 100, 3));
}

TEST_CASE("NFE accounting")
{
    CountingField f(1, 0.0, Prediction::Velocity, true);
    const std::size_t n = 10;
    heun_sample(f, heun(25), n);
    CHECK(f.calls == static_cast<long>(n * 50));
    CHECK(nfe(heun(25)) == 50);

    f.calls = 0;
    auto spec = em(250, DiffusionCoefficient::zero());
    euler_maruyama_sample(f, spec, n);
    CHECK(f.calls == static_cast<long>(n * 251));
    CHECK(nfe(spec) == 251);

    f.calls = 0;
    spec.guidance_zeta = 2.0;
    euler_maruyama_sample(f, spec, n, 1);
    CHECK(f.calls == static_cast<long>(n * 2 * 251));
    CHECK(nfe(spec) == 502);
}

TEST_CASE("spec validation")
{
    CountingField f(1, 0.0);
    CHECK_THROWS_AS(heun_sample(f, heun(10, 0.0, 1.0), 1), ConfigError);
    CHECK_THROWS_AS(heun_sample(f, heun(0), 1), ConfigError);
    auto guided = heun(10);
    guided.guidance_zeta = 3.0;
    CHECK_THROWS_AS(heun_sample(f, guided, 1), ConfigError);
    CHECK_THROWS_AS(euler_maruyama_sample(f, em(10, DiffusionCoefficient::zero(), 1.0, 0.04, 0.5), 1), ConfigError);
}

TEST_CASE("GVP standard Gaussian: Heun outputs stay N(0, I)")
{
    const AnalyticGmmField f(single(Vector::Zero(2), Matrix::Identity(2, 2)), Schedule::gvp(), Prediction::Velocity);
    const std::size_t n = 20000;
    const auto out = heun_sample(f, heun(20), n);
    const Vector mean = out.samples.colwise().mean().transpose();
    CHECK(mean.cwiseAbs().maxCoeff() < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("Linear single Gaussian: Heun samples are indistinguishable from exact draws")
{
    Vector mu(1);
    mu << 3.0;
    const auto g = single(mu, Matrix::Identity(1, 1));
    const AnalyticGmmField f(g, Schedule::linear(), Prediction::Velocity);
    const auto out = heun_sample(f, heun(250), 5000);
    const auto exact = draw(g, 5000, 99).x;
    CHECK(energy_permutation_test(out.samples, exact, 500, 3).p_value > 0.001);
}

TEST_CASE("EM with w = 0 is the Euler ODE")
{
    const auto g = two_gauss_1d();
    const AnalyticGmmField f(g, Schedule::linear(), Prediction::Velocity);
    const auto spec = em(40, DiffusionCoefficient::zero());
    const auto out = euler_maruyama_sample(f, spec, 130, {}, Exec::Serial);

    // Plain Euler with the same initial draws.
    Samples x(130, 1);
    for (std::size_t i = 0; i < 130; ++i) {
        Rng rng(spec.seed, i);
        x(static_cast<Eigen::Index>(i), 0) = rng.gaussian();
    }
    const auto grid = time_grid(spec.t_start, spec.t_end, spec.steps);
    Samples v;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        f.evaluate_batch(x, grid[k], {}, v);
        x += (grid[k + 1] - grid[k]) * v;
    }
    f.evaluate_batch(x, grid.back(), {}, v);
    x += (0.0 - grid.back()) * v;
    CHECK((out.samples - x).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("VP reverse drift with w^KL is -x/2 - s at beta = 1")
{
    const Schedule s = Schedule::sbdm_vp(1, 1);
    const auto g = two_gauss_1d();
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        const double t = rng.uniform(0.05, 0.95);
        const Vector x = random_vector(rng, 1, 2.0);
        const Vector sc = gmm_marginal_score(g, s, x, t);
        const Vector v = velocity_from_score(s, sc, x, t);
        const Vector drift = v - 0.5 * w(DiffusionCoefficient::kl(), s, t) * sc;
        CHECK(max_rel_err(drift, -0.5 * x - sc) < 1e-12);
    }
}

TEST_CASE("EM on two-gauss-1d keeps both modes at their weights")
{
    const auto g = two_gauss_1d();
    const AnalyticGmmField f(g, Schedule::linear(), Prediction::Velocity);
    const std::size_t n = 100000;
    const auto out = euler_maruyama_sample(f, em(250, DiffusionCoefficient::sigma()), n);
    const auto occ = mode_occupancy(out.samples, g);
    const double se = std::sqrt(0.25 / static_cast<double>(n));
    CHECK(std::abs(occ[0] - 0.5) < 3 * se);
}

TEST_CASE("serial and parallel runs are bitwise identical")
{
    const auto g = preset("ring-8");
    for (auto p : {Prediction::Velocity, Prediction::Score}) {
        const AnalyticGmmField f(g, Schedule::gvp(), p);
        const auto w = default_window(Schedule::gvp(), p, SamplerKind::EulerMaruyamaSde);
        auto spec = em(30, DiffusionCoefficient::sigma(), w.t_start, w.t_end, w.last_step_to, 7);
        spec.guidance_zeta = 2.5;
        const auto a = euler_maruyama_sample(f, spec, 333, 2, Exec::Serial);
        const auto b = euler_maruyama_sample(f, spec, 333, 2, Exec::Parallel);
        CHECK(a.samples == b.samples);
        const auto hw = default_window(Schedule::gvp(), p, SamplerKind::HeunOde);
        const auto c = heun_sample(f, heun(12, hw.t_start, hw.t_end, 7), 333, {}, Exec::Serial);
        const auto d = heun_sample(f, heun(12, hw.t_start, hw.t_end, 7), 333, {}, Exec::Parallel);
        CHECK(c.samples == d.samples);
    }
}

TEST_CASE("seeds: reproducible runs, distinct trajectory streams")
{
    const AnalyticGmmField f(two_gauss_1d(), Schedule::linear(), Prediction::Velocity);
    const auto a = euler_maruyama_sample(f, em(20, DiffusionCoefficient::sigma()), 50);
    const auto b = euler_maruyama_sample(f, em(20, DiffusionCoefficient::sigma()), 50);
    CHECK(a.samples == b.samples);
    const auto c = euler_maruyama_sample(f, em(20, DiffusionCoefficient::sigma(), 1.0, 0.04, 0.0, 2), 50);
    CHECK(a.samples != c.samples);
    // Prefixes agree: trajectory i does not depend on n.
    const auto d = euler_maruyama_sample(f, em(20, DiffusionCoefficient::sigma()), 20);
    CHECK(d.samples == a.samples.topRows(20));
    const Samples z = noise(5, 200, 1);
    for (Eigen::Index i = 1; i < z.rows(); ++i)
        CHECK(z(i, 0) != z(i - 1, 0));
}

TEST_CASE("Heun converges at second order")
{
    const AnalyticGmmField f(aniso(), Schedule::linear(), Prediction::Velocity);
    const std::size_t n = 64;
    const auto ref = heun_sample(f, heun(4096), n).samples;
    std::vector<double> ns, errs;
    for (int N : {16, 32, 64, 128}) {
        const auto out = heun_sample(f, heun(N), n).samples;
        ns.push_back(N);
        errs.push_back((out - ref).cwiseAbs().maxCoeff());
    }
    const double k = slope(ns, errs);
    MESSAGE("log-log slope ", k);
    CHECK(k > -2.3);
    CHECK(k < -1.7);
}

TEST_CASE("Euler-Maruyama weak error decays at first order")
{
    // Exact Gaussian target, so the terminal mean is known. Under Linear the
    // narrow target makes the score stiff near t = 0 and small N is not yet
    // asymptotic; GVP shows the rate cleanly.
    Vector mu(1);
    mu << 2.0;
    const auto g = single(mu, Matrix::Constant(1, 1, 0.25));
    const AnalyticGmmField f(g, Schedule::gvp(), Prediction::Velocity);
    const std::size_t n = 100000;
    std::vector<double> ns, errs;
    for (int N : {4, 8, 16, 32}) {
        const auto out = euler_maruyama_sample(f, em(N, DiffusionCoefficient::sigma(), 1.0, 0.04, 0.0, 11), n).samples;
        const double mean = out.col(0).mean();
        ns.push_back(N);
        errs.push_back(std::abs(mean - 2.0));
    }
    const double k = slope(ns, errs);
    MESSAGE("log-log slope ", k);
    CHECK(k > -1.4);
    CHECK(k < -0.6);
}

TEST_CASE("singular coefficient on the grid surfaces as an error")
{
    const AnalyticGmmField f(two_gauss_1d(), Schedule::linear(), Prediction::Velocity);
    CHECK_THROWS_AS(euler_maruyama_sample(f, em(10, DiffusionCoefficient::kl()), 10), SingularityError);
    CHECK_NOTHROW(euler_maruyama_sample(f, em(10, DiffusionCoefficient::kl(), 0.99), 10));
}

TEST_CASE("non-finite state aborts with the step index")
{
    CountingField blowup(1, std::numeric_limits<double>::infinity());
    try {
        heun_sample(blowup, heun(5), 3);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.step() == 0);
    }
}
