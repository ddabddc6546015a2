#include "sit/errors.hpp"
#include "sit/field.hpp"
#include "sit/gmm.hpp"
#include "sit/toybox.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace sit;
using namespace sit::testing;
using doctest::Approx;

namespace {

const Schedule kAll[] = {Schedule::linear(), Schedule::gvp(), Schedule::sbdm_vp()};

GaussianMixture full_cov_2d()
{
    Matrix c1(2, 2), c2(2, 2);
    c1 << 1.0, 0.6, 0.6, 0.8;
    c2 << 0.3, -0.1, -0.1, 0.5;
    Vector m1(2), m2(2);
    m1 << 1.0, -0.5;
    m2 << -1.5, 2.0;
    return GaussianMixture({{0.3, m1, c1}, {0.7, m2, c2}}, true);
}

double log_p(const GaussianMixture& g, const Schedule& s, const Vector& x, double t)
{
    return g.log_density(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), s, t);
}

Vector fd_grad(const GaussianMixture& g, const Schedule& s, const Vector& x, double t, double h = 1e-5)
{
    Vector grad(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vector a = x, b = x;
        a[k] += h;
        b[k] -= h;
        grad[k] = (log_p(g, s, a, t) - log_p(g, s, b, t)) / (2 * h);
    }
    return grad;
}

} // namespace

TEST_CASE("interpolate endpoints and midpoint")
{
    Vector xs(2), e(2);
    xs << 1.0, 0.0;
    e << 0.0, 1.0;
    CHECK(interpolate(Schedule::linear(), xs, e, 0.0) == xs);
    CHECK(interpolate(Schedule::linear(), xs, e, 1.0) == e);
    const Vector mid = interpolate(Schedule::gvp(), xs, e, 0.5);
    CHECK(mid[0] == Approx(std::sqrt(0.5)));
    CHECK(mid[1] == Approx(std::sqrt(0.5)));
}

TEST_CASE("single Gaussian score and velocity")
{
    const auto g = single(Vector::Zero(3), Matrix::Identity(3, 3));
    Rng rng(1);
    for (const Schedule& s : kAll)
        for (double t : {0.1, 0.5, 0.9}) {
            const Vector x = random_vector(rng, 3);
            const double var = s.alpha(t) * s.alpha(t) + s.sigma(t) * s.sigma(t);
            CHECK(max_rel_err(gmm_marginal_score(g, s, x, t), -x / var) < 1e-13);
        }
    const Vector x = random_vector(rng, 3);
    CHECK(max_rel_err(gmm_marginal_score(g, Schedule::gvp(), x, 0.37), -x) < 1e-14);
    CHECK(gmm_marginal_velocity(g, Schedule::gvp(), x, 0.37).norm() < 1e-13);
    CHECK(gmm_marginal_velocity(g, Schedule::linear(), Vector::Ones(1).replicate(3, 1), 0.5).norm() < 1e-14);
}

TEST_CASE("score matches central differences of log p_t")
{
    const auto g1 = two_gauss_1d();
    const Vector x0 = Vector::Zero(1);
    CHECK(std::abs(gmm_marginal_score(g1, Schedule::linear(), x0, 0.5)[0] - fd_grad(g1, Schedule::linear(), x0, 0.5)[0]) < 1e-6);
    const Vector x1 = Vector::Constant(1, 0.7);
    CHECK(std::abs(gmm_marginal_score(g1, Schedule::linear(), x1, 0.5)[0] - fd_grad(g1, Schedule::linear(), x1, 0.5)[0]) < 1e-6);

    const auto g = full_cov_2d();
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const Schedule& s = kAll[i % 3];
        const double t = rng.uniform(0.05, 0.95);
        const Vector x = random_vector(rng, 2, 2.0);
        CHECK(max_rel_err(gmm_marginal_score(g, s, x, t), fd_grad(g, s, x, t)) < 1e-5);
    }
}

TEST_CASE("velocity matches Monte-Carlo conditional expectation")
{
    const auto g = two_gauss_1d();
    const Schedule s = Schedule::linear();
    const double t = 0.3, x = 1.0;
    const double a = s.alpha(t), sg = s.sigma(t);
    Rng rng(3);
    const LabeledSamples draws = draw(g, 1000000, 17);
    double sw = 0, swv = 0, swv2 = 0, sw2 = 0;
    for (Eigen::Index i = 0; i < draws.x.rows(); ++i) {
        const double xs = draws.x(i, 0);
        const double e = (x - a * xs) / sg;
        const double wgt = std::exp(-0.5 * e * e);
        const double v = s.alpha_dot(t) * xs + s.sigma_dot(t) * e;
        sw += wgt;
        sw2 += wgt * wgt;
        swv += wgt * v;
        swv2 += wgt * v * v;
    }
    const double mean = swv / sw;
    const double var = swv2 / sw - mean * mean;
    const double se = std::sqrt(var * sw2) / sw; // effective-sample-size error
    const double exact = gmm_marginal_velocity(g, s, Vector::Constant(1, x), t)[0];
    CHECK(std::abs(mean - exact) < 4 * se);
}

TEST_CASE("posterior means satisfy alpha E[x*|x] + sigma E[eps|x] = x")
{
    const auto g = full_cov_2d();
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const Schedule& s = kAll[i % 3];
        const double t = rng.uniform(0.01, 1.0);
        const Vector x = random_vector(rng, 2, 2.0);
        Vector dm(2), nm(2);
        g.moments({x.data(), 2}, s.alpha(t), s.sigma(t), {dm.data(), 2}, {nm.data(), 2}, {});
        CHECK(max_rel_err(s.alpha(t) * dm + s.sigma(t) * nm, x) < 1e-10);
    }
}

TEST_CASE("oracle velocity equals converted oracle score")
{
    const auto g = full_cov_2d();
    Rng rng(5);
    for (int i = 0; i < 60; ++i) {
        const Schedule& s = kAll[i % 3];
        const double t = rng.uniform(0.02, 0.98);
        const Vector x = random_vector(rng, 2, 2.0);
        const Vector v = gmm_marginal_velocity(g, s, x, t);
        const Vector v2 = velocity_from_score(s, gmm_marginal_score(g, s, x, t), x, t);
        CHECK(max_rel_err(v, v2) < 1e-11);
    }
}

TEST_CASE("velocity stays finite at alpha = 0")
{
    const auto g = full_cov_2d();
    const Vector x = Vector::Constant(2, 0.4);
    for (const Schedule& s : {Schedule::linear(), Schedule::gvp()}) {
        const Vector v = gmm_marginal_velocity(g, s, x, 1.0);
        CHECK(v.allFinite());
        CHECK(max_rel_err(v, gmm_marginal_velocity(g, s, x, 1 - 1e-9)) < 1e-6);
    }
}

TEST_CASE("score/velocity round trip")
{
    Rng rng(6);
    for (const Schedule& s : kAll)
        for (int i = 0; i < 3000; ++i) {
            const double t = rng.uniform(0.05, 0.95);
            const Vector x = random_vector(rng, 3), v = random_vector(rng, 3);
            const Vector back = velocity_from_score(s, score_from_velocity(s, v, x, t), x, t);
            CHECK(max_rel_err(back, v) < 1e-10);
        }
    CHECK_THROWS_AS(score_from_velocity(Schedule::linear(), Vector::Ones(1), Vector::Ones(1), 0.0), SingularityError);
    CHECK_THROWS_AS(velocity_from_score(Schedule::linear(), Vector::Ones(1), Vector::Ones(1), 1.0), SingularityError);
}

TEST_CASE("single Gaussian closed forms satisfy the conversion")
{
    Vector mu(2);
    mu << 1.0, -2.0;
    Matrix cov(2, 2);
    cov << 2.0, 0.3, 0.3, 0.5;
    const auto g = single(mu, cov);
    const Schedule s = Schedule::linear();
    const double t = 0.5;
    const Vector x = Vector::Constant(2, 0.25);
    const double a = s.alpha(t), sg = s.sigma(t);
    const Matrix C = a * a * cov + sg * sg * Matrix::Identity(2, 2);
    const Vector score = -C.ldlt().solve(x - a * mu);
    // Closed-form velocity: alpha_dot E[x*|x] + sigma_dot E[eps|x].
    const Vector ex = mu + a * cov * C.ldlt().solve(x - a * mu);
    const Vector ee = sg * C.ldlt().solve(x - a * mu);
    const Vector vel = s.alpha_dot(t) * ex + s.sigma_dot(t) * ee;
    CHECK(max_rel_err(score_from_velocity(s, vel, x, t), score) < 1e-13);
    CHECK(max_rel_err(gmm_marginal_score(g, s, x, t), score) < 1e-13);
}

TEST_CASE("VP velocity from score is -beta/2 (x + s)")
{
    const Schedule s = Schedule::sbdm_vp(1, 1);
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        const double t = rng.uniform(0.05, 0.95);
        const Vector x = random_vector(rng, 2), sc = random_vector(rng, 2);
        CHECK(max_rel_err(velocity_from_score(s, sc, x, t), -0.5 * x - 0.5 * sc) < 1e-12);
    }
}

TEST_CASE("guidance mixes conditional and null fields")
{
    const auto g = full_cov_2d();
    const AnalyticGmmField field(g, Schedule::linear(), Prediction::Score);
    const Vector x = Vector::Constant(2, 0.3);
    const double t = 0.4;
    CHECK(guided_field(field, 1.0, x, t, 1) == field.evaluate(x, t, 1));
    CHECK(guided_field(field, 0.0, x, t, 1) == field.evaluate(x, t, ClassLabel{}));
    const AnalyticGmmField plain(GaussianMixture(std::vector<GaussianMixture::Component>{{1.0, Vector::Zero(2), Matrix::Identity(2, 2)}}),
                                 Schedule::linear(), Prediction::Score);
    CHECK_THROWS_AS(guided_field(plain, 2.0, x, t, 0), ConfigError);
    CHECK_THROWS_AS(field.evaluate(x, t, 5), DomainError);
}

TEST_CASE("guided score is the gradient of log p_t(x) p_t(y|x)^zeta")
{
    const auto g = full_cov_2d();
    const Schedule s = Schedule::gvp();
    const AnalyticGmmField field(g, s, Prediction::Score);
    const double zeta = 4.0;
    auto tempered = [&](const Vector& x, double t) {
        const Vector r = g.responsibilities({x.data(), 2}, s.alpha(t), s.sigma(t));
        return log_p(g, s, x, t) + zeta * std::log(r[0]);
    };
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        const double t = rng.uniform(0.1, 0.9);
        const Vector x = random_vector(rng, 2, 1.5);
        const double h = 1e-5;
        Vector fd(2);
        for (int k = 0; k < 2; ++k) {
            Vector a = x, b = x;
            a[k] += h;
            b[k] -= h;
            fd[k] = (tempered(a, t) - tempered(b, t)) / (2 * h);
        }
        CHECK(max_rel_err(guided_field(field, zeta, x, t, 0), fd) < 1e-5);
    }
}

TEST_CASE("mixture validation")
{
    using C = GaussianMixture::Component;
    CHECK_THROWS_AS(GaussianMixture({C{0.5, Vector::Zero(1), Matrix::Identity(1, 1)}}), ConfigError);
    CHECK_THROWS_AS(GaussianMixture({C{1.0, Vector::Zero(1), -Matrix::Identity(1, 1)}}), ConfigError);
    CHECK_THROWS_AS(GaussianMixture({C{1.0, Vector::Zero(2), Matrix::Identity(1, 1)}}), ConfigError);
    Matrix asym(2, 2);
    asym << 1, 0.5, 0, 1;
    CHECK_THROWS_AS(GaussianMixture({C{1.0, Vector::Zero(2), asym}}), ConfigError);
    CHECK_NOTHROW(GaussianMixture({C{0.25, Vector::Zero(1), Matrix::Identity(1, 1)},
                                   C{0.75, Vector::Ones(1), Matrix::Identity(1, 1)}}));
}

TEST_CASE("far-out points keep finite responsibilities")
{
    const auto g = preset("grid-9");
    const Vector x = Vector::Constant(2, 60.0);
    const Vector r = g.responsibilities({x.data(), 2}, 1.0, 0.0);
    CHECK(r.allFinite());
    CHECK(r.sum() == Approx(1.0));
    CHECK(gmm_marginal_score(g, Schedule::linear(), x, 1e-6).allFinite());
}
