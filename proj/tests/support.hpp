#pragma once

#include "sit/gmm.hpp"
#include "sit/rng.hpp"
#include "sit/types.hpp"

#include <cmath>
#include <vector>

namespace sit::testing {

inline GaussianMixture two_gauss_1d()
{
    return GaussianMixture::diagonal({0.5, 0.5}, {Vector::Constant(1, -2.0), Vector::Constant(1, 2.0)},
                                     {Vector::Ones(1), Vector::Ones(1)}, true);
}

inline GaussianMixture single(const Vector& mean, const Matrix& cov)
{
    return GaussianMixture({{1.0, mean, cov}});
}

inline Vector random_vector(Rng& rng, std::size_t d, double scale = 1.0)
{
    Vector v(static_cast<Eigen::Index>(d));
    for (auto& x : v)
        x = scale * rng.gaussian();
    return v;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_rel_err(const Vector& a, const Vector& b)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
}

} // namespace sit::testing
