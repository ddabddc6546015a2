#include "sit/metrics.hpp"

#include "sit/errors.hpp"
#include "sit/format.hpp"
#include "sit/rng.hpp"
#include "sit/toybox.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace sit {

namespace {

void check_pair(const Samples& a, const Samples& b)
{
    if (a.rows() == 0 || b.rows() == 0)
        throw DomainError("energy distance needs nonempty sample sets");
    if (a.cols() != b.cols())
        throw DomainError("sample sets differ in dimension");
}

/// sum over ordered pairs |z_i - z_j| of an ascending sequence.
double sorted_pair_sum(const std::vector<double>& sorted)
{
    const auto n = static_cast<double>(sorted.size());
    double total = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k)
        total += sorted[k] * (2.0 * static_cast<double>(k) - (n - 1.0));
    return 2.0 * total;
}

std::vector<double> sorted_column(const Samples& x)
{
    std::vector<double> v(x.data(), x.data() + x.rows());
    std::sort(v.begin(), v.end());
    return v;
}

double energy_1d(const Samples& a, const Samples& b)
{
    const auto sa = sorted_column(a);
    const auto sb = sorted_column(b);
    std::vector<double> pooled(sa.size() + sb.size());
    std::merge(sa.begin(), sa.end(), sb.begin(), sb.end(), pooled.begin());
    const double ta = sorted_pair_sum(sa);
    const double tb = sorted_pair_sum(sb);
    const double cross = 0.5 * (sorted_pair_sum(pooled) - ta - tb);
    const auto n = static_cast<double>(sa.size());
    const auto m = static_cast<double>(sb.size());
    return std::max(0.0, 2.0 * cross / (n * m) - ta / (n * n) - tb / (m * m));
}

double distance(const Samples& x, Eigen::Index i, const Samples& y, Eigen::Index j)
{
    return (x.row(i) - y.row(j)).norm();
}

/// sum_{i,j} |x_i - y_j| with per-row partial sums reduced in index order.
double pair_sum(const Samples& x, const Samples& y, Exec exec)
{
    std::vector<double> rows(static_cast<std::size_t>(x.rows()));
    const auto n = static_cast<long long>(x.rows());
    auto row = [&](long long i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < y.rows(); ++j)
            acc += distance(x, static_cast<Eigen::Index>(i), y, j);
        rows[static_cast<std::size_t>(i)] = acc;
    };
    if (exec == Exec::Serial) {
        for (long long i = 0; i < n; ++i)
            row(i);
    } else {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i)
            row(i);
    }
    return std::accumulate(rows.begin(), rows.end(), 0.0);
}

} // namespace

double energy_distance(const Samples& a, const Samples& b, Exec exec)
{
    check_pair(a, b);
    if (a.cols() == 1)
        return energy_1d(a, b);
    const auto n = static_cast<double>(a.rows());
    const auto m = static_cast<double>(b.rows());
    const double ed = 2.0 * pair_sum(a, b, exec) / (n * m) - pair_sum(a, a, exec) / (n * n) - pair_sum(b, b, exec) / (m * m);
    return std::max(0.0, ed);
}

double reference::energy_distance(const Samples& a, const Samples& b)
{
    check_pair(a, b);
    auto mean_distance = [](const Samples& x, const Samples& y) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < y.rows(); ++j) {
                double sq = 0.0;
                for (Eigen::Index k = 0; k < x.cols(); ++k) {
                    const double diff = x(i, k) - y(j, k);
                    sq += diff * diff;
                }
                total += std::sqrt(sq);
            }
        return total / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
    };
    return 2.0 * mean_distance(a, b) - mean_distance(a, a) - mean_distance(b, b);
}

double PermutationTest::null_quantile(double q) const
{
    if (null_statistics.empty())
        return 0.0;
    std::vector<double> sorted = null_statistics;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()))) ;
    return sorted[std::min(sorted.size() - 1, idx == 0 ? 0 : idx - 1)];
}

PermutationTest energy_permutation_test(const Samples& a, const Samples& b, std::size_t permutations,
                                        std::uint64_t seed)
{
    check_pair(a, b);
    const auto n = static_cast<std::size_t>(a.rows());
    const auto m = static_cast<std::size_t>(b.rows());
    const std::size_t N = n + m;
    Samples pooled(static_cast<Eigen::Index>(N), a.cols());
    pooled.topRows(a.rows()) = a;
    pooled.bottomRows(b.rows()) = b;

    PermutationTest result;
    result.statistic = energy_distance(a, b);
    result.null_statistics.resize(permutations);

    std::vector<std::size_t> labels(N);
    std::iota(labels.begin(), labels.end(), 0);
    Rng rng(seed);

    if (a.cols() == 1) {
        // Sort once; each permutation is a relabelling scanned in order.
        std::vector<std::size_t> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled(i, 0) < pooled(j, 0); });
        std::vector<double> z(N);
        for (std::size_t k = 0; k < N; ++k)
            z[k] = pooled(static_cast<Eigen::Index>(order[k]), 0);
        const double total = sorted_pair_sum(z);
        std::vector<char> in_a(N);
        for (std::size_t p = 0; p < permutations; ++p) {
            std::shuffle(labels.begin(), labels.end(), rng.engine());
            std::fill(in_a.begin(), in_a.end(), 0);
            for (std::size_t k = 0; k < n; ++k)
                in_a[labels[k]] = 1;
            double sa = 0.0, sb = 0.0;
            double ca = 0.0, cb = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                if (in_a[order[k]]) {
                    sa += z[k] * (2.0 * ca - (static_cast<double>(n) - 1.0));
                    ca += 1.0;
                } else {
                    sb += z[k] * (2.0 * cb - (static_cast<double>(m) - 1.0));
                    cb += 1.0;
                }
            }
            const double ta = 2.0 * sa, tb = 2.0 * sb;
            const double cross = 0.5 * (total - ta - tb);
            const auto dn = static_cast<double>(n), dm = static_cast<double>(m);
            result.null_statistics[p] = std::max(0.0, 2.0 * cross / (dn * dm) - ta / (dn * dn) - tb / (dm * dm));
        }
    } else {
        for (std::size_t p = 0; p < permutations; ++p) {
            std::shuffle(labels.begin(), labels.end(), rng.engine());
            Samples pa(static_cast<Eigen::Index>(n), a.cols()), pb(static_cast<Eigen::Index>(m), a.cols());
            for (std::size_t k = 0; k < n; ++k)
                pa.row(static_cast<Eigen::Index>(k)) = pooled.row(static_cast<Eigen::Index>(labels[k]));
            for (std::size_t k = 0; k < m; ++k)
                pb.row(static_cast<Eigen::Index>(k)) = pooled.row(static_cast<Eigen::Index>(labels[n + k]));
            result.null_statistics[p] = energy_distance(pa, pb);
        }
    }
    std::size_t exceed = 0;
    for (double s : result.null_statistics)
        if (s >= result.statistic)
            ++exceed;
    result.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + permutations);
    return result;
}

std::vector<double> ks_statistics(const Samples& a, const Samples& b)
{
    check_pair(a, b);
    std::vector<double> out;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
        std::vector<double> x(static_cast<std::size_t>(a.rows())), y(static_cast<std::size_t>(b.rows()));
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            x[static_cast<std::size_t>(i)] = a(i, k);
        for (Eigen::Index i = 0; i < b.rows(); ++i)
            y[static_cast<std::size_t>(i)] = b(i, k);
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        std::size_t i = 0, j = 0;
        double best = 0.0;
        while (i < x.size() && j < y.size()) {
            const double v = std::min(x[i], y[j]);
            while (i < x.size() && x[i] == v)
                ++i;
            while (j < y.size() && y[j] == v)
                ++j;
            const double diff = std::abs(static_cast<double>(i) / static_cast<double>(x.size()) -
                                         static_cast<double>(j) / static_cast<double>(y.size()));
            best = std::max(best, diff);
        }
        out.push_back(best);
    }
    return out;
}

std::vector<double> mode_occupancy(const Samples& x, const GaussianMixture& gmm)
{
    if (static_cast<std::size_t>(x.cols()) != gmm.dim())
        throw DomainError("samples and mixture differ in dimension");
    std::vector<double> counts(gmm.size(), 0.0);
    if (x.rows() == 0)
        return counts;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < gmm.size(); ++k) {
            const double dist = (x.row(i).transpose() - gmm.mean(k)).squaredNorm();
            if (dist < best_d) {
                best_d = dist;
                best = k;
            }
        }
        counts[best] += 1.0;
    }
    for (double& c : counts)
        c /= static_cast<double>(x.rows());
    return counts;
}

PathLength path_length(const FieldModel& field, const Samples& data, const std::vector<double>& t_grid,
                       std::uint64_t seed)
{
    if (t_grid.size() < 2)
        throw DomainError("path length needs at least two grid times");
    if (static_cast<std::size_t>(data.cols()) != field.dim())
        throw DomainError("path length data dimension mismatch");
    const ConvertedField velocity(field, Prediction::Velocity);
    const Schedule& s = field.schedule();
    const auto n = data.rows();
    const auto d = data.cols();

    Samples eps(n, d);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < eps.size(); ++i)
        eps.data()[i] = rng.gaussian();

    Vector per_path = Vector::Zero(n);
    Vector previous;
    Samples x_t, v;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double t = t_grid[k];
        x_t = s.alpha(t) * data + s.sigma(t) * eps;
        velocity.evaluate_batch(x_t, t, ClassLabel{}, v);
        Vector sq = v.rowwise().squaredNorm();
        if (k > 0)
            per_path += 0.5 * (t_grid[k] - t_grid[k - 1]) * (previous + sq);
        previous = std::move(sq);
    }
    const double sign = t_grid.back() >= t_grid.front() ? 1.0 : -1.0;
    per_path *= sign;
    PathLength out;
    out.value = per_path.mean();
    if (n > 1) {
        const double var = (per_path.array() - out.value).square().sum() / static_cast<double>(n - 1);
        out.standard_error = std::sqrt(var / static_cast<double>(n));
    }
    return out;
}

PathLength path_length(const FieldModel& field, const GaussianMixture& data, std::size_t n_mc,
                       const std::vector<double>& t_grid, std::uint64_t seed)
{
    if (n_mc == 0)
        throw DomainError("path length needs n_mc > 0");
    return path_length(field, draw(data, n_mc, derive_seed(seed, 1)).x, t_grid, derive_seed(seed, 2));
}

double kl_integrand(double loss, double w, double inv_lambda_sigma, double eta)
{
    if (!(w > 0.0))
        return std::numeric_limits<double>::infinity();
    if (std::isinf(w)) {
        // Only the w^KL limit at alpha = 0 reaches here: L/w -> 0 and
        // w inv^2 / 4 = inv / 2 -> 0; the cost term diverges unless eta = 0.
        return eta > 0.0 ? std::numeric_limits<double>::infinity() : loss * inv_lambda_sigma;
    }
    const double factor = 1.0 + 0.5 * w * inv_lambda_sigma;
    return 0.5 * loss / w * factor * factor + eta * w;
}

double kl_integrand_argmin(double loss, double inv_lambda_sigma, double eta)
{
    const double c = 0.5 * inv_lambda_sigma;
    return std::sqrt(loss / (loss * c * c + 2.0 * eta));
}

double kl_integrand_min(double loss, double inv_lambda_sigma, double eta)
{
    const double c = 0.5 * inv_lambda_sigma;
    return loss * c + std::sqrt(loss * (loss * c * c + 2.0 * eta));
}

double inverse_lambda_sigma(const Schedule& s, double t)
{
    const double sig = s.sigma(t);
    const double a = s.alpha(t);
    if (sig == 0.0)
        return std::numeric_limits<double>::infinity();
    // sigma_dot throws for SBDM-VP at t = 0, where sigma = 0 was handled above.
    return a / (sig * (s.sigma_dot(t) * a - s.alpha_dot(t) * sig));
}

double kl_bound(const LossProfile& profile, const Schedule& s, const DiffusionCoefficient& diffusion,
                std::optional<double> eta, double t_lo, double t_hi, std::size_t intervals)
{
    if (profile.empty())
        throw ConfigError("KL bound requires a per-time loss profile L_t");
    if (!(t_lo < t_hi) || t_lo < 0.0 || t_hi > 1.0)
        throw DomainError("KL bound window must satisfy 0 <= t_lo < t_hi <= 1");
    if (intervals == 0)
        throw DomainError("KL bound needs at least one interval");
    const double cost = eta.value_or(0.0);
    const double h = (t_hi - t_lo) / static_cast<double>(intervals);
    double total = 0.0;
    for (std::size_t k = 0; k <= intervals; ++k) {
        const double t = k == intervals ? t_hi : t_lo + h * static_cast<double>(k);
        double wt;
        try {
            wt = w(diffusion, s, t);
        } catch (const SingularityError&) {
            if (diffusion.kind() == DiffusionKind::KL && s.alpha(t) == 0.0)
                wt = std::numeric_limits<double>::infinity();
            else
                return std::numeric_limits<double>::infinity();
        }
        const double value = kl_integrand(profile(t), wt, inverse_lambda_sigma(s, t), cost);
        if (!std::isfinite(value))
            return std::numeric_limits<double>::infinity();
        total += (k == 0 || k == intervals ? 0.5 : 1.0) * value;
    }
    return total * h;
}

void MetricReport::set(const std::string& name, double value)
{
    set_text(name, format_double(value));
}

void MetricReport::set_text(const std::string& name, const std::string& value)
{
    for (auto& [k, v] : entries_)
        if (k == name) {
            v = value;
            return;
        }
    entries_.emplace_back(name, value);
}

std::optional<double> MetricReport::get(const std::string& name) const
{
    for (const auto& [k, v] : entries_)
        if (k == name) {
            try {
                return parse_double(v);
            } catch (const ConfigError&) {
                return std::nullopt;
            }
        }
    return std::nullopt;
}

void MetricReport::write_text(std::ostream& out) const
{
    for (const auto& [k, v] : entries_)
        out << k << ' ' << v << '\n';
}

void MetricReport::write_json(std::ostream& out) const
{
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [k, v] : entries_) {
        try {
            const double x = parse_double(v);
            if (std::isfinite(x))
                doc[k] = x;
            else
                doc[k] = v;
        } catch (const ConfigError&) {
            doc[k] = v;
        }
    }
    out << doc.dump(2) << '\n';
}

} // namespace sit
