#include "tokdyn/reductions.hpp"

#include "tokdyn/errors.hpp"
#include "tokdyn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tokdyn {

namespace {

std::int64_t step_count(double T, double dt) {
    const double ratio = T / dt;
    const auto rounded = static_cast<std::int64_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(rounded)) <= 1e-9 * std::max(1.0, ratio)) return rounded;
    return static_cast<std::int64_t>(std::ceil(ratio));
}

bool uniform_attention(Temperature beta, const WeightLaw& law) {
    return beta.value() == 0.0 || (law.sigma_A == 0.0 && !law.has_mean_A());
}

struct FgSampler {
    FgSampler(double gamma, Index n, Index d, Temperature beta, const WeightLaw& law, Stream& rng)
        : config(simplex_config(n, d, gamma, &rng)),
          pair(config.matrix().leftCols(2)),
          sampler(law, beta) {
        require(law.d == d, ErrorCode::InvalidArgument, "fg_estimate: law dimension differs from d");
        sampler.bind(pair, config.matrix());
    }

    void draw(Stream& rng) {
        const Mat pi = sampler.sample_attention(rng);
        f.push(pi.col(0).squaredNorm());
        g.push(pi.col(0).dot(pi.col(1)));
    }

    [[nodiscard]] FgEstimate estimate() const {
        return FgEstimate{f.mean(), g.mean(), f.stderr_of_mean(), g.stderr_of_mean(), f.count()};
    }

    TokenConfig config;
    Mat pair;
    FieldSampler sampler;
    RunningStats f;
    RunningStats g;
};

FgEstimate uniform_fg(Index n, std::size_t samples) {
    const double inv = 1.0 / static_cast<double>(n);
    return FgEstimate{inv, inv, 0.0, 0.0, samples};
}

void check_simplex_args(double gamma, Index n, Index d) {
    require(d >= n, ErrorCode::DimensionTooSmall, "simplex configuration needs d >= n");
    require(n >= 2, ErrorCode::InvalidArgument, "simplex configuration needs n >= 2");
    require(gamma > -1.0 / static_cast<double>(n - 1) && gamma <= 1.0, ErrorCode::OverlapOutOfRange,
            "gamma outside (-1/(n-1), 1]");
}

}  // namespace

double ScalarPath::at(double t) const {
    require(!times.empty() && times.size() == values.size(), ErrorCode::InvalidArgument, "ScalarPath is empty");
    const double slack = 1e-12 * std::max(1.0, std::abs(times.back()));
    require(t >= times.front() - slack && t <= times.back() + slack, ErrorCode::TimeMismatch,
            "time outside the path horizon");
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return (1.0 - w) * values[lo] + w * values[hi];
}

FgEstimate fg_estimate(double gamma, Index n, Index d, Temperature beta, const WeightLaw& law, std::size_t samples,
                       Stream& rng) {
    check_simplex_args(gamma, n, d);
    require(samples >= 2, ErrorCode::InvalidArgument, "fg_estimate needs samples >= 2");
    if (gamma == 1.0 || uniform_attention(beta, law)) return uniform_fg(n, samples);
    FgSampler fg(gamma, n, d, beta, law, rng);
    for (std::size_t s = 0; s < samples; ++s) fg.draw(rng);
    return fg.estimate();
}

FgEstimate fg_estimate_adaptive(double gamma, Index n, Index d, Temperature beta, const WeightLaw& law,
                                double target_stderr, std::size_t max_samples, Stream& rng) {
    check_simplex_args(gamma, n, d);
    require(target_stderr > 0.0, ErrorCode::InvalidArgument, "target_stderr must be > 0");
    constexpr std::size_t kBatch = 512;
    if (gamma == 1.0 || uniform_attention(beta, law)) return uniform_fg(n, 0);
    FgSampler fg(gamma, n, d, beta, law, rng);
    while (fg.f.count() < max_samples) {
        for (std::size_t s = 0; s < kBatch; ++s) fg.draw(rng);
        const FgEstimate e = fg.estimate();
        if (e.stderr_f <= target_stderr && e.stderr_g <= target_stderr) break;
    }
    return fg.estimate();
}

double simplex_drift(double gamma, double f, double g) {
    return gamma + (1.0 - gamma) * g - gamma * (gamma + (1.0 - gamma) * f);
}

double simplex_drift(double gamma, const FgEstimate& fg) { return simplex_drift(gamma, fg.f_hat, fg.g_hat); }

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    require(x_.size() == y_.size() && x_.size() >= 2, ErrorCode::InvalidArgument,
            "MonotoneCubic needs matching sizes >= 2");
    const std::size_t k = x_.size();
    std::vector<double> h(k - 1);
    std::vector<double> delta(k - 1);
    for (std::size_t i = 0; i + 1 < k; ++i) {
        h[i] = x_[i + 1] - x_[i];
        require(h[i] > 0.0, ErrorCode::InvalidArgument, "MonotoneCubic needs increasing abscissae");
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    slope_.assign(k, 0.0);
    slope_.front() = delta.front();
    slope_.back() = delta.back();
    for (std::size_t i = 1; i + 1 < k; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) continue;
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        slope_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
}

double MonotoneCubic::operator()(double t) const {
    if (t <= x_.front()) return y_.front();
    if (t >= x_.back()) return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const auto i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2.0 * s3 - 3.0 * s2 + 1.0) * y_[i] + (s3 - 2.0 * s2 + s) * h * slope_[i] +
           (-2.0 * s3 + 3.0 * s2) * y_[i + 1] + (s3 - s2) * h * slope_[i + 1];
}

double FgTable::drift(double g) const { return simplex_drift(g, f_interp(g), g_interp(g)); }

double FgTable::max_stderr() const {
    double worst = 0.0;
    for (const auto& e : fg) worst = std::max({worst, e.stderr_f, e.stderr_g});
    return worst;
}

FgTable build_fg_table(double gamma0, Index n, Index d, Temperature beta, const WeightLaw& law, int grid_points,
                       std::size_t samples, Stream& rng) {
    check_simplex_args(gamma0, n, d);
    require(gamma0 < 1.0, ErrorCode::OverlapOutOfRange, "gamma0 must be < 1");
    require(grid_points >= 2, ErrorCode::InvalidArgument, "grid_points must be >= 2");
    constexpr double kTargetStderr = 1e-3;
    constexpr std::size_t kMaxAdaptive = 1u << 22;

    FgTable table;
    std::vector<double> f_values;
    std::vector<double> g_values;
    for (int k = 0; k < grid_points; ++k) {
        const double gamma =
            k + 1 == grid_points ? 1.0 : gamma0 + (1.0 - gamma0) * static_cast<double>(k) / (grid_points - 1);
        const FgEstimate e = samples > 0 ? fg_estimate(gamma, n, d, beta, law, samples, rng)
                                         : fg_estimate_adaptive(gamma, n, d, beta, law, kTargetStderr,
                                                                kMaxAdaptive, rng);
        table.gamma.push_back(gamma);
        table.fg.push_back(e);
        f_values.push_back(e.f_hat);
        g_values.push_back(e.g_hat);
    }
    table.f_interp = MonotoneCubic(table.gamma, f_values);
    table.g_interp = MonotoneCubic(table.gamma, g_values);
    return table;
}

ScalarPath rk4_path(const std::function<double(double)>& rhs, double y0, double T, double dt) {
    require(dt > 0.0 && T >= 0.0, ErrorCode::InvalidArgument, "rk4_path needs dt > 0 and T >= 0");
    const std::int64_t steps = T > 0.0 ? step_count(T, dt) : 0;
    ScalarPath path;
    path.times.reserve(static_cast<std::size_t>(steps + 1));
    path.values.reserve(static_cast<std::size_t>(steps + 1));
    path.times.push_back(0.0);
    path.values.push_back(y0);
    double y = y0;
    for (std::int64_t k = 0; k < steps; ++k) {
        const double k1 = rhs(y);
        const double k2 = rhs(y + 0.5 * dt * k1);
        const double k3 = rhs(y + 0.5 * dt * k2);
        const double k4 = rhs(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        path.times.push_back(dt * static_cast<double>(k + 1));
        path.values.push_back(y);
    }
    return path;
}

ScalarPath simplex_ode_solve(const FgTable& table, double gamma0, double T, double dt) {
    const auto rhs = [&table](double g) { return table.drift(g); };
    ScalarPath coarse = rk4_path(rhs, gamma0, T, dt);
    const ScalarPath fine = rk4_path(rhs, gamma0, T, dt / 10.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < coarse.values.size(); ++k) {
        worst = std::max(worst, std::abs(coarse.values[k] - fine.values[10 * k]));
    }
    require(worst <= 1e-6, ErrorCode::NumericalFailure,
            "simplex ODE: dt/10 refinement differs by " + std::to_string(worst));
    return coarse;
}

ScalarPath simplex_ode_solve(double gamma0, Index n, Index d, Temperature beta, const WeightLaw& law, double T,
                             double dt, int grid_points, std::size_t samples, Stream& rng) {
    const FgTable table = build_fg_table(gamma0, n, d, beta, law, grid_points, samples, rng);
    return simplex_ode_solve(table, gamma0, T, dt);
}

double simplex_beta0_exact(double gamma0, Index n, double t) {
    const double c = 1.0 - 1.0 / static_cast<double>(n);
    const double w0 = 1.0 - gamma0;
    if (w0 == 0.0) return 1.0;
    const double w = 1.0 / (c + (1.0 / w0 - c) * std::exp(t));
    return 1.0 - w;
}

double logistic_solution(double u0, double t) {
    require(u0 >= 0.0 && u0 <= 1.0, ErrorCode::InvalidArgument, "logistic_solution needs u0 in [0, 1]");
    if (u0 == 0.0) return 0.0;
    return u0 / (u0 + (1.0 - u0) * std::exp(-t));
}

Mat gram_drift(const GramMatrix& R, const Vec& s_diag, const Mat& s_pair, Index d) {
    const Index n = R.n();
    require(s_diag.size() == n && s_pair.rows() == n && s_pair.cols() == n, ErrorCode::InvalidArgument,
            "gram_drift: size mismatch");
    require(d >= 2, ErrorCode::DimensionTooSmall, "gram_drift needs d >= 2");
    const double dd = static_cast<double>(d);
    Mat D(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const double r = R(i, j);
            D(i, j) = (dd - 2.0 + r * r) / dd * s_pair(i, j) - (dd - 1.0) / (2.0 * dd) * r * (s_diag(i) + s_diag(j));
        }
    }
    return D;
}

namespace {

// One Euler-Maruyama step with clamp and absorption; returns true once absorbed.
inline bool logistic_sde_step(double& u, double dt, double sqrt_2dt, double z) {
    const double w = 1.0 - u * u;
    u += -u * w * dt + sqrt_2dt * w * z;
    u = std::clamp(u, -1.0, 1.0);
    if (std::abs(u) >= 1.0 - kAbsorptionBand) {
        u = u > 0.0 ? 1.0 : -1.0;
        return true;
    }
    return false;
}

}  // namespace

ScalarPath logistic_sde_path(double u0, double T, double dt, Stream& rng) {
    require(u0 >= -1.0 && u0 <= 1.0, ErrorCode::InvalidArgument, "logistic_sde_path needs u0 in [-1, 1]");
    require(dt > 0.0 && dt <= 1e-2, ErrorCode::InvalidArgument, "logistic_sde_path needs 0 < dt <= 1e-2");
    const std::int64_t steps = T > 0.0 ? step_count(T, dt) : 0;
    const double sqrt_2dt = std::sqrt(2.0 * dt);
    ScalarPath path;
    path.times.reserve(static_cast<std::size_t>(steps + 1));
    path.values.reserve(static_cast<std::size_t>(steps + 1));
    double u = u0;
    bool frozen = std::abs(u) >= 1.0 - kAbsorptionBand;
    if (frozen) u = u > 0.0 ? 1.0 : -1.0;
    path.times.push_back(0.0);
    path.values.push_back(u);
    for (std::int64_t k = 0; k < steps; ++k) {
        if (!frozen) frozen = logistic_sde_step(u, dt, sqrt_2dt, rng.normal());
        path.times.push_back(dt * static_cast<double>(k + 1));
        path.values.push_back(u);
    }
    return path;
}

double logistic_sde_terminal(double u0, double T, double dt, Stream& rng) {
    require(u0 >= -1.0 && u0 <= 1.0, ErrorCode::InvalidArgument, "logistic_sde_terminal needs u0 in [-1, 1]");
    require(dt > 0.0 && dt <= 1e-2, ErrorCode::InvalidArgument, "logistic_sde_terminal needs 0 < dt <= 1e-2");
    const std::int64_t steps = T > 0.0 ? step_count(T, dt) : 0;
    const double sqrt_2dt = std::sqrt(2.0 * dt);
    double u = u0;
    if (std::abs(u) >= 1.0 - kAbsorptionBand) return u > 0.0 ? 1.0 : -1.0;
    for (std::int64_t k = 0; k < steps; ++k) {
        if (logistic_sde_step(u, dt, sqrt_2dt, rng.normal())) break;
    }
    return u;
}

double logistic_hitting_probability(double u0) {
    require(u0 >= -1.0 && u0 <= 1.0, ErrorCode::InvalidArgument, "hitting probability needs u0 in [-1, 1]");
    return std::asin(u0) / std::numbers::pi + 0.5;
}

UnitVector laplace_limit(const Mat& A, const UnitVector& x) {
    require(A.cols() == x.dim(), ErrorCode::InvalidArgument, "laplace_limit: dimension mismatch");
    return normalize(A * x.coords());
}

double delta_expansion(double r, Index d) {
    require(std::abs(r) <= 1.0, ErrorCode::InvalidArgument, "delta_expansion needs |r| <= 1");
    require(d >= 1, ErrorCode::InvalidArgument, "delta_expansion needs d >= 1");
    return r + (r * r * r - r) / (2.0 * static_cast<double>(d));
}

ScalarEstimate normalized_overlap_mc(double r, Index d, std::size_t draws, Stream& rng) {
    require(std::abs(r) <= 1.0, ErrorCode::InvalidArgument, "normalized_overlap_mc needs |r| <= 1");
    require(d >= 2, ErrorCode::DimensionTooSmall, "normalized_overlap_mc needs d >= 2");
    require(draws >= 2, ErrorCode::InvalidArgument, "normalized_overlap_mc needs draws >= 2");
    Eigen::Matrix2d pair_gram;
    pair_gram << 1.0, r, r, 1.0;
    const Mat input_factor = psd_factor(pair_gram);
    Mat z(d, 2);
    RunningStats stats;
    for (std::size_t s = 0; s < draws; ++s) {
        rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
        const Mat u = z * input_factor.transpose();  // W'^T [x y]
        const Mat output_factor = psd_factor(u.transpose() * u);
        rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
        const Mat v = z * output_factor.transpose();  // W W'^T [x y]
        stats.push(v.col(0).dot(v.col(1)) / (v.col(0).norm() * v.col(1).norm()));
    }
    return ScalarEstimate{stats.mean(), stats.stderr_of_mean(), draws};
}

}  // namespace tokdyn
