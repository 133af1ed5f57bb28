#include "tokdyn/diagnostics.hpp"

#include "tokdyn/errors.hpp"
#include "tokdyn/parallel.hpp"
#include "tokdyn/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace tokdyn {

namespace {

// Gaps below this are rounding, not signal.
constexpr double kGapFloor = 1e-12;

double bump(double r) {
    const double r2 = r * r;
    if (r2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r2));
}

// Two-sided 95% Student t quantiles for 1..10 degrees of freedom.
double t_quantile_975(int dof) {
    static constexpr std::array<double, 10> kTable{12.706, 4.303, 3.182, 2.776, 2.571,
                                                   2.447,  2.365, 2.306, 2.262, 2.228};
    if (dof < 1) return std::numeric_limits<double>::quiet_NaN();
    if (dof <= 10) return kTable[static_cast<std::size_t>(dof - 1)];
    return 1.96 + 2.4 / dof;
}

RunningStats collect(const std::vector<double>& values) {
    RunningStats stats;
    for (double v : values) stats.push(v);
    return stats;
}

}  // namespace

std::vector<TestFunction> test_functions() {
    return {
        {"mean_overlap", [](const TokenConfig& X) { return mean_overlap(X); }},
        {"kappa", [](const TokenConfig& X) { return kappa(X); }},
        {"r12", [](const TokenConfig& X) { return X.token(0).dot(X.token(1)); }},
        {"bump", [](const TokenConfig& X) { return bump(X.token(0).dot(X.token(1))); }},
    };
}

TestFunction test_function(const std::string& name) {
    for (auto& f : test_functions()) {
        if (f.name == name) return f;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown test function '" + name + "'");
}

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorCode::InvalidArgument, "loglog_slope needs >= 2 points");
    const auto k = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(x[i] > 0.0 && y[i] > 0.0, ErrorCode::InvalidArgument, "loglog_slope needs positive data");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= k;
    my /= k;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[i]) - my);
    }
    SlopeFit fit;
    fit.points = static_cast<int>(x.size());
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() < 3) {
        fit.ci_low = fit.ci_high = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double resid = std::log(y[i]) - (fit.intercept + fit.slope * std::log(x[i]));
        sse += resid * resid;
    }
    const int dof = fit.points - 2;
    const double se = std::sqrt(sse / dof / sxx);
    const double half = t_quantile_975(dof) * se;
    fit.ci_low = fit.slope - half;
    fit.ci_high = fit.slope + half;
    return fit;
}

WeakErrorReport weak_error_sweep(const TokenConfig& X0, const WeakErrorSetup& setup, const std::vector<double>& etas) {
    require(etas.size() >= 3, ErrorCode::InvalidArgument, "weak_error_sweep needs >= 3 eta values");
    for (std::size_t e = 1; e < etas.size(); ++e) {
        require(etas[e] < etas[e - 1], ErrorCode::InvalidArgument, "eta values must be decreasing");
    }
    require(setup.trials >= 2, ErrorCode::InvalidArgument, "weak_error_sweep needs trials >= 2");
    require(setup.ref_dt_divisor >= 1, ErrorCode::InvalidArgument, "ref_dt_divisor must be >= 1");
    require(setup.alpha > 0.0 && setup.t_L > 0.0, ErrorCode::InvalidArgument, "alpha and t_L must be > 0");
    require(X0.d() == setup.d, ErrorCode::InvalidArgument, "weak_error_sweep: dimension mismatch");

    const TestFunction phi = test_function(setup.phi);
    const double d = static_cast<double>(setup.d);
    const double sigma_A = setup.sigma_A > 0.0 ? setup.sigma_A : 1.0 / std::sqrt(d);
    const RngKey root(setup.seed);

    SdeParams sde;
    sde.law = WeightLaw{.d = setup.d, .sigma_V = std::sqrt(setup.alpha / (d - 1.0)), .sigma_A = sigma_A, .mean_V = {}, .mean_A = {}};
    sde.beta = Temperature(setup.beta);
    sde.alpha = 1.0;
    sde.modes = setup.sde_modes;
    sde.variant = SdeVariant::GaussianDriftless;

    auto sde_expectation = [&](double dt, std::uint64_t tag, std::size_t e) {
        std::vector<double> values(setup.trials);
        parallel_for(setup.trials, setup.threads, [&](std::size_t trial) {
            SdeParams p = sde;
            p.dt = dt;
            p.seed = root.derive(StreamTag::Trial, e, trial, tag).value();
            const Trajectory traj = run_sde(X0, p, setup.t_L, std::numeric_limits<int>::max());
            values[trial] = phi.phi(traj.states.back());
        });
        return collect(values);
    };

    WeakErrorReport report;
    report.trials = setup.trials;
    report.seed = setup.seed;
    report.phi = setup.phi;
    for (std::size_t e = 0; e < etas.size(); ++e) {
        const double eta = etas[e];
        const auto L = static_cast<std::int64_t>(std::llround(setup.t_L / eta));
        require(L >= 1 && std::abs(static_cast<double>(L) * eta - setup.t_L) <= 1e-9 * setup.t_L,
                ErrorCode::InvalidArgument, "t_L must be an integer multiple of every eta");

        ChainParams chain;
        chain.law = WeightLaw{.d = setup.d, .sigma_V = std::sqrt(setup.alpha / (eta * (d - 1.0))), .sigma_A = sigma_A, .mean_V = {}, .mean_A = {}};
        chain.beta = Temperature(setup.beta);
        chain.eta = eta;
        chain.H = 1;
        chain.L = static_cast<int>(L);

        std::vector<double> chain_values(setup.trials);
        parallel_for(setup.trials, setup.threads, [&](std::size_t trial) {
            ChainParams p = chain;
            p.seed = root.derive(StreamTag::Trial, e, trial, 0u).value();
            const Trajectory traj = run_chain(X0, p, std::numeric_limits<int>::max());
            chain_values[trial] = phi.phi(traj.states.back());
        });
        const RunningStats chain_stats = collect(chain_values);
        const double dt = eta / setup.ref_dt_divisor;
        const RunningStats sde_stats = sde_expectation(dt, 1u, e);

        WeakErrorPoint point;
        point.eta = eta;
        point.L = L;
        point.sigma_V = chain.law.sigma_V;
        point.chain_mean = chain_stats.mean();
        point.chain_stderr = chain_stats.stderr_of_mean();
        point.sde_mean = sde_stats.mean();
        point.sde_stderr = sde_stats.stderr_of_mean();
        point.gap = std::abs(point.chain_mean - point.sde_mean);
        point.gap_stderr = std::hypot(point.chain_stderr, point.sde_stderr);
        point.censored = point.gap <= std::max(3.0 * point.gap_stderr, kGapFloor);
        if (setup.reference_self_check) {
            const RunningStats fine = sde_expectation(dt / 2.0, 2u, e);
            point.self_gap = std::abs(sde_stats.mean() - fine.mean());
            point.self_gap_stderr = std::hypot(sde_stats.stderr_of_mean(), fine.stderr_of_mean());
        }
        report.points.push_back(point);
    }

    const bool any_signal = std::any_of(report.points.begin(), report.points.end(),
                                        [](const WeakErrorPoint& p) { return p.gap > std::max(p.gap_stderr, kGapFloor); });
    require(any_signal, ErrorCode::InsufficientTrials,
            "Monte-Carlo error exceeds the measured gap at every eta; increase trials");

    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : report.points) {
        if (p.censored) continue;
        xs.push_back(p.eta);
        ys.push_back(p.gap);
    }
    report.fitted_points = static_cast<int>(xs.size());
    if (xs.size() >= 2) {
        const SlopeFit fit = loglog_slope(xs, ys);
        report.slope = fit.slope;
        report.slope_ci_low = fit.ci_low;
        report.slope_ci_high = fit.ci_high;
    } else {
        report.slope = report.slope_ci_low = report.slope_ci_high = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

GramDriftCheck gram_drift_check(const TokenConfig& X, const SdeParams& p, std::size_t pairs,
                                std::size_t s_samples, int threads) {
    p.validate();
    require(pairs >= 2, ErrorCode::InvalidArgument, "gram_drift_check needs pairs >= 2");
    require(p.variant == SdeVariant::GaussianDriftless && p.scheme == SdeScheme::Projected,
            ErrorCode::InvalidArgument, "gram_drift_check needs the projected GaussianDriftless scheme");
    const Index n = X.n();
    const Mat R0 = gram(X).entries();
    const RngKey root(p.seed);

    constexpr std::size_t kShards = 64;
    std::vector<MatrixStats> shards(kShards, MatrixStats(n, n));
    parallel_for(kShards, threads, [&](std::size_t shard) {
        for (std::size_t k = shard; k < pairs; k += kShards) {
            Stream rng = root.derive(StreamTag::Trial, k).stream();
            Stream mirror = rng;
            const Mat plus = sde_step_field(X.matrix(), X.matrix(), p, rng, 1.0);
            const Mat minus = sde_step_field(X.matrix(), X.matrix(), p, mirror, -1.0);
            const Mat delta = 0.5 * (plus.transpose() * plus + minus.transpose() * minus) - R0;
            shards[shard].push(delta / p.dt);
        }
    });
    MatrixStats total(n, n);
    for (const auto& shard : shards) total.merge(shard);

    Stream s_rng = root.derive(StreamTag::Estimator).stream();
    const MatrixEstimate s = mean_overlap_kernel(p.law, X, p.beta, s_samples, s_rng);
    const Vec s_diag = s.mean.diagonal();
    const GramMatrix R(R0);

    GramDriftCheck check;
    check.empirical = total.mean();
    check.empirical_stderr = total.stderr_of_mean();
    check.formula = gram_drift(R, s_diag, s.mean, X.d());
    // The formula is linear in s; propagate the standard errors coefficient-wise.
    const double d = static_cast<double>(X.d());
    check.formula_stderr = Mat::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const double r = R0(i, j);
            const double a = (d - 2.0 + r * r) / d * s.stderr(i, j);
            const double b = (d - 1.0) / (2.0 * d) * std::abs(r) * std::hypot(s.stderr(i, i), s.stderr(j, j));
            check.formula_stderr(i, j) = std::hypot(a, b);
        }
    }
    check.pairs = pairs;
    return check;
}

double max_overlap_deviation(const TokenConfig& X, double gamma) {
    const Mat R = X.matrix().transpose() * X.matrix();
    double worst = 0.0;
    for (Index j = 0; j < R.cols(); ++j) {
        for (Index i = 0; i < j; ++i) worst = std::max(worst, std::abs(R(i, j) - gamma));
    }
    return worst;
}

ScalarPath overlap_deviation(const Trajectory& traj, const ScalarPath& reference) {
    require(traj.times.size() == traj.states.size(), ErrorCode::InvalidArgument, "malformed trajectory");
    ScalarPath out;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double gamma = reference.at(traj.times[k]);
        out.times.push_back(traj.times[k]);
        out.values.push_back(max_overlap_deviation(traj.states[k], gamma));
    }
    return out;
}

CollapseMetrics collapse_metrics(const TokenConfig& X) {
    const Mat R = gram(X).entries();
    const Eigen::SelfAdjointEigenSolver<Mat> eig(R, Eigen::EigenvaluesOnly);
    const Vec lambda = eig.eigenvalues().cwiseMax(0.0);
    CollapseMetrics metrics;
    metrics.m = mean_overlap(X);
    metrics.participation_ratio = lambda.sum() * lambda.sum() / lambda.squaredNorm();
    metrics.max_offdiag = -std::numeric_limits<double>::infinity();
    metrics.min_offdiag = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < R.cols(); ++j) {
        for (Index i = 0; i < j; ++i) {
            metrics.max_offdiag = std::max(metrics.max_offdiag, R(i, j));
            metrics.min_offdiag = std::min(metrics.min_offdiag, R(i, j));
        }
    }
    return metrics;
}

}  // namespace tokdyn
