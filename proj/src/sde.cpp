#include "tokdyn/sde.hpp"

#include "tokdyn/errors.hpp"

#include <cmath>

namespace tokdyn {

namespace {

Mat project_columns(const Mat& base, const Mat& v) {
    const Eigen::RowVectorXd radial = (base.array() * v.array()).colwise().sum();
    return v - base * radial.asDiagonal();
}

std::int64_t step_count(double T, double dt) {
    const double ratio = T / dt;
    const auto rounded = static_cast<std::int64_t>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(rounded)) <= 1e-9 * std::max(1.0, ratio)) return rounded;
    return static_cast<std::int64_t>(std::ceil(ratio));
}

}  // namespace

void SdeParams::validate() const {
    law.validate();
    require(dt > 0.0 && std::isfinite(dt), ErrorCode::InvalidArgument, "dt must be > 0");
    require(modes >= 1, ErrorCode::InvalidArgument, "modes must be >= 1");
    require(alpha >= 0.0 && std::isfinite(alpha), ErrorCode::InvalidArgument, "alpha must be >= 0");
    if (variant == SdeVariant::GaussianDriftless) {
        require(law.centered_V(), ErrorCode::NonCenteredLaw, "GaussianDriftless requires mean_V = 0");
    } else if (law.has_mean_V() && law.sigma_A > 0.0 && beta.value() > 0.0) {
        require(drift_samples >= 1, ErrorCode::InvalidArgument, "drift_samples must be >= 1");
    }
}

Mat sde_step_field(const Mat& queries, const Mat& keys, const SdeParams& p, Stream& rng, double noise_sign) {
    FieldSampler sampler(p.law, p.beta, p.sampling);
    sampler.bind(queries, keys);
    const Index d = queries.rows();
    const Index q = queries.cols();

    Mat drift = Mat::Zero(d, q);
    if (p.variant == SdeVariant::General && p.law.has_mean_V()) {
        Mat mean_means;
        if (p.law.sigma_A == 0.0 || p.beta.value() == 0.0) {
            mean_means = sampler.sample_means(rng);
        } else {
            mean_means = Mat::Zero(d, q);
            for (std::size_t s = 0; s < p.drift_samples; ++s) mean_means += sampler.sample_means(rng);
            mean_means /= static_cast<double>(p.drift_samples);
        }
        drift = p.law.mean_V * mean_means;
    }

    const double scale = std::sqrt(p.alpha * p.dt / static_cast<double>(p.modes));
    Mat noise = Mat::Zero(d, q);
    if (sampler.shared_velocity() && p.variant == SdeVariant::GaussianDriftless &&
        p.scheme == SdeScheme::Projected) {
        Vec shared = Vec::Zero(d);
        for (int m = 0; m < p.modes; ++m) {
            const Vec xi = sampler.sample_shared_velocity(rng);
            const double z = noise_sign * rng.normal();
            shared.noalias() += z * xi;
        }
        noise.colwise() = shared;
        Mat next = queries + scale * noise;
        normalize_columns(next);
        return next;
    }
    Mat square_norms = Mat::Zero(1, q);
    for (int m = 0; m < p.modes; ++m) {
        Mat xi = sampler.sample_velocities(rng);
        if (p.variant == SdeVariant::General) xi -= drift;
        const double z = noise_sign * rng.normal();
        if (p.scheme == SdeScheme::ExplicitCorrector) {
            xi = project_columns(queries, xi);
            square_norms += xi.colwise().squaredNorm();
        }
        noise.noalias() += z * xi;
    }

    Mat next = queries + p.dt * project_columns(queries, drift) + scale * noise;
    if (p.scheme == SdeScheme::ExplicitCorrector) {
        const double correction = 0.5 * p.alpha * p.dt / static_cast<double>(p.modes);
        next -= queries * (correction * square_norms).asDiagonal();
        return next;
    }
    normalize_columns(next);
    return next;
}

TokenConfig sde_step(const TokenConfig& X, const SdeParams& p, Stream& rng) {
    require(X.d() == p.law.d, ErrorCode::InvalidArgument, "sde_step: dimension mismatch");
    Mat next = sde_step_field(X.matrix(), X.matrix(), p, rng);
    if (p.scheme == SdeScheme::ExplicitCorrector) return TokenConfig::from_directions(next);
    return TokenConfig(std::move(next));
}

Stream sde_step_stream(const SdeParams& p, std::int64_t step) {
    return RngKey(p.seed).derive(StreamTag::SdeMode, static_cast<std::uint64_t>(step)).stream();
}

Trajectory run_sde(const TokenConfig& X0, const SdeParams& p, double T, int stride, const StepObserver& observer) {
    p.validate();
    require(T >= 0.0 && std::isfinite(T), ErrorCode::InvalidArgument, "T must be >= 0");
    require(stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
    require(X0.d() == p.law.d, ErrorCode::InvalidArgument, "run_sde: dimension mismatch");
    Trajectory traj;
    traj.stride = stride;
    traj.times.push_back(0.0);
    traj.states.push_back(X0);
    traj.series.record(0.0, X0);

    const std::int64_t steps = T > 0.0 ? step_count(T, p.dt) : 0;
    TokenConfig X = X0;
    for (std::int64_t k = 0; k < steps; ++k) {
        Stream rng = sde_step_stream(p, k);
        X = sde_step(X, p, rng);
        const double t = p.dt * static_cast<double>(k + 1);
        traj.series.record(t, X);
        if ((k + 1) % stride == 0 || k + 1 == steps) {
            traj.times.push_back(t);
            traj.states.push_back(X);
        }
        if (observer) observer(k + 1, t, X);
    }
    return traj;
}

TaggedPairRun run_tagged_pair(Index n_bg, Index d, const SdeParams& p, double T, bool identical_tagged) {
    p.validate();
    require(n_bg >= 2, ErrorCode::InvalidArgument, "run_tagged_pair needs n_bg >= 2");
    require(d == p.law.d, ErrorCode::InvalidArgument, "run_tagged_pair: dimension mismatch");
    require(T >= 0.0, ErrorCode::InvalidArgument, "T must be >= 0");

    Stream init = RngKey(p.seed).derive(StreamTag::Init).stream();
    Mat all(d, n_bg + 2);
    all.leftCols(n_bg) = uniform_points(n_bg, d, init);
    all.rightCols(2) = uniform_points(2, d, init);
    if (identical_tagged) all.col(n_bg + 1) = all.col(n_bg);

    TaggedPairRun run;
    run.n_bg = n_bg;
    run.times.push_back(0.0);
    run.R.push_back(all.col(n_bg).dot(all.col(n_bg + 1)));

    const std::int64_t steps = T > 0.0 ? step_count(T, p.dt) : 0;
    Mat keys;
    for (std::int64_t k = 0; k < steps; ++k) {
        keys = all.leftCols(n_bg);
        Stream rng = sde_step_stream(p, k);
        all = sde_step_field(all, keys, p, rng);
        run.times.push_back(p.dt * static_cast<double>(k + 1));
        run.R.push_back(all.col(n_bg).dot(all.col(n_bg + 1)));
    }
    return run;
}

}  // namespace tokdyn
