#include "tokdyn/chain.hpp"

#include "tokdyn/errors.hpp"

#include <cmath>

namespace tokdyn {

void ChainParams::validate() const {
    law.validate();
    require(eta > 0.0 && std::isfinite(eta), ErrorCode::InvalidArgument, "eta must be > 0");
    require(H >= 1, ErrorCode::InvalidArgument, "H must be >= 1");
    require(L >= 0, ErrorCode::InvalidArgument, "L must be >= 0");
}

void OrderSeries::record(double t, const TokenConfig& X) {
    const double m_now = mean_overlap(X);
    time.push_back(t);
    m.push_back(m_now);
    kappa.push_back(m_now / static_cast<double>(X.d()));
    r12.push_back(X.token(0).dot(X.token(1)));
}

TokenConfig layer_step(const TokenConfig& X, const std::vector<HeadWeights>& heads, double eta, Temperature beta) {
    require(!heads.empty(), ErrorCode::InvalidArgument, "layer_step needs at least one head");
    const Mat& tokens = X.matrix();
    Mat update = Mat::Zero(X.d(), X.n());
    for (const auto& head : heads) {
        require(head.V.rows() == X.d() && head.A.rows() == X.d(), ErrorCode::InvalidArgument,
                "layer_step: head dimension mismatch");
        update.noalias() += velocities(head, tokens, tokens, beta.value());
    }
    Mat next = tokens + (eta / static_cast<double>(heads.size())) * update;
    normalize_columns(next);
    return TokenConfig(std::move(next));
}

std::vector<HeadWeights> chain_layer_heads(const ChainParams& p, std::int64_t layer) {
    Stream rng = RngKey(p.seed).derive(StreamTag::Layer, static_cast<std::uint64_t>(layer)).stream();
    return sample_layer(p.law, p.H, rng);
}

namespace {

TokenConfig reduced_layer_step(const TokenConfig& X, const ChainParams& p, std::int64_t layer) {
    Stream rng = RngKey(p.seed).derive(StreamTag::Layer, static_cast<std::uint64_t>(layer)).stream();
    const Mat& tokens = X.matrix();
    FieldSampler sampler(p.law, p.beta, HeadSampling::Reduced);
    sampler.bind(tokens, tokens);
    Mat update = Mat::Zero(X.d(), X.n());
    for (int h = 0; h < p.H; ++h) update += sampler.sample_velocities(rng);
    Mat next = tokens + (p.eta / static_cast<double>(p.H)) * update;
    normalize_columns(next);
    return TokenConfig(std::move(next));
}

}  // namespace

Trajectory run_chain(const TokenConfig& X0, const ChainParams& p, int stride, const StepObserver& observer) {
    p.validate();
    require(stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
    require(X0.d() == p.law.d, ErrorCode::InvalidArgument, "run_chain: dimension mismatch");
    Trajectory traj;
    traj.stride = stride;
    traj.times.push_back(0.0);
    traj.states.push_back(X0);
    traj.series.record(0.0, X0);

    TokenConfig X = X0;
    for (std::int64_t layer = 0; layer < p.L; ++layer) {
        X = p.sampling == HeadSampling::Full ? layer_step(X, chain_layer_heads(p, layer), p.eta, p.beta)
                                             : reduced_layer_step(X, p, layer);
        const double t = p.eta * static_cast<double>(layer + 1);
        traj.series.record(t, X);
        if ((layer + 1) % stride == 0 || layer + 1 == p.L) {
            traj.times.push_back(t);
            traj.states.push_back(X);
        }
        if (observer) observer(layer + 1, t, X);
    }
    return traj;
}

double alpha(const ChainParams& p, std::optional<double> sigma2) {
    require(p.eta > 0.0 && p.H >= 1, ErrorCode::InvalidArgument, "alpha: eta > 0 and H >= 1 required");
    if (!sigma2) {
        require(p.law.centered_V(), ErrorCode::NeedsSigmaEstimate,
                "alpha: non-centered V needs a supplied sigma^2 estimate");
        sigma2 = p.law.sigma_V * p.law.sigma_V * static_cast<double>(p.law.d - 1);
    }
    require(*sigma2 >= 0.0, ErrorCode::InvalidArgument, "alpha: sigma^2 must be >= 0");
    return p.eta * *sigma2 / static_cast<double>(p.H);
}

std::string_view to_string(RegimeLabel label) {
    switch (label) {
        case RegimeLabel::Static: return "Static";
        case RegimeLabel::Ballistic: return "Ballistic";
        case RegimeLabel::Diffusive: return "Diffusive";
        case RegimeLabel::SuperDiffusive: return "SuperDiffusive";
    }
    return "Unknown";
}

RegimeLabel classify_regime(double eta, double alpha_value, std::int64_t L, RegimeThresholds thresholds) {
    const double t_L = eta * static_cast<double>(L);
    const double s = t_L * alpha_value;
    if (t_L < thresholds.static_time) return RegimeLabel::Static;
    if (s > thresholds.super_diffusive) return RegimeLabel::SuperDiffusive;
    if (s >= thresholds.diffusive_low) return RegimeLabel::Diffusive;
    return RegimeLabel::Ballistic;
}

}  // namespace tokdyn
