#pragma once

// The discrete random-transformer chain on (S^{d-1})^n and its scaling
// bookkeeping.

#include "tokdyn/attention.hpp"
#include "tokdyn/sphere.hpp"
#include "tokdyn/weights.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace tokdyn {

struct ChainParams {
    WeightLaw law;
    Temperature beta{0.0};
    double eta = 0.1;
    int H = 1;
    int L = 1;
    std::uint64_t seed = 0;
    // Full draws every head with sample_layer; Reduced draws only the
    // projections the update needs (same law, different stream usage).
    HeadSampling sampling = HeadSampling::Full;

    void validate() const;
};

// Order parameters recorded at every step.
struct OrderSeries {
    std::vector<double> time;
    std::vector<double> m;
    std::vector<double> kappa;
    std::vector<double> r12;

    void record(double t, const TokenConfig& X);
    [[nodiscard]] std::size_t size() const { return time.size(); }
};

struct Trajectory {
    std::vector<double> times;          // snapshot times
    std::vector<TokenConfig> states;    // snapshots every `stride` steps plus the final state
    int stride = 1;
    OrderSeries series;
};

// Called after every step with (step index, time, state).
using StepObserver = std::function<void(std::int64_t, double, const TokenConfig&)>;

// Synchronous update x_i' = N(x_i + (eta/H) sum_h V_h m_{beta,A_h}(x_i)).
TokenConfig layer_step(const TokenConfig& X, const std::vector<HeadWeights>& heads, double eta, Temperature beta);

// Heads of layer `layer` come from the stream keyed (seed, Layer, layer).
std::vector<HeadWeights> chain_layer_heads(const ChainParams& p, std::int64_t layer);

Trajectory run_chain(const TokenConfig& X0, const ChainParams& p, int stride, const StepObserver& observer = {});

// eta sigma^2 / H; sigma^2 = sigma_V^2 (d-1) for a law centered in V unless
// an estimate is supplied.
double alpha(const ChainParams& p, std::optional<double> sigma2 = std::nullopt);

enum class RegimeLabel { Static, Ballistic, Diffusive, SuperDiffusive };
std::string_view to_string(RegimeLabel label);

struct RegimeThresholds {
    double static_time = 0.05;
    double diffusive_low = 0.1;
    double super_diffusive = 10.0;
};

RegimeLabel classify_regime(double eta, double alpha_value, std::int64_t L, RegimeThresholds thresholds = {});

}  // namespace tokdyn
