#pragma once

// Projected Euler-Maruyama integration of the homogenized SDE driven by a
// common finite-mode noise.

#include "tokdyn/attention.hpp"
#include "tokdyn/chain.hpp"
#include "tokdyn/rng.hpp"
#include "tokdyn/sphere.hpp"

#include <cstdint>
#include <vector>

namespace tokdyn {

enum class SdeVariant {
    General,            // drift E_theta B_theta, fluctuation B_theta - drift
    GaussianDriftless,  // centered V: zero drift, fluctuation B_theta
};

enum class SdeScheme {
    Projected,          // N(x + increment)
    ExplicitCorrector,  // tangent increment plus -(alpha dt / 2) |P xi|^2 x, no normalization
};

struct SdeParams {
    WeightLaw law;
    Temperature beta{0.0};
    double alpha = 1.0;  // multiplies the raw fluctuation covariance
    double dt = 1e-3;
    int modes = 32;
    SdeVariant variant = SdeVariant::GaussianDriftless;
    std::uint64_t seed = 0;
    std::size_t drift_samples = 64;  // A draws per step when the drift has no closed form
    HeadSampling sampling = HeadSampling::Auto;
    SdeScheme scheme = SdeScheme::Projected;

    void validate() const;
};

// One step for `queries` driven by the field of `keys`; shared draws for all
// queries.  Returns the new queries.  noise_sign = -1 gives the antithetic
// step for the same stream state.
Mat sde_step_field(const Mat& queries, const Mat& keys, const SdeParams& p, Stream& rng, double noise_sign = 1.0);

TokenConfig sde_step(const TokenConfig& X, const SdeParams& p, Stream& rng);

// Step k uses the stream keyed (seed, SdeMode, k).
Stream sde_step_stream(const SdeParams& p, std::int64_t step);

// ceil(T/dt) steps.
Trajectory run_sde(const TokenConfig& X0, const SdeParams& p, double T, int stride, const StepObserver& observer = {});

struct TaggedPairRun {
    std::vector<double> times;
    std::vector<double> R;
    Index n_bg = 0;
};

// n_bg background particles plus two tagged ones, all i.i.d. uniform at t = 0
// (or the tagged pair identical when `identical_tagged`); the attention measure is
// the background empirical measure.
TaggedPairRun run_tagged_pair(Index n_bg, Index d, const SdeParams& p, double T, bool identical_tagged = false);

}  // namespace tokdyn
