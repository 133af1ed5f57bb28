#pragma once

// Chain-versus-SDE comparisons and collapse statistics.

#include "tokdyn/chain.hpp"
#include "tokdyn/reductions.hpp"
#include "tokdyn/sde.hpp"
#include "tokdyn/sphere.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tokdyn {

struct TestFunction {
    std::string name;
    std::function<double(const TokenConfig&)> phi;
};

// mean_overlap, kappa, r12 = <x_1, x_2> and bump = exp(1 - 1/(1 - r12^2)).
std::vector<TestFunction> test_functions();
TestFunction test_function(const std::string& name);

// Chain at each eta uses H = 1 and sigma_V^2 = alpha / (eta (d - 1)), so alpha
// is held fixed; the reference SDE is GaussianDriftless with sigma_V^2 =
// alpha / (d - 1) and unit noise coefficient, the same law for every eta.
struct WeakErrorSetup {
    Index d = 8;
    double beta = 1.0;
    double sigma_A = 0.0;  // 0 selects 1/sqrt(d)
    double alpha = 0.5;
    double t_L = 1.0;
    int sde_modes = 1;
    std::size_t trials = 20000;
    int ref_dt_divisor = 8;
    bool reference_self_check = false;  // also compare SDE at dt against dt/2
    std::uint64_t seed = 0;
    int threads = 1;
    std::string phi = "mean_overlap";
};

struct WeakErrorPoint {
    double eta = 0.0;
    std::int64_t L = 0;
    double sigma_V = 0.0;
    double chain_mean = 0.0;
    double chain_stderr = 0.0;
    double sde_mean = 0.0;
    double sde_stderr = 0.0;
    double gap = 0.0;
    double gap_stderr = 0.0;
    bool censored = false;  // gap <= 3 stderr
    double self_gap = 0.0;  // |SDE(dt) - SDE(dt/2)| when requested
    double self_gap_stderr = 0.0;
};

struct WeakErrorReport {
    std::vector<WeakErrorPoint> points;
    double slope = 0.0;
    double slope_ci_low = 0.0;
    double slope_ci_high = 0.0;
    int fitted_points = 0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::string phi;
};

// Throws InsufficientTrials when every gap is within one standard error of zero.
WeakErrorReport weak_error_sweep(const TokenConfig& X0, const WeakErrorSetup& setup, const std::vector<double>& etas);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int points = 0;
};

// OLS of log y on log x with a 95% t interval (NaN bounds with two points).
SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// max_{i != j} |<x_i, x_j> - gamma|.
double max_overlap_deviation(const TokenConfig& X, double gamma);

// Per snapshot of `traj`; throws TimeMismatch beyond the reference horizon.
ScalarPath overlap_deviation(const Trajectory& traj, const ScalarPath& reference);

struct GramDriftCheck {
    Mat empirical;         // mean of (R(dt) - R(0)) / dt over antithetic pairs
    Mat empirical_stderr;
    Mat formula;           // gram_drift with s from mean_overlap_kernel
    Mat formula_stderr;    // propagated from the s estimate
    std::size_t pairs = 0;
};

// One-step generator check for the GaussianDriftless SDE with p.alpha = 1 and
// sigma_V^2 = 1/d.  Each simulation pairs noise Z with -Z.
GramDriftCheck gram_drift_check(const TokenConfig& X, const SdeParams& p, std::size_t pairs,
                                std::size_t s_samples, int threads = 1);

struct CollapseMetrics {
    double m = 0.0;
    double participation_ratio = 0.0;
    double max_offdiag = 0.0;
    double min_offdiag = 0.0;
};

CollapseMetrics collapse_metrics(const TokenConfig& X);

}  // namespace tokdyn
