#pragma once

// Scalar order-parameter reductions of the Gaussian model: the simplex ODE,
// the logistic equation, the overlap drift, the logistic SDE and the
// large-beta / large-d expansions.

#include "tokdyn/attention.hpp"
#include "tokdyn/rng.hpp"
#include "tokdyn/sphere.hpp"
#include "tokdyn/weights.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace tokdyn {

struct FgEstimate {
    double f_hat = 0.0;
    double g_hat = 0.0;
    double stderr_f = 0.0;
    double stderr_g = 0.0;
    std::size_t samples = 0;
};

struct ScalarPath {
    std::vector<double> times;
    std::vector<double> values;

    // Linear interpolation; throws TimeMismatch outside [times.front(), times.back()].
    [[nodiscard]] double at(double t) const;
};

// f = E sum_k pi_{1->k}^2 and g = E sum_k pi_{1->k} pi_{2->k} on a simplex
// configuration with overlap gamma.
FgEstimate fg_estimate(double gamma, Index n, Index d, Temperature beta, const WeightLaw& law, std::size_t samples,
                       Stream& rng);

// Draws batches until both standard errors are at most `target_stderr` or
// `max_samples` is reached.
FgEstimate fg_estimate_adaptive(double gamma, Index n, Index d, Temperature beta, const WeightLaw& law,
                                double target_stderr, std::size_t max_samples, Stream& rng);

double simplex_drift(double gamma, double f, double g);
double simplex_drift(double gamma, const FgEstimate& fg);

// Monotone piecewise-cubic (Fritsch-Carlson) interpolant.
class MonotoneCubic {
  public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);
    [[nodiscard]] double operator()(double t) const;

  private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> slope_;
};

struct FgTable {
    std::vector<double> gamma;
    std::vector<FgEstimate> fg;

    [[nodiscard]] double drift(double g) const;
    [[nodiscard]] double max_stderr() const;

    MonotoneCubic f_interp;
    MonotoneCubic g_interp;
};

// `grid_points` values uniformly on [gamma0, 1]; exact 1/n at gamma = 1.
// Uses the fixed sample count when `samples` > 0, adaptive to stderr 1e-3 otherwise.
FgTable build_fg_table(double gamma0, Index n, Index d, Temperature beta, const WeightLaw& law, int grid_points,
                       std::size_t samples, Stream& rng);

// Classical fixed-step RK4 for a scalar autonomous ODE; values at every step.
ScalarPath rk4_path(const std::function<double(double)>& rhs, double y0, double T, double dt);

// RK4 on gamma' = b(gamma) through a tabulated (f, g).  Throws NumericalFailure
// when the dt/10 refinement differs by more than 1e-6.
ScalarPath simplex_ode_solve(double gamma0, Index n, Index d, Temperature beta, const WeightLaw& law, double T,
                             double dt, int grid_points, std::size_t samples, Stream& rng);
ScalarPath simplex_ode_solve(const FgTable& table, double gamma0, double T, double dt);

// Closed form of gamma' = (1-gamma)(gamma + (1-gamma)/n).
double simplex_beta0_exact(double gamma0, Index n, double t);

double logistic_solution(double u0, double t);

// D_ij = (1/d)(d-2+R_ij^2) s_pair_ij - ((d-1)/(2d)) R_ij (s_i + s_j).
Mat gram_drift(const GramMatrix& R, const Vec& s_diag, const Mat& s_pair, Index d);

inline constexpr double kAbsorptionBand = 1e-9;

// Euler-Maruyama for du = -u(1-u^2) dt + sqrt(2)(1-u^2) dB with clamping to
// [-1, 1] and freezing once |u| >= 1 - kAbsorptionBand.
ScalarPath logistic_sde_path(double u0, double T, double dt, Stream& rng);

// Terminal value only; same scheme as logistic_sde_path.
double logistic_sde_terminal(double u0, double T, double dt, Stream& rng);

// P(u_infinity = +1) from u0 = sin(theta0): theta0/pi + 1/2.
double logistic_hitting_probability(double u0);

UnitVector laplace_limit(const Mat& A, const UnitVector& x);

double delta_expansion(double r, Index d);

struct ScalarEstimate {
    double mean = 0.0;
    double stderr = 0.0;
    std::size_t samples = 0;
};

// E <Ax/|Ax|, Ay/|Ay|> for unit x, y with <x, y> = r and A = W W'^T Gaussian.
// Only the projections W'^T [x y] and W (W'^T [x y]) are drawn.
ScalarEstimate normalized_overlap_mc(double r, Index d, std::size_t draws, Stream& rng);

}  // namespace tokdyn
