#include "tokdyn/experiments/scenarios.hpp"

#include "tokdyn/chain.hpp"
#include "tokdyn/diagnostics.hpp"
#include "tokdyn/errors.hpp"
#include "tokdyn/parallel.hpp"
#include "tokdyn/reductions.hpp"
#include "tokdyn/sde.hpp"
#include "tokdyn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tokdyn::experiments {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void bad_value(std::string_view key, const std::string& what) {
    throw Error(ErrorCode::ConfigError, "key '" + std::string(key) + "': " + what);
}

Index positive_index(const Params& p, std::string_view key, std::int64_t minimum = 1) {
    const std::int64_t v = p.integer(key);
    if (v < minimum) bad_value(key, "must be >= " + std::to_string(minimum));
    return static_cast<Index>(v);
}

double positive_number(const Params& p, std::string_view key, bool allow_zero = false) {
    const double v = p.number(key);
    if (allow_zero ? v < 0.0 : v <= 0.0) bad_value(key, allow_zero ? "must be >= 0" : "must be > 0");
    return v;
}

std::size_t count(const Params& p, std::string_view key, std::int64_t minimum = 1) {
    return static_cast<std::size_t>(positive_index(p, key, minimum));
}

WeightLaw law_from(const Params& p, Index d) {
    const double unit = 1.0 / std::sqrt(static_cast<double>(d));
    WeightLaw law{.d = d, .sigma_V = unit, .sigma_A = unit, .mean_V = {}, .mean_A = {}};
    if (p.json().contains("sigma_V")) law.sigma_V = p.number_or("sigma_V", unit);
    if (p.json().contains("sigma_A")) law.sigma_A = p.number_or("sigma_A", unit);
    if (p.json().contains("mean_v_scale")) {
        const double scale = p.number("mean_v_scale");
        if (scale != 0.0) law.mean_V = scale * Mat::Identity(d, d);
    }
    law.validate();
    return law;
}

RngKey root_key(const RunContext& ctx) { return RngKey(ctx.cfg.seed); }

std::uint64_t trial_seed(const RunContext& ctx, std::size_t trial) {
    return root_key(ctx).derive(StreamTag::Trial, trial).value();
}

TokenConfig initial_config(const RunContext& ctx, Index n, Index d) {
    const Params& p = ctx.params;
    Stream rng = root_key(ctx).derive(StreamTag::Init).stream();
    const std::string init = p.text("init");
    if (init == "uniform") return uniform_config(n, d, rng);
    if (init == "simplex") return simplex_config(n, d, p.number("gamma0"), &rng);
    bad_value("init", "expected 'uniform' or 'simplex'");
}

HeadSampling sampling_from(const Params& p) {
    const std::string s = p.text("sampling");
    if (s == "auto") return HeadSampling::Auto;
    if (s == "full") return HeadSampling::Full;
    if (s == "reduced") return HeadSampling::Reduced;
    bad_value("sampling", "expected 'auto', 'full' or 'reduced'");
}

double median(std::vector<double> v) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

bool keep_row(std::size_t k, std::size_t last, std::size_t stride) { return k % stride == 0 || k == last; }

// ---------------------------------------------------------------- chain

Json run_chain_scenario(RunContext& ctx) {
    const Params& p = ctx.params;
    const Index n = positive_index(p, "n", 2);
    const Index d = positive_index(p, "d", 2);
    ChainParams base;
    base.law = law_from(p, d);
    base.beta = Temperature(p.number("beta"));
    base.eta = positive_number(p, "eta");
    base.H = static_cast<int>(positive_index(p, "H"));
    base.L = static_cast<int>(positive_index(p, "L", 0));
    base.sampling = sampling_from(p);
    const std::size_t trials = count(p, "trials");
    const auto stride = count(p, "stride");
    const TokenConfig X0 = initial_config(ctx, n, d);

    std::vector<OrderSeries> series(trials);
    std::vector<std::vector<double>> ratios(trials);
    parallel_for(trials, ctx.cfg.threads, [&](std::size_t trial) {
        ChainParams params = base;
        params.seed = trial_seed(ctx, trial);
        ratios[trial].push_back(collapse_metrics(X0).participation_ratio);
        const Trajectory traj = run_chain(X0, params, std::max(params.L, 1), [&](std::int64_t, double, const TokenConfig& X) {
            ratios[trial].push_back(collapse_metrics(X).participation_ratio);
        });
        series[trial] = traj.series;
    });

    auto& csv = ctx.writer.open_csv("chain.csv", kSeriesSchema,
                                    {"run_id", "trial", "step", "time", "m", "kappa", "r12", "participation_ratio"});
    RunningStats final_m;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const OrderSeries& s = series[trial];
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (!keep_row(k, s.size() - 1, stride)) continue;
            csv.row({ctx.cfg.run_id(), static_cast<std::int64_t>(trial), static_cast<std::int64_t>(k), s.time[k],
                     s.m[k], s.kappa[k], s.r12[k], ratios[trial][k]});
        }
        final_m.push(s.m.back());
    }
    Json summary;
    std::optional<double> a;
    if (base.law.centered_V()) a = alpha(base);
    summary["alpha"] = a ? Json(*a) : Json(nullptr);
    summary["t_L"] = base.eta * base.L;
    summary["regime"] = a ? Json(std::string(to_string(classify_regime(base.eta, *a, base.L)))) : Json(nullptr);
    summary["m_initial"] = mean_overlap(X0);
    summary["m_final_mean"] = final_m.mean();
    summary["m_final_stderr"] = final_m.stderr_of_mean();
    summary["trials"] = trials;
    return summary;
}

// ---------------------------------------------------------------- sde

SdeParams sde_params_from(const Params& p, Index d) {
    SdeParams s;
    s.law = law_from(p, d);
    s.beta = Temperature(p.number("beta"));
    s.alpha = positive_number(p, "alpha", true);
    s.dt = positive_number(p, "dt");
    s.modes = static_cast<int>(positive_index(p, "modes"));
    if (p.json().contains("variant")) {
        const std::string v = p.text("variant");
        if (v == "gaussian-driftless") {
            s.variant = SdeVariant::GaussianDriftless;
        } else if (v == "general") {
            s.variant = SdeVariant::General;
        } else {
            bad_value("variant", "expected 'gaussian-driftless' or 'general'");
        }
    }
    if (p.json().contains("scheme")) {
        const std::string v = p.text("scheme");
        if (v == "projected") {
            s.scheme = SdeScheme::Projected;
        } else if (v == "explicit-corrector") {
            s.scheme = SdeScheme::ExplicitCorrector;
        } else {
            bad_value("scheme", "expected 'projected' or 'explicit-corrector'");
        }
    }
    if (p.json().contains("drift_samples")) s.drift_samples = count(p, "drift_samples");
    if (p.json().contains("sampling")) s.sampling = sampling_from(p);
    return s;
}

Json run_sde_scenario(RunContext& ctx) {
    const Params& p = ctx.params;
    const Index n = positive_index(p, "n", 2);
    const Index d = positive_index(p, "d", 2);
    const SdeParams base = sde_params_from(p, d);
    const double T = positive_number(p, "T", true);
    const std::size_t trials = count(p, "trials");
    const auto stride = count(p, "stride");
    const TokenConfig X0 = initial_config(ctx, n, d);

    std::vector<OrderSeries> series(trials);
    parallel_for(trials, ctx.cfg.threads, [&](std::size_t trial) {
        SdeParams params = base;
        params.seed = trial_seed(ctx, trial);
        series[trial] = run_sde(X0, params, T, std::numeric_limits<int>::max()).series;
    });

    auto& csv = ctx.writer.open_csv("sde.csv", kSeriesSchema, {"run_id", "trial", "step", "time", "m", "kappa", "r12"});
    RunningStats final_m;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const OrderSeries& s = series[trial];
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (!keep_row(k, s.size() - 1, stride)) continue;
            csv.row({ctx.cfg.run_id(), static_cast<std::int64_t>(trial), static_cast<std::int64_t>(k), s.time[k],
                     s.m[k], s.kappa[k], s.r12[k]});
        }
        final_m.push(s.m.back());
    }
    return Json{{"m_initial", mean_overlap(X0)},
                {"m_final_mean", final_m.mean()},
                {"m_final_stderr", final_m.stderr_of_mean()},
                {"clock_factor_alpha", base.alpha},
                {"trials", trials}};
}

// ---------------------------------------------------------------- simplex-ode

Json run_simplex_ode(RunContext& ctx) {
    const Params& p = ctx.params;
    const Index n = positive_index(p, "n", 2);
    const Index d = positive_index(p, "d", 2);
    const WeightLaw law = law_from(p, d);
    const Temperature beta(p.number("beta"));
    const double gamma0 = p.number("gamma0");
    const double T = positive_number(p, "T", true);
    const double dt = positive_number(p, "dt");
    const int grid = static_cast<int>(positive_index(p, "grid_points", 2));
    const std::size_t samples = static_cast<std::size_t>(positive_index(p, "samples", 0));
    const std::size_t trials = static_cast<std::size_t>(positive_index(p, "trials", 0));
    const double tolerance = positive_number(p, "tolerance");

    Stream table_rng = root_key(ctx).derive(StreamTag::Estimator).stream();
    const FgTable table = build_fg_table(gamma0, n, d, beta, law, grid, samples, table_rng);
    const ScalarPath gamma = simplex_ode_solve(table, gamma0, T, dt);
    const bool closed_form = beta.value() == 0.0;

    auto& fg_csv = ctx.writer.open_csv("fg.csv", kTableSchema, {"run_id", "gamma", "f", "g", "stderr_f", "stderr_g", "b"});
    for (std::size_t k = 0; k < table.gamma.size(); ++k) {
        const FgEstimate& e = table.fg[k];
        fg_csv.row({ctx.cfg.run_id(), table.gamma[k], e.f_hat, e.g_hat, e.stderr_f, e.stderr_g,
                    simplex_drift(table.gamma[k], e)});
    }
    auto& gamma_csv = ctx.writer.open_csv("gamma.csv", kSeriesSchema, {"run_id", "time", "gamma", "gamma_exact", "b"});
    double exact_error = 0.0;
    bool increasing = true;
    for (std::size_t k = 0; k < gamma.times.size(); ++k) {
        const double exact = closed_form ? simplex_beta0_exact(gamma0, n, gamma.times[k]) : kNaN;
        if (closed_form) exact_error = std::max(exact_error, std::abs(gamma.values[k] - exact));
        if (k > 0 && !(gamma.values[k] > gamma.values[k - 1])) increasing = false;
        gamma_csv.row({ctx.cfg.run_id(), gamma.times[k], gamma.values[k], exact, table.drift(gamma.values[k])});
    }

    Json summary{{"gamma_T", gamma.values.back()},
                 {"strictly_increasing", increasing},
                 {"fg_max_stderr", table.max_stderr()},
                 {"closed_form_max_error", closed_form ? Json(exact_error) : Json(nullptr)}};
    if (trials == 0) return summary;

    SdeParams sde;
    sde.law = law;
    sde.law.sigma_V = 1.0 / std::sqrt(static_cast<double>(d));
    sde.beta = beta;
    sde.alpha = 1.0;
    sde.dt = positive_number(p, "sde_dt");
    sde.modes = static_cast<int>(positive_index(p, "modes"));
    std::vector<std::vector<double>> deviations(trials);
    std::vector<std::vector<double>> times(trials);
    parallel_for(trials, ctx.cfg.threads, [&](std::size_t trial) {
        Stream init = root_key(ctx).derive(StreamTag::Init, trial).stream();
        const TokenConfig X0 = simplex_config(n, d, gamma0, &init);
        SdeParams params = sde;
        params.seed = trial_seed(ctx, trial);
        times[trial].push_back(0.0);
        deviations[trial].push_back(max_overlap_deviation(X0, gamma0));
        run_sde(X0, params, T, std::numeric_limits<int>::max(), [&](std::int64_t, double t, const TokenConfig& X) {
            times[trial].push_back(t);
            deviations[trial].push_back(max_overlap_deviation(X, gamma.at(std::min(t, gamma.times.back()))));
        });
    });
    auto& dev_csv = ctx.writer.open_csv("deviation.csv", kSeriesSchema, {"run_id", "trial", "time", "deviation"});
    const auto stride = count(p, "stride");
    std::vector<double> sups;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        for (std::size_t k = 0; k < times[trial].size(); ++k) {
            if (!keep_row(k, times[trial].size() - 1, stride)) continue;
            dev_csv.row({ctx.cfg.run_id(), static_cast<std::int64_t>(trial), times[trial][k], deviations[trial][k]});
        }
        sups.push_back(*std::max_element(deviations[trial].begin(), deviations[trial].end()));
    }
    const auto within = std::count_if(sups.begin(), sups.end(), [&](double s) { return s <= tolerance; });
    summary["sup_deviation"] = sups;
    summary["sup_deviation_median"] = median(sups);
    summary["fraction_within_tolerance"] = static_cast<double>(within) / static_cast<double>(trials);
    summary["tolerance"] = tolerance;
    return summary;
}

// ---------------------------------------------------------------- small-beta

Json run_small_beta(RunContext& ctx) {
    const Params& p = ctx.params;
    const Index n = positive_index(p, "n", 2);
    const Index d = positive_index(p, "d", 2);
    SdeParams base;
    base.law = law_from(p, d);
    base.law.sigma_V = 1.0 / std::sqrt(static_cast<double>(d));
    base.beta = Temperature(p.number("beta"));
    base.alpha = positive_number(p, "alpha");
    base.dt = positive_number(p, "dt");
    base.modes = static_cast<int>(positive_index(p, "modes"));
    const double T = positive_number(p, "T", true);
    const std::size_t trials = count(p, "trials");
    const auto stride = count(p, "stride");

    std::vector<OrderSeries> series(trials);
    parallel_for(trials, ctx.cfg.threads, [&](std::size_t trial) {
        Stream init = root_key(ctx).derive(StreamTag::Init, trial).stream();
        const TokenConfig X0 = uniform_config(n, d, init);
        SdeParams params = base;
        params.seed = trial_seed(ctx, trial);
        series[trial] = run_sde(X0, params, T, std::numeric_limits<int>::max()).series;
    });
    auto& csv = ctx.writer.open_csv("second_moment.csv", kSeriesSchema, {"run_id", "trial", "time", "m", "m_logistic"});
    std::vector<double> sups;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const OrderSeries& s = series[trial];
        double sup = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            // Logistic clock runs at alpha times the simulation clock.
            const double u = logistic_solution(s.m.front(), base.alpha * s.time[k]);
            sup = std::max(sup, std::abs(s.m[k] - u));
            if (keep_row(k, s.size() - 1, stride)) {
                csv.row({ctx.cfg.run_id(), static_cast<std::int64_t>(trial), s.time[k], s.m[k], u});
            }
        }
        sups.push_back(sup);
    }
    return Json{{"sup_deviation", sups}, {"sup_deviation_median", median(sups)}, {"trials", trials}};
}

// ---------------------------------------------------------------- slow-motion

Json run_slow_motion(RunContext& ctx) {
    const Params& p = ctx.params;
    const Index n_bg = positive_index(p, "n_bg", 2);
    const Index d = positive_index(p, "d", 2);
    const double dd = static_cast<double>(d);
    SdeParams base;
    base.law = law_from(p, d);
    base.beta = Temperature(positive_number(p, "beta_scale", true) * dd * dd);
    base.alpha = positive_number(p, "alpha", true);
    base.dt = positive_number(p, "dt");
    base.modes = static_cast<int>(positive_index(p, "modes"));
    const double T = positive_number(p, "T", true);
    const std::size_t trials = count(p, "trials");
    const auto stride = count(p, "stride");

    std::vector<TaggedPairRun> runs(trials);
    parallel_for(trials, ctx.cfg.threads, [&](std::size_t trial) {
        SdeParams params = base;
        params.seed = trial_seed(ctx, trial);
        runs[trial] = run_tagged_pair(n_bg, d, params, T);
    });
    const double bound = T / dd + 3.0 * std::sqrt(T / dd);
    auto& csv = ctx.writer.open_csv("tagged_pair.csv", kSeriesSchema, {"run_id", "trial", "time", "R"});
    std::vector<double> sups;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const TaggedPairRun& run = runs[trial];
        double sup = 0.0;
        for (std::size_t k = 0; k < run.times.size(); ++k) {
            sup = std::max(sup, std::abs(run.R[k] - run.R.front()));
            if (keep_row(k, run.times.size() - 1, stride)) {
                csv.row({ctx.cfg.run_id(), static_cast<std::int64_t>(trial), run.times[k], run.R[k]});
            }
        }
        sups.push_back(sup);
    }
    const auto within = std::count_if(sups.begin(), sups.end(), [&](double s) { return s <= bound; });
    return Json{{"beta", base.beta.value()},
                {"bound", bound},
                {"sup_deviation", sups},
                {"sup_deviation_median", median(sups)},
                {"fraction_within_bound", static_cast<double>(within) / static_cast<double>(trials)}};
}

// ---------------------------------------------------------------- logistic-sde

Json run_logistic_sde(RunContext& ctx) {
    const Params& p = ctx.params;
    const double u0 = p.number("u0");
    if (u0 < -1.0 || u0 > 1.0) bad_value("u0", "must lie in [-1, 1]");
    const double T = positive_number(p, "T", true);
    const double dt = positive_number(p, "dt");
    if (dt > 1e-2) bad_value("dt", "must be <= 0.01");
    const std::size_t paths = count(p, "paths");
    const std::size_t recorded = std::min(paths, static_cast<std::size_t>(positive_index(p, "record_paths", 0)));
    const auto stride = count(p, "stride");

    std::vector<double> finals(paths);
    std::vector<ScalarPath> kept(recorded);
    parallel_for(paths, ctx.cfg.threads, [&](std::size_t path) {
        Stream rng = root_key(ctx).derive(StreamTag::Path, path).stream();
        if (path < recorded) {
            kept[path] = logistic_sde_path(u0, T, dt, rng);
            finals[path] = kept[path].values.back();
        } else {
            finals[path] = logistic_sde_terminal(u0, T, dt, rng);
        }
    });
    auto& csv = ctx.writer.open_csv("logistic_paths.csv", kSeriesSchema, {"run_id", "trial", "time", "u"});
    for (std::size_t path = 0; path < recorded; ++path) {
        const ScalarPath& s = kept[path];
        for (std::size_t k = 0; k < s.times.size(); ++k) {
            if (keep_row(k, s.times.size() - 1, stride)) {
                csv.row({ctx.cfg.run_id(), static_cast<std::int64_t>(path), s.times[k], s.values[k]});
            }
        }
    }
    const auto plus = std::count(finals.begin(), finals.end(), 1.0);
    const auto minus = std::count(finals.begin(), finals.end(), -1.0);
    const double total = static_cast<double>(paths);
    return Json{{"absorbed_plus", static_cast<double>(plus) / total},
                {"absorbed_minus", static_cast<double>(minus) / total},
                {"unabsorbed", static_cast<double>(static_cast<std::int64_t>(paths) - plus - minus) / total},
                {"predicted_plus", logistic_hitting_probability(u0)},
                {"paths", paths}};
}

// ---------------------------------------------------------------- weak-error

Json run_weak_error(RunContext& ctx) {
    const Params& p = ctx.params;
    WeakErrorSetup setup;
    const Index n = positive_index(p, "n", 2);
    setup.d = positive_index(p, "d", 2);
    setup.beta = Temperature(p.number("beta")).value();
    setup.sigma_A = p.number_or("sigma_A", 0.0);
    setup.alpha = positive_number(p, "alpha");
    setup.t_L = positive_number(p, "t_L");
    setup.sde_modes = static_cast<int>(positive_index(p, "sde_modes"));
    setup.trials = count(p, "trials", 2);
    setup.ref_dt_divisor = static_cast<int>(positive_index(p, "ref_dt_divisor"));
    setup.reference_self_check = p.flag("self_check");
    setup.seed = root_key(ctx).derive(StreamTag::Trial).value();
    setup.threads = ctx.cfg.threads;
    setup.phi = p.text("phi");
    const TokenConfig X0 = initial_config(ctx, n, setup.d);

    const WeakErrorReport report = weak_error_sweep(X0, setup, p.numbers("etas"));
    auto& csv = ctx.writer.open_csv("weak_error.csv", kTableSchema,
                                    {"run_id", "eta", "L", "sigma_V", "chain_mean", "chain_stderr", "sde_mean",
                                     "sde_stderr", "gap", "gap_stderr", "censored", "self_gap", "self_gap_stderr"});
    for (const auto& pt : report.points) {
        csv.row({ctx.cfg.run_id(), pt.eta, pt.L, pt.sigma_V, pt.chain_mean, pt.chain_stderr, pt.sde_mean,
                 pt.sde_stderr, pt.gap, pt.gap_stderr, static_cast<std::int64_t>(pt.censored),
                 setup.reference_self_check ? pt.self_gap : kNaN,
                 setup.reference_self_check ? pt.self_gap_stderr : kNaN});
    }
    auto finite_or_null = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
    return Json{{"slope", finite_or_null(report.slope)},
                {"slope_ci_low", finite_or_null(report.slope_ci_low)},
                {"slope_ci_high", finite_or_null(report.slope_ci_high)},
                {"fitted_points", report.fitted_points},
                {"trials", report.trials},
                {"phi", report.phi}};
}

// ---------------------------------------------------------------- phase-diagram

struct PhaseCell {
    double eta = 0.0;
    double alpha = 0.0;
    RegimeLabel label = RegimeLabel::Static;
    double m_mean = 0.0;
    double m_variance = 0.0;
    double m_drift = 0.0;
};

Json run_phase_diagram(RunContext& ctx) {
    const Params& p = ctx.params;
    const Index n = positive_index(p, "n", 2);
    const Index d = positive_index(p, "d", 2);
    const auto L = static_cast<int>(positive_index(p, "L"));
    const std::size_t seeds = count(p, "seeds", 2);
    const std::vector<double> etas = p.numbers("etas");
    const std::vector<double> alphas = p.numbers("alphas");
    const RegimeThresholds thresholds{positive_number(p, "static_time"), positive_number(p, "diffusive_low"),
                                      positive_number(p, "super_diffusive")};
    const WeightLaw law0 = law_from(p, d);
    const Temperature beta(p.number("beta"));
    for (double e : etas) {
        if (!(e > 0.0)) bad_value("etas", "entries must be > 0");
    }
    for (double a : alphas) {
        if (!(a >= 0.0)) bad_value("alphas", "entries must be >= 0");
    }
    const TokenConfig X0 = initial_config(ctx, n, d);
    const double m0 = mean_overlap(X0);

    std::vector<PhaseCell> cells(etas.size() * alphas.size());
    parallel_for(cells.size(), ctx.cfg.threads, [&](std::size_t c) {
        PhaseCell& cell = cells[c];
        cell.eta = etas[c / alphas.size()];
        cell.alpha = alphas[c % alphas.size()];
        cell.label = classify_regime(cell.eta, cell.alpha, L, thresholds);
        ChainParams chain;
        chain.law = law0;
        chain.law.sigma_V = std::sqrt(cell.alpha / (cell.eta * static_cast<double>(d - 1)));
        chain.beta = beta;
        chain.eta = cell.eta;
        chain.H = 1;
        chain.L = L;
        RunningStats m;
        for (std::size_t s = 0; s < seeds; ++s) {
            // Weight seeds depend only on the seed index, so every cell sees the same randomness.
            chain.seed = root_key(ctx).derive(StreamTag::Trial, s).value();
            m.push(run_chain(X0, chain, L).series.m.back());
        }
        cell.m_mean = m.mean();
        cell.m_variance = m.variance();
        cell.m_drift = std::abs(m.mean() - m0);
    });
    auto& csv = ctx.writer.open_csv("phase.csv", kTableSchema,
                                    {"run_id", "eta", "alpha", "t_L", "L", "label", "m_mean", "m_variance", "m_drift"});
    Json counts = Json::object();
    for (const auto& cell : cells) {
        const std::string label(to_string(cell.label));
        csv.row({ctx.cfg.run_id(), cell.eta, cell.alpha, cell.eta * L, static_cast<std::int64_t>(L), label, cell.m_mean,
                 cell.m_variance, cell.m_drift});
        counts[label] = counts.value(label, 0) + 1;
    }
    return Json{{"label_counts", counts}, {"cells", cells.size()}, {"seeds", seeds}, {"m_initial", m0}};
}

// ---------------------------------------------------------------- kernel-check

Json run_kernel_check(RunContext& ctx) {
    const Params& p = ctx.params;
    const Index n = positive_index(p, "n", 2);
    const Index d = positive_index(p, "d", 2);
    const Temperature beta(p.number("beta"));
    const std::size_t samples = count(p, "samples", 2);
    const std::size_t configs = count(p, "configs");
    const Index i = positive_index(p, "i", 0);
    const Index j = positive_index(p, "j", 0);
    if (i >= n) bad_value("i", "must be < n");
    if (j >= n) bad_value("j", "must be < n");
    const WeightLaw law = gaussian_default(d);

    struct Result {
        MatrixEstimate mc;
        MatrixEstimate closed;
    };
    std::vector<Result> results(configs);
    parallel_for(configs, ctx.cfg.threads, [&](std::size_t c) {
        Stream init = root_key(ctx).derive(StreamTag::Init, c).stream();
        const TokenConfig X = uniform_config(n, d, init);
        Stream mc_rng = root_key(ctx).derive(StreamTag::Estimator, c, 0u).stream();
        Stream closed_rng = root_key(ctx).derive(StreamTag::Estimator, c, 1u).stream();
        results[c] = Result{mc_kernel(law, X, beta, i, j, samples, mc_rng),
                            gaussian_kernel_closed(law, X, beta, i, j, samples, closed_rng)};
    });
    auto& csv = ctx.writer.open_csv("kernel.csv", kTableSchema,
                                    {"run_id", "trial", "row", "col", "mc", "mc_stderr", "closed", "closed_stderr", "z"});
    double max_z = 0.0;
    for (std::size_t c = 0; c < configs; ++c) {
        const Result& r = results[c];
        for (Index col = 0; col < d; ++col) {
            for (Index row = 0; row < d; ++row) {
                const double se = std::hypot(r.mc.stderr(row, col), r.closed.stderr(row, col));
                const double diff = r.mc.mean(row, col) - r.closed.mean(row, col);
                const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : kNaN);
                if (!std::isnan(z)) max_z = std::max(max_z, std::abs(z));
                csv.row({ctx.cfg.run_id(), static_cast<std::int64_t>(c), static_cast<std::int64_t>(row),
                         static_cast<std::int64_t>(col), r.mc.mean(row, col), r.mc.stderr(row, col),
                         r.closed.mean(row, col), r.closed.stderr(row, col), z});
            }
        }
    }
    return Json{{"max_abs_z", max_z}, {"within_4_sigma", max_z <= 4.0}, {"configs", configs}, {"samples", samples}};
}

// ---------------------------------------------------------------- delta-check

Json run_delta_check(RunContext& ctx) {
    const Params& p = ctx.params;
    const std::vector<double> ds = p.numbers("ds");
    const double r = p.number("r");
    if (std::abs(r) > 1.0) bad_value("r", "must satisfy |r| <= 1");
    const std::size_t draws = count(p, "draws", 2);
    const double c = positive_number(p, "c", true);
    for (double d : ds) {
        if (d < 2.0 || d != std::floor(d)) bad_value("ds", "entries must be integers >= 2");
    }
    std::vector<ScalarEstimate> estimates(ds.size());
    parallel_for(ds.size(), ctx.cfg.threads, [&](std::size_t k) {
        Stream rng = root_key(ctx).derive(StreamTag::Estimator, k).stream();
        estimates[k] = normalized_overlap_mc(r, static_cast<Index>(ds[k]), draws, rng);
    });
    auto& csv = ctx.writer.open_csv("delta.csv", kTableSchema,
                                    {"run_id", "d", "r", "estimate", "stderr", "expansion", "discrepancy", "bound"});
    Json rows = Json::array();
    bool all_within = true;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        const auto d = static_cast<Index>(ds[k]);
        const double expansion = delta_expansion(r, d);
        const double discrepancy = std::abs(estimates[k].mean - expansion);
        const double bound = c * std::pow(ds[k], -1.5) + 4.0 * estimates[k].stderr;
        all_within = all_within && discrepancy <= bound;
        csv.row({ctx.cfg.run_id(), ds[k], r, estimates[k].mean, estimates[k].stderr, expansion, discrepancy, bound});
        rows.push_back(Json{{"d", d}, {"discrepancy", discrepancy}, {"bound", bound}});
    }
    return Json{{"per_d", rows}, {"all_within_bound", all_within}, {"c", c}, {"draws", draws}};
}

std::vector<Scenario> build_registry() {
    std::vector<Scenario> list;
    list.push_back({"chain", "random-transformer chain from a fixed initial configuration",
                    Json{{"n", 8}, {"d", 32}, {"beta", 1.0}, {"eta", 0.05}, {"H", 4}, {"L", 100},
                         {"sigma_V", nullptr}, {"sigma_A", nullptr}, {"mean_v_scale", 0.0}, {"init", "uniform"},
                         {"gamma0", 0.2}, {"trials", 4}, {"stride", 10}, {"sampling", "full"}},
                    run_chain_scenario, nullptr});
    list.push_back({"sde", "homogenized SDE with common noise",
                    Json{{"n", 8}, {"d", 32}, {"beta", 1.0}, {"alpha", 1.0}, {"dt", 0.01}, {"modes", 32},
                         {"T", 1.0}, {"variant", "gaussian-driftless"}, {"scheme", "projected"},
                         {"sigma_V", nullptr}, {"sigma_A", nullptr}, {"mean_v_scale", 0.0},
                         {"drift_samples", 64}, {"sampling", "auto"}, {"init", "uniform"}, {"gamma0", 0.2},
                         {"trials", 4}, {"stride", 10}},
                    run_sde_scenario, nullptr});
    list.push_back({"simplex-ode", "simplex overlap ODE with tabulated f, g and optional SDE comparison",
                    Json{{"n", 16}, {"d", 128}, {"beta", 1.0}, {"sigma_A", nullptr}, {"gamma0", 0.2}, {"T", 2.0},
                         {"dt", 0.01}, {"grid_points", 33}, {"samples", 0}, {"trials", 0}, {"sde_dt", 0.01},
                         {"modes", 8}, {"tolerance", 0.25}, {"stride", 10}},
                    run_simplex_ode, nullptr});
    list.push_back({"small-beta", "second moment against the logistic solution at small beta",
                    Json{{"n", 200}, {"d", 1000}, {"beta", 0.05}, {"sigma_A", nullptr}, {"alpha", 1.0},
                         {"dt", 0.01}, {"modes", 8}, {"T", 8.0}, {"trials", 4}, {"stride", 10}},
                    run_small_beta, [](const Params&) {
                        return Json{{"d_is_guess", true},
                                    {"note", "the figure this mirrors does not state d; default d = 1000"}};
                    }});
    list.push_back({"slow-motion", "tagged pair against a background cloud at large beta",
                    Json{{"n_bg", 512}, {"d", 64}, {"beta_scale", 10.0}, {"alpha", 1.0}, {"dt", 0.01},
                         {"modes", 4}, {"T", 1.0}, {"trials", 20}, {"sigma_V", nullptr}, {"sigma_A", nullptr},
                         {"stride", 10}},
                    run_slow_motion, nullptr});
    list.push_back({"logistic-sde", "absorption of the limiting logistic SDE",
                    Json{{"u0", 0.0}, {"T", 50.0}, {"dt", 1e-3}, {"paths", 10000}, {"record_paths", 10},
                         {"stride", 100}},
                    run_logistic_sde, nullptr});
    list.push_back({"weak-error", "chain versus SDE weak error across eta",
                    Json{{"n", 4}, {"d", 8}, {"beta", 1.0}, {"sigma_A", nullptr}, {"alpha", 0.5}, {"t_L", 1.0},
                         {"etas", {0.2, 0.1, 0.05}}, {"trials", 20000}, {"ref_dt_divisor", 8}, {"sde_modes", 1},
                         {"phi", "mean_overlap"}, {"init", "uniform"}, {"gamma0", 0.2}, {"self_check", false}},
                    run_weak_error, [](const Params&) {
                        Json names = Json::array();
                        for (const auto& f : test_functions()) names.push_back(f.name);
                        return Json{{"test_functions", names}};
                    }});
    list.push_back({"phase-diagram", "regime labels and measured noise over an (eta, alpha) grid",
                    Json{{"n", 8}, {"d", 16}, {"beta", 1.0}, {"sigma_A", nullptr}, {"mean_v_scale", 0.0},
                         {"L", 100}, {"etas", {0.0001, 0.001, 0.01, 0.1}}, {"alphas", {0.0, 0.01, 0.1, 1.0}},
                         {"seeds", 16}, {"static_time", 0.05}, {"diffusive_low", 0.1}, {"super_diffusive", 10.0},
                         {"init", "uniform"}, {"gamma0", 0.2}},
                    run_phase_diagram, nullptr});
    list.push_back({"kernel-check", "Monte-Carlo covariance kernel against the Gaussian closed form",
                    Json{{"n", 4}, {"d", 16}, {"beta", 1.0}, {"samples", 20000}, {"configs", 1}, {"i", 0},
                         {"j", 1}},
                    run_kernel_check, nullptr});
    list.push_back({"delta-check", "normalized overlap against the large-d expansion",
                    Json{{"ds", {32, 128}}, {"r", 0.5}, {"draws", 100000}, {"c", 1.0}}, run_delta_check, nullptr});
    return list;
}

}  // namespace

const std::vector<Scenario>& scenarios() {
    static const std::vector<Scenario> kRegistry = build_registry();
    return kRegistry;
}

const Scenario* find_scenario(std::string_view name) {
    for (const auto& s : scenarios()) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

}  // namespace tokdyn::experiments
