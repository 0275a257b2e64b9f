// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_MLMC_HPP
#define DMLMC_MLMC_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dmlmc/problem.hpp"
#include "dmlmc/sampler.hpp"
#include "dmlmc/schedule.hpp"
#include "dmlmc/sde.hpp"

namespace dmlmc {

/// Quantity of interest, applied componentwise. The masked variant zeroes
/// observed coordinates (keep[i] = 0) before any norm is taken.
struct QoI {
    enum class Kind { SecondMoment, MaskedSecondMoment, Custom };

    Kind kind = Kind::SecondMoment;
    Vec keep;  // MaskedSecondMoment: 1 keeps the coordinate, 0 zeroes it
    std::function<void(std::span<const double>, std::span<double>)> custom;

    static QoI second_moment();
    static QoI masked_second_moment(Vec keep);
    static QoI custom_componentwise(
        std::function<void(std::span<const double>, std::span<double>)> f);

    void apply(std::span<const double> x, std::span<double> out) const;
    Vec apply(std::span<const double> x) const;
};

/// Running sums for one level: d = f(x_fine) - f(x_coarse) (at the start
/// level, d = f(x)). Merging two LevelStats is associative and commutative.
struct LevelStats {
    int level = 0;
    std::uint64_t n = 0;
    Vec sum_d, sumsq_d;  // componentwise sums of d and d*d
    Vec sum_f, sumsq_f;  // same for f(x_fine)
    double cost_per_sample = 0.0;  // NFEs per sample

    void init(int level_, std::size_t dim, double cost);
    void accumulate(std::span<const double> d, std::span<const double> f);
    void merge(const LevelStats& other);

    Vec mean_d() const;
    Vec mean_f() const;
    /// Unbiased sample variance of the vector difference, summed over
    /// coordinates: E||d - E d||^2 estimated with the 1/(n-1) convention.
    double var_d() const;
    double var_f() const;
};

/// (Y_l, V_l) with Y_l the componentwise mean of differences and V_l the
/// summed-coordinate unbiased variance. Requires n >= 2.
std::pair<Vec, double> level_mean_and_variance(const LevelStats& stats);

/// N_l = ceil(2 eps^-2 sqrt(V_l/C_l) sum_k sqrt(V_k C_k)). Zero-variance
/// levels receive zero samples.
std::vector<std::uint64_t> optimal_allocation(const std::vector<double>& V,
                                              const std::vector<double>& C,
                                              double eps);

/// max(||Y_{L-1}|| M^-alpha, ||Y_L||) / (M^alpha - 1).
double bias_estimate(double Y_L_norm, double Y_Lm1_norm, double alpha, int M);

/// Fixed-point correction of the upward bias of ||Y|| as an estimator of
/// ||E d||, dividing by (1 + V/(N b^2))^(1/2) until successive iterates agree
/// within tol. `multiply` restores the multiplicative reading.
double debias_level_mean(double Y_norm, double V, std::uint64_t N,
                         double tol = 1e-12, int max_iter = 100,
                         bool multiply = false);

/// Start-level rule: true iff V1 <= (sqrt(Vf M) - sqrt(Vc))^2 / (1 + M).
bool start_level_check(double V1, double Vf, double Vc, int M);

struct LevelSummary {
    int level = 0;
    double Y_norm = 0.0;
    double V = 0.0;
    std::uint64_t N = 0;
};

/// Least-squares decay rates: alpha = -slope of log_M ||Y_l||, beta = -slope
/// of log_M V_l, both against l. Throws RateUnavailableError with fewer than
/// two usable points.
std::pair<double, double> fit_rates(const std::vector<LevelSummary>& levels,
                                    int M = 2);

/// eps_est = sqrt(||Y_L||^2 / (M^alpha - 1)^2 + sum_l V_l / N_l).
double eps_estimate(const std::vector<LevelSummary>& levels, double alpha, int M);

struct CostPrediction {
    double mlmc = 0.0;
    double mc = 0.0;
    std::string regime;
};

/// Asymptotic cost model: V0 C0 eps^-2 times 1 (beta > 1), |log_M eps|^2
/// (beta = 1) or eps^((beta-1)/alpha) (beta < 1); the MC prediction scales as
/// eps^(-2 - 1/alpha).
CostPrediction predict_cost(double alpha, double beta, double V0, double C0,
                            double eps, int M);

/// Everything needed to draw level samples for one estimation problem.
struct MlmcProblem {
    LevelGrid grid;
    std::shared_ptr<const NoiseSchedule> schedule;
    TerminalLaw law;
    TruncationRule rule;
    ScoreModel* score = nullptr;
    Vec y;
    QoI qoi;
    SamplerOptions opts;
    SamplerMode mode = SamplerMode::Discrete;

    double level_cost(int level, int l0) const;
};

/// Draws samples [first, first+count) at `level` (coupled pairs above l0,
/// single paths at l0) and accumulates their QoI statistics. Work is split
/// into fixed-size chunks merged in index order, so the result is
/// bit-identical for any worker count.
LevelStats draw_level_stats(const MlmcProblem& mp, int level, int l0,
                            std::uint64_t first, std::uint64_t count,
                            std::uint64_t seed, int workers);

struct McResult {
    Vec estimate;
    double stderr_norm = 0.0;
    std::uint64_t total_nfe = 0;
};

/// Plain Monte Carlo over N fine-level paths; stderr is sqrt(V/N) with V the
/// summed-coordinate sample variance. Requires N >= 2.
McResult mc_estimate(const MlmcProblem& mp, int level, std::uint64_t N,
                     std::uint64_t seed, int workers);

struct TelemetryRow {
    int iteration = 0;
    int level = 0;
    std::uint64_t N_target = 0;
    std::uint64_t N_done = 0;
    double V_l = 0.0;
    double Y_norm = 0.0;
    double bias_est = 0.0;
    double eps_est = 0.0;
    std::uint64_t total_nfe = 0;
};

struct AdaptiveOptions {
    double eps = 1e-2;
    int l0 = 0;
    std::uint64_t N0 = 100;
    int L_max = 12;
    std::uint64_t seed = 0;
    int workers = 1;
    double alpha_fallback = 0.5;
    bool debias_multiply = false;
    std::function<void(const TelemetryRow&)> telemetry;
};

struct MlmcResult {
    Vec estimate;
    double eps_target = 0.0;
    double eps_est = 0.0;
    std::vector<LevelStats> levels;
    double alpha = 0.0;
    double beta = 0.0;
    std::uint64_t total_nfe = 0;
    int l0 = 0;
    int L = 0;
    bool converged = false;
};

struct NonConvergenceError : Error {
    NonConvergenceError(std::string msg, MlmcResult partial_)
        : Error(std::move(msg)), partial(std::move(partial_)) {}
    MlmcResult partial;
};

/// Adaptive driver: seeds levels l0..l0+2 with N0 samples, reallocates via
/// optimal_allocation, extends L while the (debiased) bias estimate exceeds
/// eps/sqrt(2), and throws NonConvergenceError past L_max.
MlmcResult adaptive_mlmc(const MlmcProblem& mp, const AdaptiveOptions& opt);

/// Debiased ||Y_l|| with the variance recomputed from the stored sums while
/// the corrected mean norm is held fixed.
std::pair<double, double> debiased_norm_and_variance(const LevelStats& stats,
                                                     bool multiply = false);

/// Raises l0 until start_level_check passes, estimating the three variances
/// from pilot coupled pairs at each candidate.
int auto_start_level(const MlmcProblem& mp, int l0_min, int l0_cap,
                     std::uint64_t N_pilot, std::uint64_t seed, int workers);

}  // namespace dmlmc

#endif  // DMLMC_MLMC_HPP
