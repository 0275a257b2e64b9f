// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_SAMPLER_HPP
#define DMLMC_SAMPLER_HPP

#include <cstdint>

#include "dmlmc/problem.hpp"
#include "dmlmc/rng.hpp"
#include "dmlmc/schedule.hpp"
#include "dmlmc/score.hpp"

namespace dmlmc {

/// Law of the terminal state x_T. The binary mask uses 1 for free
/// (unobserved) coordinates and 0 for coordinates pinned to the observation,
/// i.e. x_T ~ N((I - M) y, M).
struct TerminalLaw {
    enum class Mode { StandardGaussian, PinnedObservation, Masked };

    Mode mode = Mode::StandardGaussian;
    std::size_t dim = 0;
    Vec mask;    // Masked only; entries in {0, 1}
    Vec y_full;  // observation embedded in R^n (Pinned and Masked)

    static TerminalLaw standard_gaussian(std::size_t n);
    static TerminalLaw pinned(Vec y_full);
    static TerminalLaw masked(Vec mask, Vec y_full);
};

/// How the final approach from t = 1 to t = 0 is handled; the score is never
/// evaluated at t = 0.
struct TruncationRule {
    enum class Mode { ReturnX1, FinalGaussian };

    Mode mode = Mode::FinalGaussian;
    double sigma1 = 0.0;  // FinalGaussian only
};

struct SamplerOptions {
    /// Suppress all Gaussian increments except the terminal draw
    /// (deterministic push-forward sampling).
    bool deterministic = false;
};

/// Fine state, coarse state and the accumulated coarse noise advancing
/// together; t is the current fine-grid time index.
struct CoupledPair {
    Vec x_fine;
    Vec x_coarse;
    Vec eta_c;
    std::int64_t t = 0;
};

Vec init_terminal(const TerminalLaw& law, std::size_t n, const RngKey& key,
                  std::uint64_t sample, std::uint32_t time_T);

/// One reverse update x_{t-delta} = a x - b s_theta(x,t,y) + noise. The noise
/// vector is caller-supplied and must already be scaled to standard deviation
/// sqrt(skip_variance); that is what lets the coupling inject correlated
/// noise. Consumes exactly one NFE.
Vec reverse_step(const Vec& x, int t, int delta, ScoreModel& score,
                 std::span<const double> y, const Vec& noise,
                 const NoiseSchedule& s);

/// Final approach from the state at t = 1 to the output.
Vec apply_truncation(const Vec& x1, const TruncationRule& rule,
                     const NoiseSchedule& s, const RngKey& key,
                     std::uint64_t sample, const SamplerOptions& opts = {});

/// Reverse chain at one level: T0*M^level score steps over the grid times
/// max(T - k*delta, 1) followed by the truncation map, so every level stops
/// at t = 1 before truncation and consumes exactly T0*M^level NFEs.
Vec sample_path(int level, const LevelGrid& grid, const NoiseSchedule& s,
                const TerminalLaw& law, const TruncationRule& rule,
                ScoreModel& score, std::span<const double> y,
                const SamplerOptions& opts, const RngKey& key,
                std::uint64_t sample);

/// Advances the fine state by M steps of size delta_l, accumulating the
/// reweighted coarse noise, then the coarse state by the matching single
/// step driven by that noise. eta_c is reset on entry.
void coupled_block(CoupledPair& pair, int level, const LevelGrid& grid,
                   const NoiseSchedule& s, ScoreModel& score,
                   std::span<const double> y, const SamplerOptions& opts,
                   const RngKey& key, std::uint64_t sample);

struct PairSample {
    Vec x_fine;
    Vec x_coarse;
};

/// Couples level `level` with level-1: both paths share the terminal draw and
/// the fine Gaussian increments; consumes T0*(M^level + M^(level-1)) NFEs.
/// The fine path is bit-identical to sample_path(level) at the same key.
PairSample sample_coupled_pair(int level, const LevelGrid& grid,
                               const NoiseSchedule& s, const TerminalLaw& law,
                               const TruncationRule& rule, ScoreModel& score,
                               std::span<const double> y,
                               const SamplerOptions& opts, const RngKey& key,
                               std::uint64_t sample);

}  // namespace dmlmc

#endif  // DMLMC_SAMPLER_HPP
