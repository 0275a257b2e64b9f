// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/sampler.hpp"

#include <cmath>

#include "dmlmc/errors.hpp"

namespace dmlmc {

TerminalLaw TerminalLaw::standard_gaussian(std::size_t n) {
    TerminalLaw law;
    law.mode = Mode::StandardGaussian;
    law.dim = n;
    return law;
}

TerminalLaw TerminalLaw::pinned(Vec y_full) {
    TerminalLaw law;
    law.mode = Mode::PinnedObservation;
    law.dim = y_full.size();
    law.y_full = std::move(y_full);
    return law;
}

TerminalLaw TerminalLaw::masked(Vec mask, Vec y_full) {
    if (mask.size() != y_full.size()) {
        throw DomainError("terminal law: mask/observation dimension mismatch");
    }
    for (double m : mask) {
        if (m != 0.0 && m != 1.0) {
            throw DomainError("terminal law: mask entries must be 0 or 1");
        }
    }
    TerminalLaw law;
    law.mode = Mode::Masked;
    law.dim = mask.size();
    law.mask = std::move(mask);
    law.y_full = std::move(y_full);
    return law;
}

Vec init_terminal(const TerminalLaw& law, std::size_t n, const RngKey& key,
                  std::uint64_t sample, std::uint32_t time_T) {
    Vec x(n);
    switch (law.mode) {
        case TerminalLaw::Mode::StandardGaussian:
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = normal_at(key, Draw::Terminal, sample, time_T,
                                 static_cast<std::uint32_t>(i));
            }
            break;
        case TerminalLaw::Mode::PinnedObservation: {
            if (law.y_full.size() != n) {
                throw DomainError("init_terminal: observation dimension mismatch");
            }
            // y is assumed pre-scaled by the caller when the denoising
            // convention y' = sqrt(gamma_T) y applies.
            x = law.y_full;
            break;
        }
        case TerminalLaw::Mode::Masked:
            if (law.mask.size() != n) {
                throw DomainError("init_terminal: mask dimension mismatch");
            }
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = law.mask[i] == 1.0
                           ? normal_at(key, Draw::Terminal, sample, time_T,
                                       static_cast<std::uint32_t>(i))
                           : law.y_full[i];
            }
            break;
    }
    return x;
}

Vec reverse_step(const Vec& x, int t, int delta, ScoreModel& score,
                 std::span<const double> y, const Vec& noise,
                 const NoiseSchedule& s) {
    const StepCoefficients k = step_coefficients(s, t, delta);
    Vec sc(x.size());
    score.evaluate(x, t, y, sc);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = k.a * x[i] - k.b * sc[i] + noise[i];
    }
    return out;
}

Vec apply_truncation(const Vec& x1, const TruncationRule& rule,
                     const NoiseSchedule& s, const RngKey& key,
                     std::uint64_t sample, const SamplerOptions& opts) {
    if (rule.mode == TruncationRule::Mode::ReturnX1) return x1;
    const double scale = std::sqrt(1.0 / s.gamma(1));
    Vec out(x1.size());
    const bool noisy = rule.sigma1 > 0.0 && !opts.deterministic;
    for (std::size_t i = 0; i < x1.size(); ++i) {
        const double xi = noisy ? normal_at(key, Draw::Truncation, sample, 0,
                                            static_cast<std::uint32_t>(i))
                                : 0.0;
        out[i] = scale * x1[i] + rule.sigma1 * xi;
    }
    return out;
}

namespace {

// Step k of the level-`level` chain runs from src = T - k*delta down to
// max(src - delta, 1); the last step is clipped so every level stops at the
// shared fine-grid time t = 1.
struct StepTimes {
    std::int64_t src;
    std::int64_t tgt;
};

StepTimes level_step_times(std::int64_t T, std::int64_t delta, std::int64_t n_steps,
                           std::int64_t k) {
    const std::int64_t src = T - k * delta;
    const std::int64_t tgt = (k == n_steps - 1) ? 1 : src - delta;
    return {src, tgt};
}

Vec draw_step_noise(const NoiseSchedule& s, std::int64_t src, std::int64_t tgt,
                    std::size_t n, const RngKey& key, std::uint64_t sample,
                    const SamplerOptions& opts) {
    Vec noise(n, 0.0);
    if (opts.deterministic) return noise;
    const double sd = std::sqrt(skip_variance(s, static_cast<int>(src),
                                              static_cast<int>(src - tgt)));
    if (sd == 0.0) return noise;
    for (std::size_t i = 0; i < n; ++i) {
        noise[i] = sd * normal_at(key, Draw::PathNoise, sample,
                                  static_cast<std::uint32_t>(src),
                                  static_cast<std::uint32_t>(i));
    }
    return noise;
}

}  // namespace

Vec sample_path(int level, const LevelGrid& grid, const NoiseSchedule& s,
                const TerminalLaw& law, const TruncationRule& rule,
                ScoreModel& score, std::span<const double> y,
                const SamplerOptions& opts, const RngKey& key,
                std::uint64_t sample) {
    const std::int64_t T = grid.T();
    if (s.T() != T) throw DomainError("sample_path: schedule and grid lengths disagree");
    const std::int64_t delta = grid.skip(level);
    const std::int64_t n_steps = grid.steps(level);
    Vec x = init_terminal(law, law.dim, key, sample, static_cast<std::uint32_t>(T));
    for (std::int64_t k = 0; k < n_steps; ++k) {
        const auto [src, tgt] = level_step_times(T, delta, n_steps, k);
        const Vec noise = draw_step_noise(s, src, tgt, x.size(), key, sample, opts);
        x = reverse_step(x, static_cast<int>(src), static_cast<int>(src - tgt), score,
                         y, noise, s);
    }
    return apply_truncation(x, rule, s, key, sample, opts);
}

void coupled_block(CoupledPair& pair, int level, const LevelGrid& grid,
                   const NoiseSchedule& s, ScoreModel& score,
                   std::span<const double> y, const SamplerOptions& opts,
                   const RngKey& key, std::uint64_t sample) {
    if (level < 1) throw DomainError("coupled_block: level must be >= 1");
    const int M = grid.M;
    const std::int64_t delta = grid.skip(level);
    const std::int64_t span = static_cast<std::int64_t>(M) * delta;
    if (pair.t < span) throw DomainError("coupled_block: time underflow");

    const std::int64_t coarse_src = pair.t;
    const std::int64_t coarse_tgt = (pair.t == span) ? 1 : pair.t - span;

    pair.eta_c.assign(pair.x_fine.size(), 0.0);
    for (int j = 0; j < M; ++j) {
        const std::int64_t src = pair.t - static_cast<std::int64_t>(j) * delta;
        const std::int64_t tgt =
            (pair.t == span && j == M - 1) ? 1 : src - delta;
        const Vec noise = draw_step_noise(s, src, tgt, pair.x_fine.size(), key,
                                          sample, opts);
        pair.x_fine = reverse_step(pair.x_fine, static_cast<int>(src),
                                   static_cast<int>(src - tgt), score, y, noise, s);
        // Algorithm-style noise reweighting: after the fine step src -> tgt,
        // eta_c <- sqrt(gamma_src/gamma_tgt) (Gamma_tgt/Gamma_src) eta_c + eta_f.
        const double factor = std::sqrt(s.gamma(static_cast<int>(src)) /
                                        s.gamma(static_cast<int>(tgt))) *
                              (s.Gamma(static_cast<int>(tgt)) /
                               s.Gamma(static_cast<int>(src)));
        for (std::size_t i = 0; i < pair.eta_c.size(); ++i) {
            pair.eta_c[i] = factor * pair.eta_c[i] + noise[i];
        }
    }
    pair.x_coarse = reverse_step(pair.x_coarse, static_cast<int>(coarse_src),
                                 static_cast<int>(coarse_src - coarse_tgt), score, y,
                                 pair.eta_c, s);
    pair.t = coarse_tgt;
}

PairSample sample_coupled_pair(int level, const LevelGrid& grid,
                               const NoiseSchedule& s, const TerminalLaw& law,
                               const TruncationRule& rule, ScoreModel& score,
                               std::span<const double> y,
                               const SamplerOptions& opts, const RngKey& key,
                               std::uint64_t sample) {
    if (level < 1) throw DomainError("sample_coupled_pair: level must be >= 1");
    const std::int64_t T = grid.T();
    if (s.T() != T) {
        throw DomainError("sample_coupled_pair: schedule and grid lengths disagree");
    }
    CoupledPair pair;
    pair.x_fine = init_terminal(law, law.dim, key, sample,
                                static_cast<std::uint32_t>(T));
    pair.x_coarse = pair.x_fine;  // same terminal draw
    pair.t = T;
    const std::int64_t blocks = grid.steps(level - 1);
    for (std::int64_t b = 0; b < blocks; ++b) {
        coupled_block(pair, level, grid, s, score, y, opts, key, sample);
    }
    PairSample out;
    out.x_fine = apply_truncation(pair.x_fine, rule, s, key, sample, opts);
    out.x_coarse = apply_truncation(pair.x_coarse, rule, s, key, sample, opts);
    return out;
}

}  // namespace dmlmc
