// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_SCHEDULE_HPP
#define DMLMC_SCHEDULE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dmlmc {

/// Signal-retention ladder gamma_0 = 1 > gamma_1 > ... > gamma_T > 0 with the
/// derived Gamma_t = 1 - gamma_t. Immutable after construction; safe to share
/// across concurrent samplers.
class NoiseSchedule {
public:
    /// Validates the invariants (gamma_0 = 1, strictly decreasing,
    /// gamma_T > 0) and throws ScheduleError naming the violated one.
    explicit NoiseSchedule(std::vector<double> gammas);

    int T() const { return static_cast<int>(gammas_.size()) - 1; }
    double gamma(int t) const { return gammas_.at(static_cast<size_t>(t)); }
    double Gamma(int t) const { return Gammas_.at(static_cast<size_t>(t)); }
    const std::vector<double>& gammas() const { return gammas_; }

    /// Plain-text audit dump: header `t,gamma`, one row per index, 17
    /// significant digits so values round-trip.
    void save_csv(std::ostream& os) const;
    void save_csv(const std::string& path) const;
    static NoiseSchedule load_csv(std::istream& is);
    static NoiseSchedule load_csv(const std::string& path);

private:
    std::vector<double> gammas_;
    std::vector<double> Gammas_;
};

struct ScheduleParams {
    double gamma_T = 0.0;
};

/// gamma_T for the denoising-style terminal pin, gamma_T = 1 / (1 + sigma_y^2).
double gamma_for_observation_noise(double sigma_y);

/// Families: "log-linear" (gamma_t = gamma_T^(t/T), constant consecutive
/// ratio) and "terminal-pinned" (same ladder, gamma_T supplied by the
/// denoising setup and stored exactly at t = T).
NoiseSchedule build_schedule(const std::string& kind, int T,
                             const ScheduleParams& params);

/// sigma^2_{t-delta;0,t} = (Gamma_{t-delta}/Gamma_t)(1 - gamma_t/gamma_{t-delta}).
/// delta = 0 is the degenerate zero-width step and returns 0; t - delta = 0
/// uses gamma_0 = 1, Gamma_0 = 0 and also returns 0 (the full approach to the
/// input is deterministic). Queries at t = 0 are a DomainError.
double skip_variance(const NoiseSchedule& s, int t, int delta);

struct StepCoefficients {
    double a;  // on x_t
    double b;  // on s_theta(x_t, t, y); update is a*x - b*score + c*xi
    double c;  // noise standard deviation, sqrt(skip_variance)
};

/// Closed-form reverse-update coefficients for a skip of `delta` from time t.
StepCoefficients step_coefficients(const NoiseSchedule& s, int t, int delta);

/// Geometric level hierarchy: level l performs T0*M^l reverse steps over the
/// shared fine grid of T = T0*M^L points, skipping delta_l = M^(L-l) indices
/// per step. Sharing one grid keeps gamma values bit-identical between a
/// coarse level and the coarse half of the next finer one.
struct LevelGrid {
    int T0;
    int M;
    int L;

    LevelGrid(int T0_, int M_, int L_);

    std::int64_t T() const { return steps(L) * skip(L); }
    std::int64_t steps(int level) const;  // T0 * M^level
    std::int64_t skip(int level) const;   // M^(L - level)
};

}  // namespace dmlmc

#endif  // DMLMC_SCHEDULE_HPP
