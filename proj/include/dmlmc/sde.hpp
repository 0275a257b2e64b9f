// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_SDE_HPP
#define DMLMC_SDE_HPP

#include <cstdint>
#include <functional>
#include <memory>

#include "dmlmc/rng.hpp"
#include "dmlmc/sampler.hpp"
#include "dmlmc/schedule.hpp"
#include "dmlmc/score.hpp"

namespace dmlmc {

enum class SamplerMode { Discrete, SdeEm, SdeDdim1 };

/// Noise level as a function of continuous diffusion time, matching the
/// discrete ladder exactly at grid indices.
class GammaCurve {
public:
    /// Analytic log-linear curve gamma(t) = gamma_T^(t/T).
    GammaCurve(double gamma_T, double T);
    /// Curve backed by a grid schedule: exact lookup at integer times, the
    /// log-linear form in between.
    explicit GammaCurve(std::shared_ptr<const NoiseSchedule> schedule);

    double operator()(double t) const;
    double Gamma(double t) const { return 1.0 - (*this)(t); }
    double horizon() const { return T_; }

private:
    std::shared_ptr<const NoiseSchedule> schedule_;
    double gamma_T_;
    double T_;
};

/// Variance-preserving drift/diffusion pair A_t = -beta/2, B_t = sqrt(beta)
/// with beta chosen so gamma_t = exp(2 int_0^t A) reproduces the log-linear
/// ladder; for that family beta is constant.
struct VpSdeForm {
    std::function<double(double)> A;
    std::function<double(double)> B;

    static VpSdeForm log_linear(double gamma_T, double T);
};

/// Euler-Maruyama update of the reverse SDE at reverse time tau with step h:
/// x + h [ -A_{T-tau} x + B^2_{T-tau} s_theta(x, T-tau) ] + sqrt(h) B_{T-tau} xi.
/// xi is a caller-supplied standard normal vector.
Vec sde_em_step(const Vec& x, double tau, double h, ScoreModel& score,
                const VpSdeForm& form, const GammaCurve& curve,
                std::span<const double> y, const Vec& xi);

/// Exponential-integrator (DDIM1) update from diffusion time s down to t,
/// expressed through gamma: coefficient sqrt(gamma_t/gamma_s) on x,
/// sqrt(gamma_t/gamma_s) Gamma_s - Gamma_t sqrt(gamma_s/gamma_t) on the
/// score, and noise variance Gamma_t (1 - (Gamma_t/Gamma_s)(gamma_s/gamma_t)).
/// xi is standard normal; on grid times the update coincides with the
/// discrete reverse step. Throws DomainError when gamma_s > gamma_t.
Vec sde_ddim1_step(const Vec& x, double s_time, double t_time, ScoreModel& score,
                   const GammaCurve& curve, std::span<const double> y,
                   const Vec& xi);

/// Reweighting factor for summing fine noise increments into a coarse one,
/// sqrt(Gamma_tgt / Gamma_mid) * exp(-int B^2/(2 Gamma)); on grid times this
/// equals the discrete coupling factor.
double sde_reweight_scaler(double gamma_mid, double Gamma_mid, double gamma_tgt,
                           double Gamma_tgt);

/// eta_coarse = scaler * eta_prev + eta_new.
Vec sde_coarse_increment(const Vec& eta_new, const Vec& eta_prev,
                         double gamma_mid, double Gamma_mid, double gamma_tgt,
                         double Gamma_tgt);

/// Full Euler-Maruyama reverse path with n_steps uniform steps over [0, T];
/// score evaluations stay on integer grid times when n_steps divides T.
Vec sde_em_path(std::int64_t n_steps, const NoiseSchedule& s,
                const GammaCurve& curve, const VpSdeForm& form,
                const TerminalLaw& law, ScoreModel& score,
                std::span<const double> y, const SamplerOptions& opts,
                const RngKey& key, std::uint64_t sample);

/// Full DDIM1 reverse path on the same clipped grid as the discrete sampler
/// (times max(T - k*delta, 1), then truncation).
Vec sde_ddim1_path(std::int64_t n_steps, const NoiseSchedule& s,
                   const GammaCurve& curve, const TerminalLaw& law,
                   const TruncationRule& rule, ScoreModel& score,
                   std::span<const double> y, const SamplerOptions& opts,
                   const RngKey& key, std::uint64_t sample);

/// Coupled fine/coarse Euler-Maruyama pair sharing Brownian increments: the
/// coarse step consumes the sum of the fine increments.
PairSample sde_em_coupled_pair(int level, const LevelGrid& grid,
                               const NoiseSchedule& s, const GammaCurve& curve,
                               const VpSdeForm& form, const TerminalLaw& law,
                               ScoreModel& score, std::span<const double> y,
                               const SamplerOptions& opts, const RngKey& key,
                               std::uint64_t sample);

}  // namespace dmlmc

#endif  // DMLMC_SDE_HPP
