// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_SCORE_HPP
#define DMLMC_SCORE_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>

#include "dmlmc/problem.hpp"
#include "dmlmc/schedule.hpp"

namespace dmlmc {

/// Pluggable score s_theta(x, t, y): the gradient of the log density of the
/// time-t marginal of the diffusion target. Every evaluate call increments
/// the NFE counter by exactly one; implementations must be safe for
/// concurrent calls.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    void evaluate(std::span<const double> x, int t, std::span<const double> y,
                  std::span<double> out) {
        nfe_.fetch_add(1, std::memory_order_relaxed);
        evaluate_impl(x, t, y, out);
    }

    /// Continuous-time variant used by the SDE integrators; addressed by the
    /// noise level gamma rather than a grid index. Counts one NFE as well.
    void evaluate_at_gamma(std::span<const double> x, double gamma,
                           std::span<const double> y, std::span<double> out) {
        nfe_.fetch_add(1, std::memory_order_relaxed);
        evaluate_gamma_impl(x, gamma, y, out);
    }

    std::uint64_t nfe_count() const { return nfe_.load(std::memory_order_relaxed); }

protected:
    virtual void evaluate_impl(std::span<const double> x, int t,
                               std::span<const double> y, std::span<double> out) = 0;
    virtual void evaluate_gamma_impl(std::span<const double> x, double gamma,
                                     std::span<const double> y, std::span<double> out);

private:
    std::atomic<std::uint64_t> nfe_{0};
};

/// Score of the time-t Gaussian marginal N(sqrt(gamma_t) mu, gamma_t var + Gamma_t):
/// -(gamma_t var + Gamma_t)^{-1} (x - sqrt(gamma_t) mu), componentwise.
/// Throws DomainError when t = 0 meets a zero variance entry (the score is
/// singular there).
void marginal_score_gaussian(const Vec& mu, const Vec& var, const NoiseSchedule& s,
                             int t, std::span<const double> x, std::span<double> out);
void marginal_score_gaussian_at(const Vec& mu, const Vec& var, double gamma,
                                std::span<const double> x, std::span<double> out);

/// Responsibility-weighted mixture score, stabilised with max-log subtraction.
void mixture_score(const Posterior& target, const NoiseSchedule& s, int t,
                   std::span<const double> x, std::span<double> out);
void mixture_score_at(const Posterior& target, double gamma,
                      std::span<const double> x, std::span<double> out);

/// x0 estimate from the score: (x + Gamma_t * score) / sqrt(gamma_t).
Vec x0_from_score(std::span<const double> x, int t, std::span<const double> score,
                  const NoiseSchedule& s);

/// Exact score model for a (possibly mixture) diagonal Gaussian target.
class AnalyticScoreModel : public ScoreModel {
public:
    AnalyticScoreModel(Posterior target, std::shared_ptr<const NoiseSchedule> schedule);

    const Posterior& target() const { return target_; }

protected:
    void evaluate_impl(std::span<const double> x, int t, std::span<const double> y,
                       std::span<double> out) override;
    void evaluate_gamma_impl(std::span<const double> x, double gamma,
                             std::span<const double> y, std::span<double> out) override;

private:
    Posterior target_;
    std::shared_ptr<const NoiseSchedule> schedule_;
};

/// Always-zero score; the sampler then follows the score-free dynamics.
class ZeroScoreModel : public ScoreModel {
protected:
    void evaluate_impl(std::span<const double>, int, std::span<const double>,
                       std::span<double> out) override {
        for (double& v : out) v = 0.0;
    }
    void evaluate_gamma_impl(std::span<const double>, double, std::span<const double>,
                             std::span<double> out) override {
        for (double& v : out) v = 0.0;
    }
};

/// Builds the analytic score model for the exact conjugate posterior of `p`.
std::unique_ptr<AnalyticScoreModel> make_posterior_score(
    const InverseProblem& p, std::shared_ptr<const NoiseSchedule> schedule);

}  // namespace dmlmc

#endif  // DMLMC_SCORE_HPP
