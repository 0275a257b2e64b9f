// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/score.hpp"

#include <algorithm>
#include <cmath>

#include "dmlmc/errors.hpp"

namespace dmlmc {

void ScoreModel::evaluate_gamma_impl(std::span<const double>, double,
                                     std::span<const double>, std::span<double>) {
    throw DomainError("this score model supports grid time indices only");
}

void marginal_score_gaussian_at(const Vec& mu, const Vec& var, double gamma,
                                std::span<const double> x, std::span<double> out) {
    const double Gamma = 1.0 - gamma;
    const double root = std::sqrt(gamma);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double denom = gamma * var[i] + Gamma;
        if (denom == 0.0) {
            throw DomainError(
                "marginal score singular: t = 0 with a zero-variance coordinate");
        }
        out[i] = -(x[i] - root * mu[i]) / denom;
    }
}

void marginal_score_gaussian(const Vec& mu, const Vec& var, const NoiseSchedule& s,
                             int t, std::span<const double> x, std::span<double> out) {
    marginal_score_gaussian_at(mu, var, s.gamma(t), x, out);
}

namespace {

// log density of N(x; sqrt(gamma) mu, gamma var + Gamma) summed over
// coordinates, up to the common 2*pi constant (cancels in responsibilities).
double log_marginal_unnorm(const GaussianDiag& c, double gamma,
                           std::span<const double> x) {
    const double Gamma = 1.0 - gamma;
    const double root = std::sqrt(gamma);
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = gamma * c.var[i] + Gamma;
        if (v == 0.0) {
            throw DomainError(
                "mixture score singular: t = 0 with a zero-variance coordinate");
        }
        const double r = x[i] - root * c.mu[i];
        ll += -0.5 * (std::log(v) + r * r / v);
    }
    return ll;
}

}  // namespace

void mixture_score_at(const Posterior& target, double gamma,
                      std::span<const double> x, std::span<double> out) {
    const std::size_t K = target.components.size();
    if (K == 1) {
        marginal_score_gaussian_at(target.components[0].mu, target.components[0].var,
                                   gamma, x, out);
        return;
    }
    std::vector<double> logr(K);
    for (std::size_t k = 0; k < K; ++k) {
        logr[k] = std::log(target.weights[k]) +
                  log_marginal_unnorm(target.components[k], gamma, x);
    }
    const double mx = *std::max_element(logr.begin(), logr.end());
    double sum = 0.0;
    for (double& lr : logr) {
        lr = std::exp(lr - mx);
        sum += lr;
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        throw DomainError("mixture score: responsibilities degenerate");
    }
    for (double& v : out) v = 0.0;
    Vec comp_score(x.size());
    for (std::size_t k = 0; k < K; ++k) {
        const double r = logr[k] / sum;
        if (r == 0.0) continue;
        marginal_score_gaussian_at(target.components[k].mu, target.components[k].var,
                                   gamma, x, comp_score);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] += r * comp_score[i];
    }
}

void mixture_score(const Posterior& target, const NoiseSchedule& s, int t,
                   std::span<const double> x, std::span<double> out) {
    mixture_score_at(target, s.gamma(t), x, out);
}

Vec x0_from_score(std::span<const double> x, int t, std::span<const double> score,
                  const NoiseSchedule& s) {
    const double gamma = s.gamma(t);
    const double Gamma = s.Gamma(t);
    const double root = std::sqrt(gamma);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (x[i] + Gamma * score[i]) / root;
    }
    return out;
}

AnalyticScoreModel::AnalyticScoreModel(Posterior target,
                                       std::shared_ptr<const NoiseSchedule> schedule)
    : target_(std::move(target)), schedule_(std::move(schedule)) {}

void AnalyticScoreModel::evaluate_impl(std::span<const double> x, int t,
                                       std::span<const double>, std::span<double> out) {
    mixture_score_at(target_, schedule_->gamma(t), x, out);
}

void AnalyticScoreModel::evaluate_gamma_impl(std::span<const double> x, double gamma,
                                             std::span<const double>,
                                             std::span<double> out) {
    mixture_score_at(target_, gamma, x, out);
}

std::unique_ptr<AnalyticScoreModel> make_posterior_score(
    const InverseProblem& p, std::shared_ptr<const NoiseSchedule> schedule) {
    return std::make_unique<AnalyticScoreModel>(posterior_params(p), std::move(schedule));
}

}  // namespace dmlmc
