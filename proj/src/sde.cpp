// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/sde.hpp"

#include <cmath>

#include "dmlmc/errors.hpp"

namespace dmlmc {

GammaCurve::GammaCurve(double gamma_T, double T) : gamma_T_(gamma_T), T_(T) {
    if (!(gamma_T > 0.0 && gamma_T < 1.0)) {
        throw DomainError("GammaCurve: gamma_T must be in (0, 1)");
    }
    if (!(T > 0.0)) throw DomainError("GammaCurve: T must be positive");
}

GammaCurve::GammaCurve(std::shared_ptr<const NoiseSchedule> schedule)
    : schedule_(std::move(schedule)) {
    T_ = static_cast<double>(schedule_->T());
    gamma_T_ = schedule_->gamma(schedule_->T());
}

double GammaCurve::operator()(double t) const {
    if (t < 0.0 || t > T_) throw DomainError("GammaCurve: time out of range");
    if (schedule_) {
        const double r = std::round(t);
        if (r == t) return schedule_->gamma(static_cast<int>(r));
    }
    return std::pow(gamma_T_, t / T_);
}

VpSdeForm VpSdeForm::log_linear(double gamma_T, double T) {
    if (!(gamma_T > 0.0 && gamma_T < 1.0)) {
        throw DomainError("VpSdeForm: gamma_T must be in (0, 1)");
    }
    const double beta = -std::log(gamma_T) / T;  // gamma_t = exp(-beta t)
    VpSdeForm f;
    f.A = [beta](double) { return -0.5 * beta; };
    f.B = [beta](double) { return std::sqrt(beta); };
    return f;
}

Vec sde_em_step(const Vec& x, double tau, double h, ScoreModel& score,
                const VpSdeForm& form, const GammaCurve& curve,
                std::span<const double> y, const Vec& xi) {
    if (!(h > 0.0)) throw DomainError("sde_em_step: h must be positive");
    const double t_eval = curve.horizon() - tau;
    const double a = form.A(t_eval);
    const double b = form.B(t_eval);
    Vec sc(x.size(), 0.0);
    score.evaluate_at_gamma(x, curve(t_eval), y, sc);
    const double rooth = std::sqrt(h);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + h * (-a * x[i] + b * b * sc[i]) + rooth * b * xi[i];
    }
    return out;
}

Vec sde_ddim1_step(const Vec& x, double s_time, double t_time, ScoreModel& score,
                   const GammaCurve& curve, std::span<const double> y,
                   const Vec& xi) {
    const double g_s = curve(s_time);
    const double g_t = curve(t_time);
    if (g_s > g_t) {
        throw DomainError("sde_ddim1_step: time order violated (gamma_s > gamma_t)");
    }
    const double G_s = 1.0 - g_s;
    const double G_t = 1.0 - g_t;
    // e^{-int_t^s A} = sqrt(gamma_t/gamma_s)
    const double decay = std::sqrt(g_t / g_s);
    const double coef_x = decay;
    const double coef_score = decay * G_s - G_t / decay;
    const double noise_var = G_t * (1.0 - (G_t / G_s) * (g_s / g_t));
    const double noise_sd = noise_var > 0.0 ? std::sqrt(noise_var) : 0.0;
    Vec sc(x.size(), 0.0);
    score.evaluate_at_gamma(x, g_s, y, sc);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = coef_x * x[i] + coef_score * sc[i] + noise_sd * xi[i];
    }
    return out;
}

double sde_reweight_scaler(double gamma_mid, double Gamma_mid, double gamma_tgt,
                           double Gamma_tgt) {
    // int B^2/(2 Gamma) between the target and mid times equals
    // 0.5 [ log(Gamma/gamma) ]_tgt^mid for any variance-preserving pair.
    const double integral =
        0.5 * (std::log(Gamma_mid / gamma_mid) - std::log(Gamma_tgt / gamma_tgt));
    return std::sqrt(Gamma_tgt / Gamma_mid) * std::exp(-integral);
}

Vec sde_coarse_increment(const Vec& eta_new, const Vec& eta_prev,
                         double gamma_mid, double Gamma_mid, double gamma_tgt,
                         double Gamma_tgt) {
    const double scaler = sde_reweight_scaler(gamma_mid, Gamma_mid, gamma_tgt, Gamma_tgt);
    Vec out(eta_new.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = scaler * eta_prev[i] + eta_new[i];
    }
    return out;
}

Vec sde_em_path(std::int64_t n_steps, const NoiseSchedule& s,
                const GammaCurve& curve, const VpSdeForm& form,
                const TerminalLaw& law, ScoreModel& score,
                std::span<const double> y, const SamplerOptions& opts,
                const RngKey& key, std::uint64_t sample) {
    const double T = static_cast<double>(s.T());
    const double h = T / static_cast<double>(n_steps);
    Vec x = init_terminal(law, law.dim, key, sample, static_cast<std::uint32_t>(s.T()));
    Vec xi(x.size(), 0.0);
    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double tau = static_cast<double>(k) * h;
        const double t_eval = T - tau;
        if (!opts.deterministic) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                xi[i] = normal_at(key, Draw::PathNoise, sample,
                                  static_cast<std::uint32_t>(t_eval),
                                  static_cast<std::uint32_t>(i));
            }
        }
        x = sde_em_step(x, tau, h, score, form, curve, y, xi);
    }
    return x;
}

Vec sde_ddim1_path(std::int64_t n_steps, const NoiseSchedule& s,
                   const GammaCurve& curve, const TerminalLaw& law,
                   const TruncationRule& rule, ScoreModel& score,
                   std::span<const double> y, const SamplerOptions& opts,
                   const RngKey& key, std::uint64_t sample) {
    const std::int64_t T = s.T();
    if (T % n_steps != 0) {
        throw DomainError("sde_ddim1_path: n_steps must divide the grid length");
    }
    const std::int64_t delta = T / n_steps;
    Vec x = init_terminal(law, law.dim, key, sample, static_cast<std::uint32_t>(T));
    Vec xi(x.size(), 0.0);
    for (std::int64_t k = 0; k < n_steps; ++k) {
        const std::int64_t src = T - k * delta;
        const std::int64_t tgt = (k == n_steps - 1) ? 1 : src - delta;
        if (!opts.deterministic) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                xi[i] = normal_at(key, Draw::PathNoise, sample,
                                  static_cast<std::uint32_t>(src),
                                  static_cast<std::uint32_t>(i));
            }
        }
        x = sde_ddim1_step(x, static_cast<double>(src), static_cast<double>(tgt),
                           score, curve, y, xi);
    }
    return apply_truncation(x, rule, s, key, sample, opts);
}

PairSample sde_em_coupled_pair(int level, const LevelGrid& grid,
                               const NoiseSchedule& s, const GammaCurve& curve,
                               const VpSdeForm& form, const TerminalLaw& law,
                               ScoreModel& score, std::span<const double> y,
                               const SamplerOptions& opts, const RngKey& key,
                               std::uint64_t sample) {
    if (level < 1) throw DomainError("sde_em_coupled_pair: level must be >= 1");
    const double T = static_cast<double>(grid.T());
    const std::int64_t n_fine = grid.steps(level);
    const int M = grid.M;
    const double h = T / static_cast<double>(n_fine);
    Vec xf = init_terminal(law, law.dim, key, sample, static_cast<std::uint32_t>(grid.T()));
    Vec xc = xf;
    Vec xi(xf.size(), 0.0);
    Vec eta_sum(xf.size(), 0.0);
    const std::int64_t blocks = n_fine / M;
    for (std::int64_t b = 0; b < blocks; ++b) {
        std::fill(eta_sum.begin(), eta_sum.end(), 0.0);
        const double tau_c = static_cast<double>(b * M) * h;
        for (int j = 0; j < M; ++j) {
            const double tau = static_cast<double>(b * M + j) * h;
            const double t_eval = T - tau;
            if (!opts.deterministic) {
                for (std::size_t i = 0; i < xi.size(); ++i) {
                    xi[i] = normal_at(key, Draw::PathNoise, sample,
                                      static_cast<std::uint32_t>(t_eval),
                                      static_cast<std::uint32_t>(i));
                }
            } else {
                std::fill(xi.begin(), xi.end(), 0.0);
            }
            // Brownian additivity: the coarse increment is the plain sum of
            // the fine sqrt(h) B xi terms (B is constant for this family).
            const double bcoef = form.B(t_eval);
            for (std::size_t i = 0; i < xi.size(); ++i) {
                eta_sum[i] += std::sqrt(h) * bcoef * xi[i];
            }
            xf = sde_em_step(xf, tau, h, score, form, curve, y, xi);
        }
        // One coarse step of size M h using the summed increment.
        const double t_eval_c = T - tau_c;
        const double a = form.A(t_eval_c);
        const double bc = form.B(t_eval_c);
        Vec sc(xc.size(), 0.0);
        score.evaluate_at_gamma(xc, curve(t_eval_c), y, sc);
        const double hc = h * static_cast<double>(M);
        for (std::size_t i = 0; i < xc.size(); ++i) {
            xc[i] = xc[i] + hc * (-a * xc[i] + bc * bc * sc[i]) + eta_sum[i];
        }
    }
    return PairSample{std::move(xf), std::move(xc)};
}

}  // namespace dmlmc
