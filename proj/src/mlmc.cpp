// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/mlmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "dmlmc/errors.hpp"

namespace dmlmc {

QoI QoI::second_moment() {
    QoI q;
    q.kind = Kind::SecondMoment;
    return q;
}

QoI QoI::masked_second_moment(Vec keep) {
    for (double k : keep) {
        if (k != 0.0 && k != 1.0) throw DomainError("QoI mask entries must be 0 or 1");
    }
    QoI q;
    q.kind = Kind::MaskedSecondMoment;
    q.keep = std::move(keep);
    return q;
}

QoI QoI::custom_componentwise(
    std::function<void(std::span<const double>, std::span<double>)> f) {
    QoI q;
    q.kind = Kind::Custom;
    q.custom = std::move(f);
    return q;
}

void QoI::apply(std::span<const double> x, std::span<double> out) const {
    switch (kind) {
        case Kind::SecondMoment:
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
            break;
        case Kind::MaskedSecondMoment:
            for (std::size_t i = 0; i < x.size(); ++i) {
                out[i] = keep[i] == 1.0 ? x[i] * x[i] : 0.0;
            }
            break;
        case Kind::Custom:
            custom(x, out);
            break;
    }
}

Vec QoI::apply(std::span<const double> x) const {
    Vec out(x.size());
    apply(x, out);
    return out;
}

void LevelStats::init(int level_, std::size_t dim, double cost) {
    level = level_;
    n = 0;
    sum_d.assign(dim, 0.0);
    sumsq_d.assign(dim, 0.0);
    sum_f.assign(dim, 0.0);
    sumsq_f.assign(dim, 0.0);
    cost_per_sample = cost;
}

void LevelStats::accumulate(std::span<const double> d, std::span<const double> f) {
    ++n;
    for (std::size_t i = 0; i < d.size(); ++i) {
        sum_d[i] += d[i];
        sumsq_d[i] += d[i] * d[i];
        sum_f[i] += f[i];
        sumsq_f[i] += f[i] * f[i];
    }
}

void LevelStats::merge(const LevelStats& other) {
    if (other.n == 0) return;
    if (n == 0 && sum_d.empty()) {
        *this = other;
        return;
    }
    if (other.level != level || other.sum_d.size() != sum_d.size()) {
        throw DomainError("LevelStats::merge: incompatible partitions");
    }
    n += other.n;
    for (std::size_t i = 0; i < sum_d.size(); ++i) {
        sum_d[i] += other.sum_d[i];
        sumsq_d[i] += other.sumsq_d[i];
        sum_f[i] += other.sum_f[i];
        sumsq_f[i] += other.sumsq_f[i];
    }
}

namespace {

Vec mean_of(const Vec& sum, std::uint64_t n) {
    Vec out(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
        out[i] = sum[i] / static_cast<double>(n);
    }
    return out;
}

double var_of(const Vec& sum, const Vec& sumsq, std::uint64_t n) {
    if (n < 2) throw DomainError("variance needs at least two samples");
    const double nd = static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        const double centered = sumsq[i] - sum[i] * sum[i] / nd;
        total += centered / (nd - 1.0);
    }
    return std::max(total, 0.0);
}

double norm_of(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

Vec LevelStats::mean_d() const { return mean_of(sum_d, n); }
Vec LevelStats::mean_f() const { return mean_of(sum_f, n); }
double LevelStats::var_d() const { return var_of(sum_d, sumsq_d, n); }
double LevelStats::var_f() const { return var_of(sum_f, sumsq_f, n); }

std::pair<Vec, double> level_mean_and_variance(const LevelStats& stats) {
    if (stats.n < 2) throw DomainError("level_mean_and_variance: N_l must be >= 2");
    return {stats.mean_d(), stats.var_d()};
}

std::vector<std::uint64_t> optimal_allocation(const std::vector<double>& V,
                                              const std::vector<double>& C,
                                              double eps) {
    if (!(eps > 0.0)) throw DomainError("optimal_allocation: eps must be > 0");
    if (V.size() != C.size()) throw DomainError("optimal_allocation: size mismatch");
    double lambda = 0.0;
    for (std::size_t l = 0; l < V.size(); ++l) {
        if (V[l] < 0.0) throw DomainError("optimal_allocation: negative variance");
        if (!(C[l] > 0.0)) throw DomainError("optimal_allocation: cost must be > 0");
        lambda += std::sqrt(V[l] * C[l]);
    }
    std::vector<std::uint64_t> N(V.size(), 0);
    for (std::size_t l = 0; l < V.size(); ++l) {
        if (V[l] == 0.0) continue;  // level contributes bias only
        const double raw = 2.0 / (eps * eps) * std::sqrt(V[l] / C[l]) * lambda;
        N[l] = static_cast<std::uint64_t>(std::ceil(raw));
    }
    return N;
}

double bias_estimate(double Y_L_norm, double Y_Lm1_norm, double alpha, int M) {
    if (!(alpha > 0.0)) throw DomainError("bias_estimate: alpha must be > 0");
    if (M < 2) throw DomainError("bias_estimate: M must be >= 2");
    const double Ma = std::pow(static_cast<double>(M), alpha);
    return std::max(Y_Lm1_norm / Ma, Y_L_norm) / (Ma - 1.0);
}

double debias_level_mean(double Y_norm, double V, std::uint64_t N, double tol,
                         int max_iter, bool multiply) {
    if (N < 1) throw DomainError("debias_level_mean: N must be >= 1");
    if (V < 0.0) throw DomainError("debias_level_mean: V must be >= 0");
    if (Y_norm == 0.0) return 0.0;
    if (V == 0.0) return Y_norm;
    double b = Y_norm;
    for (int it = 0; it < max_iter; ++it) {
        if (b * b < 1e-300) return 0.0;
        const double factor = std::sqrt(1.0 + V / (static_cast<double>(N) * b * b));
        const double next = multiply ? Y_norm * factor : Y_norm / factor;
        if (std::abs(next - b) < tol) return std::max(next, 0.0);
        b = next;
    }
    return std::max(b, 0.0);
}

bool start_level_check(double V1, double Vf, double Vc, int M) {
    if (V1 < 0.0 || Vf < 0.0 || Vc < 0.0) {
        throw DomainError("start_level_check: variances must be nonnegative");
    }
    const double root = std::sqrt(Vf * static_cast<double>(M)) - std::sqrt(Vc);
    return V1 <= root * root / (1.0 + static_cast<double>(M));
}

std::pair<double, double> fit_rates(const std::vector<LevelSummary>& levels, int M) {
    if (M < 2) throw DomainError("fit_rates: M must be >= 2");
    auto slope = [](const std::vector<std::pair<double, double>>& pts) {
        const double n = static_cast<double>(pts.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double denom = n * sxx - sx * sx;
        return (n * sxy - sx * sy) / denom;
    };
    const double logM = std::log(static_cast<double>(M));
    std::vector<std::pair<double, double>> ypts, vpts;
    for (const auto& l : levels) {
        if (l.Y_norm > 0.0) {
            ypts.emplace_back(static_cast<double>(l.level), std::log(l.Y_norm) / logM);
        }
        if (l.V > 0.0) {
            vpts.emplace_back(static_cast<double>(l.level), std::log(l.V) / logM);
        }
    }
    if (ypts.size() < 2 || vpts.size() < 2) {
        throw RateUnavailableError("fit_rates: need at least two usable levels");
    }
    return {-slope(ypts), -slope(vpts)};
}

double eps_estimate(const std::vector<LevelSummary>& levels, double alpha, int M) {
    if (levels.empty()) return 0.0;
    const double Ma = std::pow(static_cast<double>(M), alpha);
    const double YL = levels.back().Y_norm;
    double var_sum = 0.0;
    for (const auto& l : levels) {
        if (l.N > 0) var_sum += l.V / static_cast<double>(l.N);
    }
    return std::sqrt(YL * YL / ((Ma - 1.0) * (Ma - 1.0)) + var_sum);
}

CostPrediction predict_cost(double alpha, double beta, double V0, double C0,
                            double eps, int M) {
    if (!(alpha > 0.0) || !(V0 > 0.0) || !(C0 > 0.0) || !(eps > 0.0)) {
        throw DomainError("predict_cost: inputs must be positive");
    }
    CostPrediction out;
    const double base = V0 * C0 / (eps * eps);
    if (beta > 1.0) {
        out.mlmc = base;
        out.regime = "beta>1";
    } else if (beta == 1.0) {
        const double lg = std::abs(std::log(eps) / std::log(static_cast<double>(M)));
        out.mlmc = base * lg * lg;
        out.regime = "beta=1";
    } else {
        out.mlmc = base * std::pow(eps, (beta - 1.0) / alpha);
        out.regime = "beta<1";
    }
    out.mc = V0 * C0 * std::pow(eps, -2.0 - 1.0 / alpha);
    return out;
}

double MlmcProblem::level_cost(int level, int l0) const {
    const double fine = static_cast<double>(grid.steps(level));
    if (level == l0) return fine;
    return fine + static_cast<double>(grid.steps(level - 1));
}

namespace {

// One sample's QoI contribution at `level`.
void sample_into(const MlmcProblem& mp, int level, int l0, std::uint64_t index,
                 std::uint64_t seed, LevelStats& acc, Vec& d_buf, Vec& f_buf) {
    const RngKey key{seed, static_cast<std::uint32_t>(level)};
    if (mp.mode == SamplerMode::SdeEm) {
        const GammaCurve curve(mp.schedule);
        const VpSdeForm form = VpSdeForm::log_linear(
            mp.schedule->gamma(mp.schedule->T()), static_cast<double>(mp.schedule->T()));
        if (level == l0) {
            const Vec x = sde_em_path(mp.grid.steps(level), *mp.schedule, curve, form,
                                      mp.law, *mp.score, mp.y, mp.opts, key, index);
            mp.qoi.apply(x, f_buf);
            acc.accumulate(f_buf, f_buf);
        } else {
            const PairSample p = sde_em_coupled_pair(level, mp.grid, *mp.schedule,
                                                     curve, form, mp.law, *mp.score,
                                                     mp.y, mp.opts, key, index);
            mp.qoi.apply(p.x_fine, f_buf);
            mp.qoi.apply(p.x_coarse, d_buf);
            for (std::size_t i = 0; i < d_buf.size(); ++i) d_buf[i] = f_buf[i] - d_buf[i];
            acc.accumulate(d_buf, f_buf);
        }
        return;
    }
    // Discrete and DDIM1 coincide on grid times; the discrete sampler is the
    // reference implementation for both.
    if (level == l0) {
        const Vec x = sample_path(level, mp.grid, *mp.schedule, mp.law, mp.rule,
                                  *mp.score, mp.y, mp.opts, key, index);
        mp.qoi.apply(x, f_buf);
        acc.accumulate(f_buf, f_buf);
    } else {
        const PairSample p = sample_coupled_pair(level, mp.grid, *mp.schedule, mp.law,
                                                 mp.rule, *mp.score, mp.y, mp.opts,
                                                 key, index);
        mp.qoi.apply(p.x_fine, f_buf);
        mp.qoi.apply(p.x_coarse, d_buf);
        for (std::size_t i = 0; i < d_buf.size(); ++i) d_buf[i] = f_buf[i] - d_buf[i];
        acc.accumulate(d_buf, f_buf);
    }
}

constexpr std::uint64_t kChunk = 64;

}  // namespace

LevelStats draw_level_stats(const MlmcProblem& mp, int level, int l0,
                            std::uint64_t first, std::uint64_t count,
                            std::uint64_t seed, int workers) {
    const std::size_t dim = mp.law.dim;
    const double cost = mp.level_cost(level, l0);
    LevelStats total;
    total.init(level, dim, cost);
    if (count == 0) return total;

    const std::uint64_t nchunks = (count + kChunk - 1) / kChunk;
    std::vector<LevelStats> parts(nchunks);

    auto run_chunk = [&](std::uint64_t c) {
        LevelStats part;
        part.init(level, dim, cost);
        Vec d_buf(dim), f_buf(dim);
        const std::uint64_t lo = first + c * kChunk;
        const std::uint64_t hi = std::min(first + count, lo + kChunk);
        for (std::uint64_t idx = lo; idx < hi; ++idx) {
            sample_into(mp, level, l0, idx, seed, part, d_buf, f_buf);
        }
        parts[c] = std::move(part);
    };

    if (workers <= 1 || nchunks == 1) {
        for (std::uint64_t c = 0; c < nchunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::uint64_t> next{0};
        const int nthreads = std::min<std::uint64_t>(workers, nchunks);
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int w = 0; w < nthreads; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::uint64_t c = next.fetch_add(1);
                    if (c >= nchunks) break;
                    run_chunk(c);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    // Merge in fixed chunk order; results are then independent of the worker
    // count, bit for bit.
    for (auto& part : parts) total.merge(part);
    return total;
}

McResult mc_estimate(const MlmcProblem& mp, int level, std::uint64_t N,
                     std::uint64_t seed, int workers) {
    if (N < 2) throw DomainError("mc_estimate: N must be >= 2");
    // A plain MC run is the degenerate single-level estimator: treat `level`
    // as the start level so only fine paths are drawn.
    const LevelStats stats = draw_level_stats(mp, level, level, 0, N, seed, workers);
    McResult out;
    out.estimate = stats.mean_f();
    out.stderr_norm = std::sqrt(stats.var_f() / static_cast<double>(N));
    out.total_nfe = N * static_cast<std::uint64_t>(mp.grid.steps(level));
    return out;
}

std::pair<double, double> debiased_norm_and_variance(const LevelStats& stats,
                                                     bool multiply) {
    const double raw_norm = norm_of(stats.mean_d());
    double V = stats.var_d();
    if (raw_norm == 0.0) return {0.0, V};
    const double nd = static_cast<double>(stats.n);
    double sumsq_total = 0.0;
    for (double v : stats.sumsq_d) sumsq_total += v;
    double b = raw_norm;
    for (int it = 0; it < 100; ++it) {
        const double next = debias_level_mean(raw_norm, V, stats.n, 1e-12, 100, multiply);
        // Recompute V from the stored sums with the corrected mean norm held
        // fixed: V = (sum ||d||^2 - N b^2) / (N - 1).
        if (stats.n >= 2) {
            V = std::max((sumsq_total - nd * next * next) / (nd - 1.0), 0.0);
        }
        if (std::abs(next - b) < 1e-12) {
            b = next;
            break;
        }
        b = next;
    }
    return {b, V};
}

int auto_start_level(const MlmcProblem& mp, int l0_min, int l0_cap,
                     std::uint64_t N_pilot, std::uint64_t seed, int workers) {
    for (int l0 = l0_min; l0 < l0_cap; ++l0) {
        const LevelStats pilot =
            draw_level_stats(mp, l0 + 1, l0, 0, N_pilot, seed, workers);
        const double V1 = pilot.var_d();
        const double Vf = pilot.var_f();
        // Coarse-path variance from a pilot at the candidate start level.
        const LevelStats base = draw_level_stats(mp, l0, l0, 0, N_pilot, seed, workers);
        const double Vc = base.var_f();
        if (start_level_check(V1, Vf, Vc, mp.grid.M)) return l0;
    }
    return l0_cap;
}

MlmcResult adaptive_mlmc(const MlmcProblem& mp, const AdaptiveOptions& opt) {
    if (!(opt.eps > 0.0)) throw DomainError("adaptive_mlmc: eps must be > 0");
    if (opt.N0 < 2) throw DomainError("adaptive_mlmc: N0 must be >= 2");
    const int M = mp.grid.M;
    const int l0 = opt.l0;
    int L = l0 + 2;
    if (L > opt.L_max) throw DomainError("adaptive_mlmc: l0 + 2 exceeds L_max");

    const std::uint64_t nfe_start = mp.score->nfe_count();
    std::vector<LevelStats> stats;
    std::vector<std::uint64_t> target;
    for (int l = l0; l <= L; ++l) {
        LevelStats s;
        s.init(l, mp.law.dim, mp.level_cost(l, l0));
        stats.push_back(std::move(s));
        target.push_back(opt.N0);
    }

    auto summaries = [&](const std::vector<double>& Ynorm,
                         const std::vector<double>& V) {
        std::vector<LevelSummary> out;
        for (std::size_t i = 0; i < stats.size(); ++i) {
            out.push_back({stats[i].level, Ynorm[i], V[i], stats[i].n});
        }
        return out;
    };

    int iteration = 0;
    double alpha = opt.alpha_fallback;
    double beta = 0.0;
    std::vector<double> Ynorm, V, C;
    double bias = 0.0;
    double eps_est_now = 0.0;
    constexpr int kIterationCap = 10000;

    while (true) {
        ++iteration;
        // Draw any deficits, in batches that keep the variance estimates fresh.
        const std::uint64_t batch_cap = 10 * opt.N0;
        for (std::size_t i = 0; i < stats.size(); ++i) {
            if (stats[i].n >= target[i]) continue;
            const std::uint64_t deficit = target[i] - stats[i].n;
            const std::uint64_t batch = std::min(deficit, batch_cap);
            const LevelStats part = draw_level_stats(mp, stats[i].level, l0, stats[i].n,
                                                     batch, opt.seed, opt.workers);
            stats[i].merge(part);
        }

        Ynorm.assign(stats.size(), 0.0);
        V.assign(stats.size(), 0.0);
        C.assign(stats.size(), 0.0);
        for (std::size_t i = 0; i < stats.size(); ++i) {
            const auto [b, v] = debiased_norm_and_variance(stats[i], opt.debias_multiply);
            Ynorm[i] = b;
            V[i] = v;
            C[i] = stats[i].cost_per_sample;
        }

        // Decay rates from the difference levels above l0.
        alpha = opt.alpha_fallback;
        beta = 0.0;
        if (stats.size() >= 3) {
            const auto summ = summaries(Ynorm, V);
            const std::vector<LevelSummary> diff(summ.begin() + 1, summ.end());
            try {
                const auto [a, bta] = fit_rates(diff, M);
                if (a > 0.0) alpha = a;
                beta = std::max(bta, 0.0);
            } catch (const RateUnavailableError&) {
                // keep fallbacks
            }
        }

        const auto alloc = optimal_allocation(V, C, opt.eps);
        for (std::size_t i = 0; i < stats.size(); ++i) {
            target[i] = std::max<std::uint64_t>({target[i], alloc[i], 2});
        }

        bias = bias_estimate(Ynorm.back(), Ynorm[Ynorm.size() - 2], alpha, M);
        eps_est_now = eps_estimate(summaries(Ynorm, V), alpha, M);

        if (opt.telemetry) {
            for (std::size_t i = 0; i < stats.size(); ++i) {
                opt.telemetry({iteration, stats[i].level, target[i], stats[i].n, V[i],
                               Ynorm[i], bias, eps_est_now,
                               mp.score->nfe_count() - nfe_start});
            }
        }

        bool deficits = false;
        for (std::size_t i = 0; i < stats.size(); ++i) {
            if (stats[i].n < target[i]) deficits = true;
        }
        if (deficits && iteration < kIterationCap) continue;

        if (bias > opt.eps / std::sqrt(2.0)) {
            if (L + 1 > opt.L_max) {
                MlmcResult partial;
                partial.estimate = Vec(mp.law.dim, 0.0);
                for (const auto& s : stats) {
                    const Vec m = s.mean_d();
                    for (std::size_t i = 0; i < m.size(); ++i) partial.estimate[i] += m[i];
                }
                partial.eps_target = opt.eps;
                partial.eps_est = eps_est_now;
                partial.levels = stats;
                partial.alpha = alpha;
                partial.beta = beta;
                partial.total_nfe = mp.score->nfe_count() - nfe_start;
                partial.l0 = l0;
                partial.L = L;
                partial.converged = false;
                throw NonConvergenceError(
                    "adaptive_mlmc: level cap exceeded at eps_est=" +
                        std::to_string(eps_est_now),
                    std::move(partial));
            }
            ++L;
            LevelStats s;
            s.init(L, mp.law.dim, mp.level_cost(L, l0));
            stats.push_back(std::move(s));
            // Forecast the new level's variance from V_l ~ M^-beta before
            // sampling it, then allocate.
            std::vector<double> Vf(V);
            Vf.push_back(V.back() * std::pow(static_cast<double>(M), -beta));
            std::vector<double> Cf(C);
            Cf.push_back(mp.level_cost(L, l0));
            const auto alloc2 = optimal_allocation(Vf, Cf, opt.eps);
            target.push_back(std::max<std::uint64_t>(opt.N0, alloc2.back()));
            continue;
        }
        break;
    }

    MlmcResult res;
    res.estimate = Vec(mp.law.dim, 0.0);
    for (const auto& s : stats) {
        const Vec m = s.mean_d();
        for (std::size_t i = 0; i < m.size(); ++i) res.estimate[i] += m[i];
    }
    res.eps_target = opt.eps;
    res.eps_est = eps_est_now;
    res.levels = stats;
    res.alpha = alpha;
    res.beta = beta;
    res.total_nfe = mp.score->nfe_count() - nfe_start;
    res.l0 = l0;
    res.L = L;
    res.converged = true;
    return res;
}

}  // namespace dmlmc
