// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "dmlmc/errors.hpp"
#include "dmlmc/rng.hpp"

namespace dmlmc {

namespace {

// Conjugate update written out independently of posterior_params.
struct CoordPosterior {
    Vec mu;
    Vec var;
};

CoordPosterior update_component(const InverseProblem& p, const GaussianDiag& comp) {
    const std::size_t n = comp.mu.size();
    CoordPosterior out;
    out.mu = comp.mu;
    out.var = comp.var;
    if (std::isinf(p.sigma)) return out;
    if (p.kind == InverseProblem::OperatorKind::Mask) {
        for (std::size_t i = 0; i < p.observed.size(); ++i) {
            const std::size_t c = p.observed[i];
            if (p.sigma == 0.0) {
                out.mu[c] = p.y[i];
                out.var[c] = 0.0;
            } else {
                const double prec = 1.0 / comp.var[c] + 1.0 / (p.sigma * p.sigma);
                out.var[c] = 1.0 / prec;
                out.mu[c] = out.var[c] * (comp.mu[c] / comp.var[c] +
                                          p.y[i] / (p.sigma * p.sigma));
            }
        }
        return out;
    }
    // Dense operator: requires orthogonal columns (diagonal A^T A).
    Vec ata(n, 0.0), aty(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double v = 0.0;
            for (std::size_t r = 0; r < p.A.rows; ++r) v += p.A(r, i) * p.A(r, j);
            if (i == j) {
                ata[i] = v;
            } else if (v != 0.0) {
                throw StructureError("oracle: A^T A must be diagonal");
            }
        }
        for (std::size_t r = 0; r < p.A.rows; ++r) aty[i] += p.A(r, i) * p.y[r];
    }
    const double inv_s2 = 1.0 / (p.sigma * p.sigma);
    for (std::size_t i = 0; i < n; ++i) {
        const double prec = 1.0 / comp.var[i] + ata[i] * inv_s2;
        out.var[i] = 1.0 / prec;
        out.mu[i] = out.var[i] * (comp.mu[i] / comp.var[i] + aty[i] * inv_s2);
    }
    return out;
}

std::vector<double> mixture_weights(const InverseProblem& p) {
    const std::size_t K = p.prior.components.size();
    if (K == 1 || std::isinf(p.sigma)) return p.prior.weights;
    if (p.kind != InverseProblem::OperatorKind::Mask) {
        throw StructureError("oracle mixture truth supports mask observations only");
    }
    std::vector<double> logw(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = p.prior.components[k];
        double ll = 0.0;
        for (std::size_t i = 0; i < p.observed.size(); ++i) {
            const std::size_t idx = p.observed[i];
            const double v = c.var[idx] + p.sigma * p.sigma;
            const double r = p.y[i] - c.mu[idx];
            ll += -0.5 * (std::log(v) + r * r / v);
        }
        logw[k] = std::log(p.prior.weights[k]) + ll;
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    double sum = 0.0;
    for (double& lw : logw) {
        lw = std::exp(lw - mx);
        sum += lw;
    }
    for (double& lw : logw) lw /= sum;
    return logw;
}

}  // namespace

Vec gaussian_truth(const InverseProblem& p) {
    if (p.prior.components.size() != 1) {
        throw DomainError("gaussian_truth: prior must be a single Gaussian");
    }
    const CoordPosterior post = update_component(p, p.prior.components[0]);
    Vec out(post.mu.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = post.mu[i] * post.mu[i] + post.var[i];
    }
    return out;
}

Vec mixture_truth(const InverseProblem& p) {
    const std::size_t K = p.prior.components.size();
    const std::vector<double> w = mixture_weights(p);
    Vec out(p.dim(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const CoordPosterior post = update_component(p, p.prior.components[k]);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += w[k] * (post.mu[i] * post.mu[i] + post.var[i]);
        }
    }
    return out;
}

DirectMoment direct_posterior_second_moment(const InverseProblem& p, std::uint64_t N,
                                            std::uint64_t seed) {
    const std::size_t K = p.prior.components.size();
    const std::vector<double> w =
        K == 1 ? std::vector<double>{1.0} : mixture_weights(p);
    std::vector<CoordPosterior> comps;
    comps.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        comps.push_back(update_component(p, p.prior.components[k]));
    }
    std::vector<double> cum(K);
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        acc += w[k];
        cum[k] = acc;
    }
    const std::size_t n = p.dim();
    Vec sum(n, 0.0), sumsq(n, 0.0);
    const RngKey key{seed, 0};
    for (std::uint64_t i = 0; i < N; ++i) {
        // component pick from a uniform derived from the keyed generator
        const double z = normal_at(key, Draw::Direct, i, 0xFFFFFFFFu, 0);
        const double u = 0.5 * std::erfc(-z / std::sqrt(2.0));  // Phi(z), uniform
        std::size_t k = 0;
        while (k + 1 < K && u > cum[k]) ++k;
        for (std::size_t c = 0; c < n; ++c) {
            const double xi = normal_at(key, Draw::Direct, i, 1,
                                        static_cast<std::uint32_t>(c));
            const double x = comps[k].mu[c] + std::sqrt(comps[k].var[c]) * xi;
            sum[c] += x * x;
            sumsq[c] += x * x * x * x;
        }
    }
    DirectMoment out;
    out.mean.resize(n);
    out.stderr_per_coord.resize(n);
    const double nd = static_cast<double>(N);
    for (std::size_t c = 0; c < n; ++c) {
        out.mean[c] = sum[c] / nd;
        const double var = std::max(sumsq[c] / nd - out.mean[c] * out.mean[c], 0.0);
        out.stderr_per_coord[c] = std::sqrt(var / nd);
    }
    return out;
}

}  // namespace dmlmc
