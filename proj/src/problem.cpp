// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmlmc/errors.hpp"

namespace dmlmc {

namespace {

constexpr double kSimplexTol = 1e-12;
constexpr double kTwoPi = 6.283185307179586476925286766559;

void validate_components(const std::vector<GaussianDiag>& comps) {
    if (comps.empty()) throw DomainError("prior: needs at least one component");
    const std::size_t n = comps[0].mu.size();
    for (const auto& c : comps) {
        if (c.mu.size() != n || c.var.size() != n) {
            throw DomainError("prior: inconsistent component dimensions");
        }
        for (double v : c.var) {
            if (!(v > 0.0)) throw DomainError("prior: variances must be > 0");
        }
    }
}

// log N(r; 0, S) for a small dense covariance, via Cholesky.
double log_gaussian_dense(const Vec& r, DenseMatrix S) {
    const std::size_t m = r.size();
    // in-place lower Cholesky
    for (std::size_t j = 0; j < m; ++j) {
        double d = S(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= S(j, k) * S(j, k);
        if (!(d > 0.0)) throw StructureError("evidence covariance not positive definite");
        S(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < m; ++i) {
            double v = S(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= S(i, k) * S(j, k);
            S(i, j) = v / S(j, j);
        }
    }
    // solve L z = r, accumulate log|S| = 2 sum log L_jj
    Vec z(r);
    double logdet = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < i; ++k) z[i] -= S(i, k) * z[k];
        z[i] /= S(i, i);
        logdet += 2.0 * std::log(S(i, i));
    }
    double quad = 0.0;
    for (double v : z) quad += v * v;
    return -0.5 * (static_cast<double>(m) * std::log(kTwoPi) + logdet + quad);
}

}  // namespace

PriorSpec PriorSpec::gaussian(Vec mu, Vec var) {
    PriorSpec p;
    p.weights = {1.0};
    p.components.push_back({std::move(mu), std::move(var)});
    validate_components(p.components);
    return p;
}

PriorSpec PriorSpec::mixture(std::vector<double> weights,
                             std::vector<GaussianDiag> components) {
    if (weights.size() != components.size() || weights.empty()) {
        throw DomainError("mixture: weights/components size mismatch");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("mixture: weights must be >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
        throw DomainError("mixture: weights must sum to 1 within 1e-12");
    }
    validate_components(components);
    PriorSpec p;
    p.weights = std::move(weights);
    p.components = std::move(components);
    return p;
}

InverseProblem InverseProblem::dense(DenseMatrix A, double sigma, Vec y,
                                     PriorSpec prior) {
    if (A.rows * A.cols != A.data.size()) throw DomainError("dense A: bad storage size");
    if (A.cols != prior.dim()) throw DomainError("dense A: cols must match prior dim");
    if (A.rows != y.size()) throw DomainError("dense A: rows must match y");
    if (!(sigma > 0.0)) {
        throw DomainError("dense A requires sigma > 0 (noiseless conditioning is mask-only)");
    }
    InverseProblem p;
    p.kind = OperatorKind::Dense;
    p.A = std::move(A);
    p.sigma = sigma;
    p.y = std::move(y);
    p.prior = std::move(prior);
    return p;
}

InverseProblem InverseProblem::mask(std::vector<std::size_t> observed, double sigma,
                                    Vec y, PriorSpec prior) {
    if (observed.size() != y.size()) throw DomainError("mask: observed/y size mismatch");
    for (std::size_t i : observed) {
        if (i >= prior.dim()) throw DomainError("mask: observed index out of range");
    }
    if (!(sigma >= 0.0)) throw DomainError("mask: sigma must be >= 0");
    InverseProblem p;
    p.kind = OperatorKind::Mask;
    p.observed = std::move(observed);
    p.sigma = sigma;
    p.y = std::move(y);
    p.prior = std::move(prior);
    return p;
}

Vec InverseProblem::embed_observation() const {
    Vec full(dim(), 0.0);
    if (kind == OperatorKind::Mask) {
        for (std::size_t i = 0; i < observed.size(); ++i) full[observed[i]] = y[i];
    } else {
        if (A.rows != A.cols) {
            throw DomainError("embed_observation: dense A must be square to embed y");
        }
        full = y;
    }
    return full;
}

namespace {

// Per-component conjugate update for a dense operator; requires A^T A
// diagonal so the posterior stays componentwise.
GaussianDiag dense_update(const DenseMatrix& A, const Vec& ata_diag, double sigma,
                          const Vec& y, const GaussianDiag& comp) {
    const std::size_t n = comp.mu.size();
    const double inv_s2 = 1.0 / (sigma * sigma);
    Vec aty(n, 0.0);
    for (std::size_t r = 0; r < A.rows; ++r) {
        for (std::size_t c = 0; c < n; ++c) aty[c] += A(r, c) * y[r];
    }
    GaussianDiag out;
    out.mu.resize(n);
    out.var.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double prior_prec = std::isinf(comp.var[i]) ? 0.0 : 1.0 / comp.var[i];
        const double prec = prior_prec + ata_diag[i] * inv_s2;
        if (prec == 0.0) {
            out.var[i] = std::numeric_limits<double>::infinity();
            out.mu[i] = comp.mu[i];
            continue;
        }
        out.var[i] = 1.0 / prec;
        const double prior_term = prior_prec == 0.0 ? 0.0 : comp.mu[i] * prior_prec;
        out.mu[i] = out.var[i] * (prior_term + aty[i] * inv_s2);
    }
    return out;
}

double dense_log_evidence(const DenseMatrix& A, double sigma, const Vec& y,
                          const GaussianDiag& comp) {
    const std::size_t m = A.rows;
    Vec r(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double v = y[i];
        for (std::size_t c = 0; c < A.cols; ++c) v -= A(i, c) * comp.mu[c];
        r[i] = v;
    }
    DenseMatrix S;
    S.rows = S.cols = m;
    S.data.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double v = 0.0;
            for (std::size_t c = 0; c < A.cols; ++c) {
                v += A(i, c) * comp.var[c] * A(j, c);
            }
            if (i == j) v += sigma * sigma;
            S(i, j) = v;
        }
    }
    return log_gaussian_dense(r, S);
}

GaussianDiag mask_update(const std::vector<std::size_t>& observed, double sigma,
                         const Vec& y, const GaussianDiag& comp) {
    GaussianDiag out = comp;
    if (sigma == 0.0) {
        for (std::size_t i = 0; i < observed.size(); ++i) {
            out.mu[observed[i]] = y[i];
            out.var[observed[i]] = 0.0;
        }
        return out;
    }
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const std::size_t c = observed[i];
        const double prior_prec = std::isinf(comp.var[c]) ? 0.0 : 1.0 / comp.var[c];
        const double prec = prior_prec + inv_s2;
        out.var[c] = 1.0 / prec;
        const double prior_term = prior_prec == 0.0 ? 0.0 : comp.mu[c] * prior_prec;
        out.mu[c] = out.var[c] * (prior_term + y[i] * inv_s2);
    }
    return out;
}

double mask_log_evidence(const std::vector<std::size_t>& observed, double sigma,
                         const Vec& y, const GaussianDiag& comp) {
    double ll = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const std::size_t c = observed[i];
        const double v = comp.var[c] + sigma * sigma;
        const double r = y[i] - comp.mu[c];
        ll += -0.5 * (std::log(kTwoPi * v) + r * r / v);
    }
    return ll;
}

}  // namespace

Posterior posterior_params(const InverseProblem& p) {
    Posterior post;
    const std::size_t K = p.prior.components.size();

    // sigma -> infinity: the likelihood carries no information.
    if (std::isinf(p.sigma)) {
        post.weights = p.prior.weights;
        post.components = p.prior.components;
        return post;
    }

    Vec ata_diag;
    if (p.kind == InverseProblem::OperatorKind::Dense) {
        const std::size_t n = p.A.cols;
        ata_diag.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double v = 0.0;
                for (std::size_t r = 0; r < p.A.rows; ++r) v += p.A(r, i) * p.A(r, j);
                if (i == j) {
                    ata_diag[i] = v;
                } else if (v != 0.0) {
                    throw StructureError(
                        "posterior_params: A^T A is not diagonal; diagonal-only "
                        "storage cannot represent this posterior");
                }
            }
        }
    }

    std::vector<double> logw(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& comp = p.prior.components[k];
        if (p.kind == InverseProblem::OperatorKind::Dense) {
            post.components.push_back(dense_update(p.A, ata_diag, p.sigma, p.y, comp));
            logw[k] = std::log(p.prior.weights[k]) +
                      (K > 1 ? dense_log_evidence(p.A, p.sigma, p.y, comp) : 0.0);
        } else {
            post.components.push_back(mask_update(p.observed, p.sigma, p.y, comp));
            logw[k] = std::log(p.prior.weights[k]) +
                      (K > 1 ? mask_log_evidence(p.observed, p.sigma, p.y, comp) : 0.0);
        }
    }

    // normalise in log space
    const double mx = *std::max_element(logw.begin(), logw.end());
    double sum = 0.0;
    for (double& lw : logw) {
        lw = std::exp(lw - mx);
        sum += lw;
    }
    post.weights.resize(K);
    for (std::size_t k = 0; k < K; ++k) post.weights[k] = logw[k] / sum;
    return post;
}

}  // namespace dmlmc
