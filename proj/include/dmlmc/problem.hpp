// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_PROBLEM_HPP
#define DMLMC_PROBLEM_HPP

#include <cstddef>
#include <vector>

namespace dmlmc {

using Vec = std::vector<double>;

/// Dense row-major m x n matrix; only used for small observation operators.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    double operator()(std::size_t r, std::size_t c) const {
        return data[r * cols + c];
    }
    double& operator()(std::size_t r, std::size_t c) {
        return data[r * cols + c];
    }
};

struct GaussianDiag {
    Vec mu;
    Vec var;  // diagonal covariance entries
};

/// Diagonal-covariance Gaussian or mixture prior. Mixture weights must sum to
/// 1 within 1e-12 and all variances must be positive.
struct PriorSpec {
    std::vector<double> weights;          // single {1.0} for the pure Gaussian
    std::vector<GaussianDiag> components;

    bool is_mixture() const { return components.size() > 1; }
    std::size_t dim() const { return components.empty() ? 0 : components[0].mu.size(); }

    static PriorSpec gaussian(Vec mu, Vec var);
    static PriorSpec mixture(std::vector<double> weights,
                             std::vector<GaussianDiag> components);
};

/// y = A x + eta with eta ~ N(0, sigma^2 I). A is either a dense matrix or a
/// coordinate mask (list of observed indices); sigma = 0 is permitted only
/// for the mask form (noiseless conditioning).
struct InverseProblem {
    enum class OperatorKind { Dense, Mask };

    OperatorKind kind = OperatorKind::Dense;
    DenseMatrix A;                       // Dense form
    std::vector<std::size_t> observed;   // Mask form: observed coordinate indices
    double sigma = 1.0;
    Vec y;                               // length m
    PriorSpec prior;

    std::size_t dim() const { return prior.dim(); }
    std::size_t obs_dim() const { return y.size(); }

    static InverseProblem dense(DenseMatrix A, double sigma, Vec y, PriorSpec prior);
    static InverseProblem mask(std::vector<std::size_t> observed, double sigma,
                               Vec y, PriorSpec prior);

    /// Embeds y into R^n (mask form): observed coordinates take their y value,
    /// others 0.
    Vec embed_observation() const;
};

/// Exact conjugate posterior. For a Gaussian prior this is one component; for
/// a mixture each component receives the conjugate update and the weights are
/// reweighted by the per-component evidence of y. A mask operator with
/// sigma = 0 pins observed coordinates (variance 0) and leaves the rest at
/// the prior. Throws StructureError if A^T A is not diagonal.
struct Posterior {
    std::vector<double> weights;
    std::vector<GaussianDiag> components;

    bool is_mixture() const { return components.size() > 1; }
    std::size_t dim() const { return components.empty() ? 0 : components[0].mu.size(); }
};

Posterior posterior_params(const InverseProblem& p);

}  // namespace dmlmc

#endif  // DMLMC_PROBLEM_HPP
