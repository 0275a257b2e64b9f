// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DMLMC_ORACLE_HPP
#define DMLMC_ORACLE_HPP

// Ground-truth second moments for the benchmark posteriors. Everything here
// is computed directly from the problem statement with its own conjugate
// algebra and its own RNG; this header must not pull in the sampler or score
// modules, so the tests that compare against it are meaningful.

#include <cstdint>

#include "dmlmc/problem.hpp"

namespace dmlmc {

/// E[X^2 | y] per coordinate for a Gaussian prior: mu_p^2 + var_p from the
/// componentwise conjugate update (mask sigma = 0 pins observed coordinates,
/// giving exactly y^2 there).
Vec gaussian_truth(const InverseProblem& p);

/// E[X^2 | y] per coordinate for a mixture prior with a mask observation:
/// sum_k w~_k (mu_k^2 + var_k) with evidence-reweighted weights.
Vec mixture_truth(const InverseProblem& p);

/// Brute-force cross-check: exact posterior sampling (no diffusion), mean of
/// x^2 over N draws, plus the per-coordinate standard error.
struct DirectMoment {
    Vec mean;
    Vec stderr_per_coord;
};
DirectMoment direct_posterior_second_moment(const InverseProblem& p, std::uint64_t N,
                                            std::uint64_t seed);

}  // namespace dmlmc

#endif  // DMLMC_ORACLE_HPP
