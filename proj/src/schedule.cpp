// Copyright (c) 2026 The dmlmc authors
// SPDX-License-Identifier: Apache-2.0

#include "dmlmc/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dmlmc/errors.hpp"

namespace dmlmc {

NoiseSchedule::NoiseSchedule(std::vector<double> gammas)
    : gammas_(std::move(gammas)) {
    if (gammas_.size() < 2) {
        throw ScheduleError("schedule needs at least T = 1 (two entries)");
    }
    if (gammas_.front() != 1.0) {
        throw ScheduleError("schedule invariant violated: gamma_0 must be exactly 1");
    }
    for (size_t t = 1; t < gammas_.size(); ++t) {
        if (!(gammas_[t - 1] > gammas_[t])) {
            throw ScheduleError(
                "schedule invariant violated: gammas must be strictly decreasing at t=" +
                std::to_string(t));
        }
    }
    if (!(gammas_.back() > 0.0)) {
        throw ScheduleError("schedule invariant violated: gamma_T must be > 0");
    }
    Gammas_.resize(gammas_.size());
    for (size_t t = 0; t < gammas_.size(); ++t) {
        Gammas_[t] = 1.0 - gammas_[t];
    }
}

void NoiseSchedule::save_csv(std::ostream& os) const {
    os << "t,gamma\n";
    char buf[64];
    for (size_t t = 0; t < gammas_.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", t, gammas_[t]);
        os << buf;
    }
}

void NoiseSchedule::save_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    save_csv(os);
}

NoiseSchedule NoiseSchedule::load_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "t,gamma") {
        throw ScheduleError("schedule csv: expected header 't,gamma'");
    }
    std::vector<double> gammas;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ScheduleError("schedule csv: malformed row '" + line + "'");
        }
        const size_t t = std::stoul(line.substr(0, comma));
        if (t != gammas.size()) {
            throw ScheduleError("schedule csv: non-contiguous index " + std::to_string(t));
        }
        gammas.push_back(std::stod(line.substr(comma + 1)));
    }
    return NoiseSchedule(std::move(gammas));
}

NoiseSchedule NoiseSchedule::load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path);
    return load_csv(is);
}

double gamma_for_observation_noise(double sigma_y) {
    if (!(sigma_y >= 0.0)) throw ScheduleError("sigma_y must be >= 0");
    return 1.0 / (1.0 + sigma_y * sigma_y);
}

NoiseSchedule build_schedule(const std::string& kind, int T,
                             const ScheduleParams& params) {
    if (T < 1) throw ScheduleError("schedule: T must be >= 1");
    const double gT = params.gamma_T;
    if (!(gT > 0.0)) {
        throw ScheduleError("schedule invariant violated: gamma_T must be > 0");
    }
    if (!(gT < 1.0)) {
        throw ScheduleError(
            "schedule invariant violated: gamma_T >= 1 breaks strict decrease");
    }
    if (kind != "log-linear" && kind != "terminal-pinned") {
        throw ScheduleError("unknown schedule family '" + kind + "'");
    }
    std::vector<double> gammas(static_cast<size_t>(T) + 1);
    gammas[0] = 1.0;
    for (int t = 1; t < T; ++t) {
        gammas[static_cast<size_t>(t)] =
            std::pow(gT, static_cast<double>(t) / static_cast<double>(T));
    }
    gammas[static_cast<size_t>(T)] = gT;  // endpoint stored exactly
    return NoiseSchedule(std::move(gammas));
}

namespace {

void check_skip_args(const NoiseSchedule& s, int t, int delta) {
    if (t == 0) {
        throw DomainError("skip_variance: t = 0 has Gamma_0 = 0 in a denominator");
    }
    if (t < 0 || t > s.T()) {
        throw DomainError("skip_variance: time index out of range");
    }
    if (delta < 0 || t - delta < 0) {
        throw DomainError("skip_variance: t - delta must be >= 0");
    }
}

}  // namespace

double skip_variance(const NoiseSchedule& s, int t, int delta) {
    check_skip_args(s, t, delta);
    if (delta == 0) return 0.0;
    const double g_src = s.gamma(t);
    const double g_tgt = s.gamma(t - delta);
    const double G_src = s.Gamma(t);
    const double G_tgt = s.Gamma(t - delta);
    return (G_tgt / G_src) * (1.0 - g_src / g_tgt);
}

StepCoefficients step_coefficients(const NoiseSchedule& s, int t, int delta) {
    check_skip_args(s, t, delta);
    if (delta == 0) return {1.0, 0.0, 0.0};
    const double g_src = s.gamma(t);
    const double g_tgt = s.gamma(t - delta);
    const double G_src = s.Gamma(t);
    const double G_tgt = s.Gamma(t - delta);
    StepCoefficients k;
    k.a = std::sqrt(g_tgt / g_src);
    k.b = std::sqrt(g_src / g_tgt) * (G_tgt - (g_tgt / g_src) * G_src);
    k.c = std::sqrt((G_tgt / G_src) * (1.0 - g_src / g_tgt));
    return k;
}

LevelGrid::LevelGrid(int T0_, int M_, int L_) : T0(T0_), M(M_), L(L_) {
    if (T0 < 1) throw DomainError("LevelGrid: T0 must be positive");
    if (M < 2) throw DomainError("LevelGrid: M must be >= 2");
    if (L < 0) throw DomainError("LevelGrid: L must be >= 0");
    // Guard against 64-bit overflow of T = T0 * M^L.
    long double total = static_cast<long double>(T0) * std::pow(static_cast<long double>(M), L);
    if (total > 1e15L) throw DomainError("LevelGrid: T0 * M^L too large");
}

std::int64_t LevelGrid::steps(int level) const {
    if (level < 0 || level > L) throw DomainError("LevelGrid: level out of range");
    std::int64_t n = T0;
    for (int i = 0; i < level; ++i) n *= M;
    return n;
}

std::int64_t LevelGrid::skip(int level) const {
    if (level < 0 || level > L) throw DomainError("LevelGrid: level out of range");
    std::int64_t d = 1;
    for (int i = 0; i < L - level; ++i) d *= M;
    return d;
}

}  // namespace dmlmc
