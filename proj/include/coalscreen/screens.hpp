#pragma once

// Tender-based screens: statistics of the bid distribution within a single
// tender. Inputs are the coalition members' bids only; callers sort nothing,
// everything here works on order statistics internally.
//
// Conventions, applied uniformly:
//   * sample standard deviation uses the n-1 divisor;
//   * a zero denominator yields 0 with the screen's degenerate flag set
//     (the KS screen yields 1 instead: a point mass is maximally non-uniform);
//   * cv is in percent.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "coalscreen/errors.hpp"

namespace coalscreen {

enum class Screen : int {
    Cv = 0,
    Spread,
    Diffp,
    Absdiff,
    Skew,
    Rd,
    Altrd,
    Normd,
    Ks,
};

inline constexpr int kNumScreens = 9;

inline constexpr std::array<const char*, kNumScreens> kScreenNames = {
    "cv", "spread", "diffp", "absdiff", "skew", "rd", "altrd", "normd", "ks"};

/// Variance screens: cv, spread. Asymmetry: diffp..normd. Uniformity: ks.
inline constexpr std::array<bool, kNumScreens> kIsAsymmetryScreen = {
    false, false, true, true, true, true, true, true, false};

struct ScreenVector {
    double cv = 0.0;      // 100 * sd / mean
    double spread = 0.0;  // (max - min) / min
    double diffp = 0.0;   // (b2 - b1) / b1
    double absdiff = 0.0; // b2 - b1
    double skew = 0.0;    // adjusted Fisher-Pearson sample skewness
    double rd = 0.0;      // (b2 - b1) / sd(losing bids)
    double altrd = 0.0;   // (b2 - b1) / sd(all bids)
    double normd = 0.0;   // (b2 - b1) / (bn - b1)
    double ks = 0.0;      // one-sample KS distance to uniform on [b1, bn]
    std::array<bool, kNumScreens> degenerate{};

    double value(Screen s) const {
        switch (s) {
            case Screen::Cv: return cv;
            case Screen::Spread: return spread;
            case Screen::Diffp: return diffp;
            case Screen::Absdiff: return absdiff;
            case Screen::Skew: return skew;
            case Screen::Rd: return rd;
            case Screen::Altrd: return altrd;
            case Screen::Normd: return normd;
            case Screen::Ks: return ks;
        }
        return 0.0;
    }
};

namespace detail {

inline std::vector<double> sorted_bids(std::span<const double> bids) {
    std::vector<double> b(bids.begin(), bids.end());
    std::sort(b.begin(), b.end());
    return b;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

inline void require_arity(std::span<const double> bids, std::size_t min_n, const char* what) {
    if (bids.size() < min_n)
        throw DataError(std::string(what) + " needs at least " + std::to_string(min_n) + " bids, got " +
                        std::to_string(bids.size()));
    for (double b : bids)
        if (!(b > 0.0) || !std::isfinite(b)) throw DataError(std::string(what) + ": bids must be finite and > 0");
}

} // namespace detail

struct VarianceScreens {
    double cv = 0.0;
    double spread = 0.0;
};

/// cv = 100 * s / m, spread = (b(n) - b(1)) / b(1). n >= 2.
inline VarianceScreens variance_screens(std::span<const double> bids) {
    detail::require_arity(bids, 2, "variance screens");
    const auto b = detail::sorted_bids(bids);
    const double m = detail::mean(b);
    const double s = detail::sample_sd(b);
    return {100.0 * s / m, (b.back() - b.front()) / b.front()};
}

struct AsymmetryScreens {
    double diffp = 0.0;
    double absdiff = 0.0;
    double skew = 0.0;
    double rd = 0.0;
    double altrd = 0.0;
    double normd = 0.0;
    bool skew_degenerate = false;
    bool rd_degenerate = false;
    bool altrd_degenerate = false;
    bool normd_degenerate = false;
};

/// diffp/absdiff need n >= 2; skew, rd and normd need n >= 3.
/// Zero denominators produce 0 with the matching degenerate flag.
inline AsymmetryScreens asymmetry_screens(std::span<const double> bids) {
    detail::require_arity(bids, 3, "asymmetry screens");
    const auto b = detail::sorted_bids(bids);
    const std::size_t n = b.size();
    AsymmetryScreens out;
    const double gap = b[1] - b[0];
    out.diffp = gap / b[0];
    out.absdiff = gap;

    // Adjusted Fisher-Pearson skewness: g1 * sqrt(n(n-1)) / (n-2).
    const double m = detail::mean(b);
    double m2 = 0.0, m3 = 0.0;
    for (double x : b) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    if (m2 <= 0.0) {
        out.skew = 0.0;
        out.skew_degenerate = true;
    } else {
        const double g1 = m3 / std::pow(m2, 1.5);
        out.skew = g1 * std::sqrt(static_cast<double>(n) * static_cast<double>(n - 1)) / static_cast<double>(n - 2);
    }

    const double sd_losing = detail::sample_sd(std::span<const double>(b).subspan(1));
    if (sd_losing <= 0.0) {
        out.rd = 0.0;
        out.rd_degenerate = true;
    } else {
        out.rd = gap / sd_losing;
    }

    const double sd_all = detail::sample_sd(b);
    if (sd_all <= 0.0) {
        out.altrd = 0.0;
        out.altrd_degenerate = true;
    } else {
        out.altrd = gap / sd_all;
    }

    const double range = b.back() - b.front();
    if (range <= 0.0) {
        out.normd = 0.0;
        out.normd_degenerate = true;
    } else {
        out.normd = gap / range;
    }
    return out;
}

/// One-sample Kolmogorov-Smirnov distance between the empirical CDF of the
/// bids and the continuous uniform CDF on [b(1), b(n)]:
///   D = max_i max(|i/n - F(b(i))|, |(i-1)/n - F(b(i))|).
/// A point mass (b(1) = b(n)) yields 1 with the degenerate flag.
inline double uniformity_screen(std::span<const double> bids, bool* degenerate = nullptr) {
    detail::require_arity(bids, 2, "uniformity screen");
    const auto b = detail::sorted_bids(bids);
    const std::size_t n = b.size();
    const double lo = b.front(), hi = b.back();
    if (degenerate) *degenerate = false;
    if (!(hi > lo)) {
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = (b[i] - lo) / (hi - lo);
        const double upper = static_cast<double>(i + 1) / static_cast<double>(n);
        const double lower = static_cast<double>(i) / static_cast<double>(n);
        d = std::max({d, std::abs(upper - f), std::abs(lower - f)});
    }
    return d;
}

/// The full nine-screen vector for one tender's coalition bids. n >= 3.
inline ScreenVector screen_vector(std::span<const double> bids) {
    detail::require_arity(bids, 3, "screen vector");
    ScreenVector v;
    const auto var = variance_screens(bids);
    v.cv = var.cv;
    v.spread = var.spread;
    const auto asym = asymmetry_screens(bids);
    v.diffp = asym.diffp;
    v.absdiff = asym.absdiff;
    v.skew = asym.skew;
    v.rd = asym.rd;
    v.altrd = asym.altrd;
    v.normd = asym.normd;
    v.degenerate[static_cast<int>(Screen::Skew)] = asym.skew_degenerate;
    v.degenerate[static_cast<int>(Screen::Rd)] = asym.rd_degenerate;
    v.degenerate[static_cast<int>(Screen::Altrd)] = asym.altrd_degenerate;
    v.degenerate[static_cast<int>(Screen::Normd)] = asym.normd_degenerate;
    bool ks_degenerate = false;
    v.ks = uniformity_screen(bids, &ks_degenerate);
    v.degenerate[static_cast<int>(Screen::Ks)] = ks_degenerate;
    return v;
}

} // namespace coalscreen
