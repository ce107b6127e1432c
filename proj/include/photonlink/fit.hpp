#pragma once

// Least-squares fit of the conversion-efficiency curve A*sin^2(sqrt(B*P)).
// Levenberg-Marquardt with the analytic Jacobian, multi-started over a fixed
// grid of B values because the sin^2 model has local minima in B.

#include "photonlink/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace photonlink {

struct EfficiencyFit {
    EfficiencyCurveParams params;
    double residual_norm = 0.0; // sqrt(sum of squared residuals)
    int iterations = 0;
};

namespace detail {

inline double sin2_model(double p_watt, double a, double b) {
    const double s = std::sin(std::sqrt(b * p_watt));
    return a * s * s;
}

// d(model)/dB; the u->0 limit is a*P.
inline double sin2_model_db(double p_watt, double a, double b) {
    const double u = std::sqrt(b * p_watt);
    if (u < 1e-8)
        return a * p_watt;
    return a * std::sin(2.0 * u) * p_watt / (2.0 * u);
}

// Closed-form optimum of A for fixed B.
inline double profile_amplitude(std::span<const std::pair<double, double>> samples, double b) {
    double num = 0.0, den = 0.0;
    for (const auto& [p, y] : samples) {
        const double s = sin2_model(p, 1.0, b);
        num += s * y;
        den += s * s;
    }
    return den > 0.0 ? num / den : 0.0;
}

inline double sse(std::span<const std::pair<double, double>> samples, double a, double b) {
    double acc = 0.0;
    for (const auto& [p, y] : samples) {
        const double r = sin2_model(p, a, b) - y;
        acc += r * r;
    }
    return acc;
}

} // namespace detail

/// Fits (A, B) to samples of (pump power [W], efficiency). Requires at least
/// three samples with nonzero spread in P.
inline EfficiencyFit fit_efficiency_curve(std::span<const std::pair<double, double>> samples) {
    if (samples.size() < 3)
        throw std::invalid_argument("efficiency fit needs at least 3 samples");
    double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
    for (const auto& [p, y] : samples) {
        if (!std::isfinite(p) || !std::isfinite(y) || p < 0.0)
            throw std::invalid_argument("efficiency samples must be finite with P >= 0");
        pmin = std::min(pmin, p);
        pmax = std::max(pmax, p);
    }
    if (!(pmax - pmin > 0.0))
        throw std::invalid_argument("efficiency samples must span more than one pump power");

    const double b_starts[] = {1.0, 5.0, 10.0, 20.0};
    EfficiencyFit best;
    double best_sse = std::numeric_limits<double>::infinity();

    for (double b0 : b_starts) {
        double b = b0;
        double a = detail::profile_amplitude(samples, b);
        double lambda = 1e-3;
        double current = detail::sse(samples, a, b);
        int iter = 0;
        for (; iter < 300; ++iter) {
            // Normal equations for the 2x2 LM step.
            double h00 = 0, h01 = 0, h11 = 0, g0 = 0, g1 = 0;
            for (const auto& [p, y] : samples) {
                const double r = detail::sin2_model(p, a, b) - y;
                const double ja = detail::sin2_model(p, 1.0, b);
                const double jb = detail::sin2_model_db(p, a, b);
                h00 += ja * ja;
                h01 += ja * jb;
                h11 += jb * jb;
                g0 += ja * r;
                g1 += jb * r;
            }
            bool stepped = false;
            for (int tries = 0; tries < 40; ++tries) {
                const double m00 = h00 * (1.0 + lambda);
                const double m11 = h11 * (1.0 + lambda);
                const double det = m00 * m11 - h01 * h01;
                if (det == 0.0)
                    break;
                const double da = (-g0 * m11 + g1 * h01) / det;
                const double db = (-g1 * m00 + g0 * h01) / det;
                const double a_try = a + da, b_try = b + db;
                if (b_try > 0.0 && std::isfinite(a_try) && std::isfinite(b_try)) {
                    const double trial = detail::sse(samples, a_try, b_try);
                    if (trial <= current) {
                        const double step = std::abs(da) + std::abs(db) * std::abs(b) /
                                                              std::max(std::abs(b), 1.0);
                        a = a_try;
                        b = b_try;
                        current = trial;
                        lambda = std::max(lambda / 3.0, 1e-14);
                        stepped = true;
                        if (step < 1e-13 * (1.0 + std::abs(a) + std::abs(b)))
                            tries = 40; // converged
                        break;
                    }
                }
                lambda *= 10.0;
                if (lambda > 1e12)
                    break;
            }
            if (!stepped)
                break;
        }
        if (current < best_sse) {
            best_sse = current;
            best.params.amplitude_A = std::clamp(a, 0.0, 1.0);
            best.params.rate_B = b;
            best.iterations = iter;
        }
    }

    best.residual_norm = std::sqrt(detail::sse(samples, best.params.amplitude_A, best.params.rate_B));
    return best;
}

inline EfficiencyFit fit_efficiency_curve(const std::vector<std::pair<double, double>>& samples) {
    return fit_efficiency_curve(std::span<const std::pair<double, double>>(samples));
}

} // namespace photonlink
