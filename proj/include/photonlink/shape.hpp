#pragma once

// Temporal emission probability density of one photon within the drive
// window: either a truncated Gaussian or a tabulated density on uniform bins.

#include "photonlink/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace photonlink {

class PhotonShape {
public:
    enum class Kind { gaussian, table };

    static PhotonShape gaussian(double window_ps, double center_ps, double fwhm_ps) {
        if (!(window_ps > 0.0) || !(fwhm_ps > 0.0))
            throw std::invalid_argument("shape window and fwhm must be > 0");
        if (!(center_ps >= 0.0 && center_ps <= window_ps))
            throw std::invalid_argument("shape center must lie inside the window");
        PhotonShape s;
        s.kind_ = Kind::gaussian;
        s.window_ps_ = window_ps;
        s.center_ps_ = center_ps;
        s.sigma_ps_ = fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        return s;
    }

    /// Density tabulated on uniform bins spanning [0, window); weights are
    /// normalized internally.
    static PhotonShape table(double window_ps, std::vector<double> weights) {
        if (!(window_ps > 0.0))
            throw std::invalid_argument("shape window must be > 0");
        if (weights.empty())
            throw std::invalid_argument("shape table must not be empty");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0))
                throw std::invalid_argument("shape densities must be >= 0");
            sum += w;
        }
        if (!(sum > 0.0))
            throw std::invalid_argument("shape table must have positive mass");
        PhotonShape s;
        s.kind_ = Kind::table;
        s.window_ps_ = window_ps;
        s.weights_ = std::move(weights);
        s.cdf_.resize(s.weights_.size());
        double acc = 0.0;
        for (size_t i = 0; i < s.weights_.size(); ++i) {
            s.weights_[i] /= sum;
            acc += s.weights_[i];
            s.cdf_[i] = acc;
        }
        s.cdf_.back() = 1.0;
        return s;
    }

    Kind kind() const { return kind_; }
    double window_ps() const { return window_ps_; }
    double center_ps() const { return center_ps_; }
    double sigma_ps() const { return sigma_ps_; }
    const std::vector<double>& bin_probabilities() const { return weights_; }

    /// One arrival-time offset in [0, window_ps), in ps.
    double sample(RngStream& rng) const {
        if (kind_ == Kind::gaussian) {
            // Rejection against the window; the default geometry accepts ~99%.
            for (;;) {
                const double x = center_ps_ + sigma_ps_ * rng.gaussian();
                if (x >= 0.0 && x < window_ps_)
                    return x;
            }
        }
        const double u = rng.uniform();
        const size_t bin = std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin();
        const double bin_w = window_ps_ / static_cast<double>(weights_.size());
        const double lo = cdf_[bin] - weights_[bin];
        const double frac = weights_[bin] > 0.0 ? (u - lo) / weights_[bin] : 0.5;
        return std::min((static_cast<double>(bin) + frac) * bin_w,
                        std::nextafter(window_ps_, 0.0));
    }

    double mean_ps() const {
        if (kind_ == Kind::gaussian) {
            // Truncated-normal mean on [0, window].
            const double a = (0.0 - center_ps_) / sigma_ps_;
            const double b = (window_ps_ - center_ps_) / sigma_ps_;
            const double pa = std_pdf(a), pb = std_pdf(b);
            const double mass = std_cdf(b) - std_cdf(a);
            return center_ps_ + sigma_ps_ * (pa - pb) / mass;
        }
        const double bin_w = window_ps_ / static_cast<double>(weights_.size());
        double m = 0.0;
        for (size_t i = 0; i < weights_.size(); ++i)
            m += weights_[i] * (static_cast<double>(i) + 0.5) * bin_w;
        return m;
    }

    /// Probability mass on [lo, hi) within the window.
    double mass_between(double lo, double hi) const {
        lo = std::max(lo, 0.0);
        hi = std::min(hi, window_ps_);
        if (hi <= lo)
            return 0.0;
        if (kind_ == Kind::gaussian) {
            const double norm = std_cdf((window_ps_ - center_ps_) / sigma_ps_) -
                                std_cdf((0.0 - center_ps_) / sigma_ps_);
            return (std_cdf((hi - center_ps_) / sigma_ps_) -
                    std_cdf((lo - center_ps_) / sigma_ps_)) /
                   norm;
        }
        const double bin_w = window_ps_ / static_cast<double>(weights_.size());
        double acc = 0.0;
        for (size_t i = 0; i < weights_.size(); ++i) {
            const double blo = static_cast<double>(i) * bin_w;
            const double bhi = blo + bin_w;
            const double olo = std::max(lo, blo), ohi = std::min(hi, bhi);
            if (ohi > olo)
                acc += weights_[i] * (ohi - olo) / bin_w;
        }
        return acc;
    }

private:
    static double std_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
    static double std_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

    Kind kind_ = Kind::gaussian;
    double window_ps_ = 1.0;
    double center_ps_ = 0.5;
    double sigma_ps_ = 0.1;
    std::vector<double> weights_; // table only
    std::vector<double> cdf_;
};

} // namespace photonlink
