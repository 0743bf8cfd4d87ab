#pragma once

// Monte Carlo summaries: batch means, ratio estimators, effective sample size.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

namespace cpn {

using cplx = std::complex<double>;

/// Mean, batch-means standard error, effective sample size and count.
struct EstimatorResult {
    cplx mean{0.0, 0.0};
    double stderr_re = 0.0;
    double stderr_im = 0.0;
    double ess = 0.0;
    std::size_t n = 0;
    std::vector<std::string> warnings;

    [[nodiscard]] double stderr() const { return std::hypot(stderr_re, stderr_im); }
    [[nodiscard]] double real() const { return mean.real(); }
    [[nodiscard]] bool reliable() const { return warnings.empty(); }
};

namespace detail {

inline void batch_stats(const std::vector<double>& x, int batches, double& mean, double& se, double& var) {
    const std::size_t n = x.size();
    mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(std::max<std::size_t>(n, 1));
    var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(std::max<std::size_t>(n, 2) - 1);
    const std::size_t nb = std::min<std::size_t>(batches, n);
    if (nb < 2) {
        se = n > 1 ? std::sqrt(var / n) : 0.0;
        return;
    }
    const std::size_t len = n / nb;
    std::vector<double> bm(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm[b] += x[i];
        bm[b] /= static_cast<double>(len);
    }
    double m = 0.0;
    for (double v : bm) m += v;
    m /= nb;
    double s = 0.0;
    for (double v : bm) s += (v - m) * (v - m);
    se = std::sqrt(s / (nb - 1) / nb);
}

}  // namespace detail

/// Batch-means summary of a (possibly autocorrelated) real or complex series.
inline EstimatorResult batch_means(const std::vector<cplx>& samples, int batches = 32) {
    EstimatorResult r;
    r.n = samples.size();
    if (samples.empty()) return r;
    std::vector<double> re(r.n), im(r.n);
    for (std::size_t i = 0; i < r.n; ++i) {
        re[i] = samples[i].real();
        im[i] = samples[i].imag();
    }
    double mr, mi, vr, vi;
    detail::batch_stats(re, batches, mr, r.stderr_re, vr);
    detail::batch_stats(im, batches, mi, r.stderr_im, vi);
    r.mean = {mr, mi};
    const double se2 = r.stderr_re * r.stderr_re + r.stderr_im * r.stderr_im;
    r.ess = se2 > 0.0 ? (vr + vi) / se2 : static_cast<double>(r.n);
    return r;
}

inline EstimatorResult batch_means(const std::vector<double>& samples, int batches = 32) {
    std::vector<cplx> c(samples.begin(), samples.end());
    return batch_means(c, batches);
}

/// Ratio estimator mean(a w) / mean(w) with a delta-method batch-means error.
/// `ess` is the Kish effective sample size of the weights.
inline EstimatorResult ratio_estimate(const std::vector<cplx>& a, const std::vector<double>& w, int batches = 32) {
    EstimatorResult r;
    const std::size_t n = a.size();
    r.n = n;
    if (n == 0) return r;
    cplx num{};
    double den = 0.0, den2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += a[i] * w[i];
        den += w[i];
        den2 += w[i] * w[i];
    }
    if (!(den > 0.0)) {
        r.warnings.push_back("all weights vanish");
        return r;
    }
    const cplx R = num / den;
    const double wbar = den / static_cast<double>(n);
    std::vector<cplx> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = (a[i] - R) * w[i] / wbar;
    const EstimatorResult e = batch_means(resid, batches);
    r.mean = R;
    r.stderr_re = e.stderr_re;
    r.stderr_im = e.stderr_im;
    r.ess = den * den / den2;
    return r;
}

/// z-score of the difference of two independent estimates.
inline double z_score(cplx a, double se_a, cplx b, double se_b) {
    const double se = std::hypot(se_a, se_b);
    const double d = std::abs(a - b);
    if (se == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return d / se;
}

}  // namespace cpn
