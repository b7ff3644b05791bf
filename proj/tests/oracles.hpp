#pragma once

// Independent reference implementations used only by the tests. None of these
// call into the code they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rnv/matrix.hpp"

namespace oracle {

// Exhaustive search over every boundary set and every labeling of the
// resulting segments. Segment sums are accumulated directly, frame by frame.
inline double best_segmentation_objective(const rnv::Matrix<double>& log_probs, double penalty) {
    const std::size_t n = log_probs.rows();
    double best = -std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, double)> extend = [&](std::size_t start, double score) {
        if (start == n) {
            best = std::max(best, score);
            return;
        }
        for (std::size_t end = start + 1; end <= n; ++end) {
            for (std::size_t c = 0; c < 3; ++c) {
                double sum = 0.0;
                for (std::size_t t = start; t < end; ++t) sum += log_probs(t, c);
                extend(end, score + sum - penalty);
            }
        }
    };
    extend(0, 0.0);
    return best;
}

inline double gamma_density(double shape, double scale, double x) {
    if (x <= 0.0) return 0.0;
    return std::pow(x, shape - 1.0) * std::exp(-x / scale) / (std::tgamma(shape) * std::pow(scale, shape));
}

// Adaptive Simpson quadrature.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    std::function<double(double, double, double, double, double, double, int)> step =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int depth) -> double {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid);
        const double rm = 0.5 * (mid + hi);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * tol) {
            return left + right + (left + right - whole) / 15.0;
        }
        return step(lo, mid, flo, flm, fmid, left, depth - 1) + step(mid, hi, fmid, frm, fhi, right, depth - 1);
    };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return step(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), 60);
}

// CDF by quadrature of the density (shape >= 1, where the density is bounded).
inline double gamma_cdf_quadrature(double shape, double scale, double x) {
    return integrate([&](double t) { return gamma_density(shape, scale, t); }, 0.0, x, 1e-14);
}

// Bisection on the quadrature CDF.
inline double gamma_ppf_quadrature(double shape, double scale, double u) {
    double lo = 0.0;
    double hi = shape * scale;
    while (gamma_cdf_quadrature(shape, scale, hi) < u) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gamma_cdf_quadrature(shape, scale, mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Full scan: cosine similarities against every pool frame, sorted, top k
// averaged with clamped-similarity weights (uniform if all clamp to zero).
inline std::vector<double> knn_average(const rnv::FloatMatrix& pool, std::span<const float> query, std::size_t k) {
    const std::size_t dim = pool.cols();
    auto norm = [](std::span<const float> v) {
        double s = 0.0;
        for (float x : v) s += static_cast<double>(x) * x;
        return std::sqrt(s);
    };
    const double qn = norm(query);
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t i = 0; i < pool.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(query[d]) * pool(i, d);
        sims.emplace_back(dot / (qn * norm(pool.row(i))), i);
    }
    std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    sims.resize(std::min(k, sims.size()));
    double wsum = 0.0;
    for (const auto& s : sims) wsum += std::max(0.0, s.first);
    std::vector<double> out(dim, 0.0);
    for (const auto& s : sims) {
        const double w = wsum > 0.0 ? std::max(0.0, s.first) / wsum : 1.0 / static_cast<double>(sims.size());
        for (std::size_t d = 0; d < dim; ++d) out[d] += w * pool(s.second, d);
    }
    return out;
}

// Memoized recursive edit distance over token lists (total only).
inline std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
    std::function<long(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> long {
        if (i == a.size()) return static_cast<long>(b.size() - j);
        if (j == b.size()) return static_cast<long>(a.size() - i);
        long& m = memo[i][j];
        if (m >= 0) return m;
        m = std::min({d(i + 1, j) + 1, d(i, j + 1) + 1, d(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1)});
        return m;
    };
    return static_cast<std::size_t>(d(0, 0));
}

// Whitespace tokenizer over already-normalized text.
inline std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace oracle
