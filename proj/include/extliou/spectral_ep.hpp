#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <cstdio>
#include <vector>

#include "linalg.hpp"

namespace extliou {

using MatrixBuilder = std::function<Mat(double)>;

struct SweepTable {
    std::string parameter;
    std::vector<double> grid;
    std::vector<std::vector<cplx>> tracks;   // tracks[point][track id]
    std::vector<bool> flagged;               // eigensolver failure at that point
};

namespace detail {

/// Greedy pairing of `next` onto `prev` by increasing distance.
inline std::vector<cplx> match_tracks(const std::vector<cplx>& prev, const std::vector<cplx>& next)
{
    const std::size_t n = prev.size();
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    pairs.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            pairs.emplace_back(std::abs(prev[i] - next[j]), i, j);
    std::sort(pairs.begin(), pairs.end());
    std::vector<cplx> out(n);
    std::vector<bool> used_i(n, false), used_j(n, false);
    std::size_t done = 0;
    for (const auto& [d, i, j] : pairs) {
        if (used_i[i] || used_j[j])
            continue;
        out[i] = next[j];
        used_i[i] = used_j[j] = true;
        if (++done == n)
            break;
    }
    return out;
}

template <class F>
void parallel_for(std::size_t n, int jobs, F&& f)
{
    const std::size_t workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                f(i);
        });
    for (auto& t : pool)
        t.join();
}

} // namespace detail

/// Spectra over a parameter grid with continuity-matched tracks. Grid points are
/// evaluated on `jobs` threads; matching runs afterwards in grid order.
inline SweepTable sweep_spectrum(const MatrixBuilder& builder, const std::vector<double>& grid,
                                 const std::string& parameter = "p", int jobs = 1)
{
    SweepTable t;
    t.parameter = parameter;
    t.grid = grid;
    std::vector<std::vector<cplx>> raw(grid.size());
    std::vector<char> bad(grid.size(), 0);
    detail::parallel_for(grid.size(), jobs, [&](std::size_t k) {
        try {
            Vec ev = eigenvalues(builder(grid[k]));
            raw[k].assign(ev.data(), ev.data() + ev.size());
        } catch (const Error&) {
            bad[k] = 1;
        }
    });
    std::size_t width = 0;
    for (const auto& r : raw)
        width = std::max(width, r.size());
    const cplx nan(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
    std::vector<cplx> prev;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        t.flagged.push_back(bad[k] || raw[k].size() != width);
        if (t.flagged.back()) {
            t.tracks.emplace_back(width, nan);
            continue;
        }
        t.tracks.push_back(prev.empty() ? raw[k] : detail::match_tracks(prev, raw[k]));
        prev = t.tracks.back();
    }
    return t;
}

/// CSV rows: parameter, track id, re, im.
inline void write_sweep_csv(std::ostream& os, const SweepTable& t)
{
    os << t.parameter << ",track,re,im\n";
    char buf[128];
    for (std::size_t k = 0; k < t.grid.size(); ++k)
        for (std::size_t j = 0; j < t.tracks[k].size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g\n", t.grid[k], j,
                          t.tracks[k][j].real(), t.tracks[k][j].imag());
            os << buf;
        }
}

// ---------------------------------------------------------------------------
// EP detection

struct EpReport {
    cplx eigenvalue;
    int order = 0;
    std::vector<int> chains;
    int algebraic = 0;
    int geometric = 0;
    bool diabolic = false;          // degenerate but diagonalizable
    double parameter = std::numeric_limits<double>::quiet_NaN();
    double tol_cluster = 0;
    double tol_rank = 0;

    /// Number of exceptional points of order >= 2 carried by this cluster.
    int ep_count() const
    {
        return static_cast<int>(std::count_if(chains.begin(), chains.end(), [](int c) { return c >= 2; }));
    }
};

/// Jordan analysis of every cluster of algebraic multiplicity >= 2.
inline std::vector<EpReport> detect_ep(const Mat& L, double tol_cluster = 1e-4, double tol_rank = 1e-8,
                                       double parameter = std::numeric_limits<double>::quiet_NaN())
{
    if (!(tol_cluster > 0) || !(tol_rank > 0))
        throw ParameterError("detect_ep: tolerances must be positive");
    const Vec ev = eigenvalues(L);
    const auto clusters = cluster_eigenvalues(ev, tol_cluster, true);
    std::vector<EpReport> out;
    for (const auto& c : clusters) {
        if (c.members.size() < 2)
            continue;
        const auto rep = jordan_structure(L, c.center, tol_rank, static_cast<int>(c.members.size()));
        EpReport r;
        r.eigenvalue = c.center;
        r.chains = rep.chains;
        r.order = rep.order();
        r.algebraic = rep.algebraic;
        r.geometric = rep.geometric;
        r.diabolic = r.order == 1;
        r.parameter = parameter;
        r.tol_cluster = tol_cluster;
        r.tol_rank = tol_rank;
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_ep_report(std::ostream& os, const EpReport& r)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "eigenvalue %.17g %.17g\norder %d\nalgebraic %d\ngeometric %d\n",
                  r.eigenvalue.real(), r.eigenvalue.imag(), r.order, r.algebraic, r.geometric);
    os << buf << "chains";
    for (int c : r.chains)
        os << ' ' << c;
    std::snprintf(buf, sizeof buf, "\ndiabolic %d\nparameter %.17g\ntol_cluster %.3g\ntol_rank %.3g\n",
                  int(r.diabolic), r.parameter, r.tol_cluster, r.tol_rank);
    os << buf;
}

// ---------------------------------------------------------------------------
// 1-D EP location

enum class LocateMode {
    real_to_complex,   // bisection on the appearance of nonzero imaginary parts
    minimal_gap        // golden-section search on the spread of a k-eigenvalue cluster
};

struct LocateOptions {
    LocateMode mode = LocateMode::real_to_complex;
    double imag_threshold = 1e-5;   // relative to max(1, spectral radius)
    int cluster_size = 2;           // k for minimal_gap
    int max_iter = 200;
};

/// Largest pairwise distance among `k` eigenvalues, minimized over the choice of the
/// k-subset formed by one eigenvalue and its k-1 nearest neighbours.
inline double cluster_spread(const Vec& ev, int k, cplx* center = nullptr)
{
    const auto n = ev.size();
    if (k < 2 || k > n)
        throw ParameterError("cluster_spread: cluster size out of range");
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<std::pair<double, Eigen::Index>> d;
        for (Eigen::Index j = 0; j < n; ++j)
            d.emplace_back(std::abs(ev(j) - ev(i)), j);
        std::sort(d.begin(), d.end());
        double spread = 0;
        cplx sum = 0;
        for (int a = 0; a < k; ++a) {
            sum += ev(d[a].second);
            for (int b = a + 1; b < k; ++b)
                spread = std::max(spread, std::abs(ev(d[a].second) - ev(d[b].second)));
        }
        if (spread < best) {
            best = spread;
            if (center)
                *center = sum / double(k);
        }
    }
    return best;
}

inline bool has_complex_pair(const Vec& ev, double threshold)
{
    const double s = spectral_scale(ev);
    for (const auto& z : ev)
        if (std::abs(z.imag()) > threshold * s)
            return true;
    return false;
}

inline double locate_ep_1d(const MatrixBuilder& builder, double a, double b, double tol,
                           const LocateOptions& opt = {})
{
    if (!(b > a) || !(tol > 0))
        throw ParameterError("locate_ep_1d: need a < b and tol > 0");
    if (opt.mode == LocateMode::real_to_complex) {
        auto complex_at = [&](double p) { return has_complex_pair(eigenvalues(builder(p)), opt.imag_threshold); };
        const bool fa = complex_at(a), fb = complex_at(b);
        if (fa == fb)
            throw BracketError("locate_ep_1d: spectrum character does not change across the bracket");
        int it = 0;
        while (b - a > tol) {
            if (++it > opt.max_iter)
                throw NumericalError("locate_ep_1d: bisection did not converge", it);
            const double m = 0.5 * (a + b);
            if (complex_at(m) == fa)
                a = m;
            else
                b = m;
        }
        return 0.5 * (a + b);
    }
    auto f = [&](double p) { return cluster_spread(eigenvalues(builder(p)), opt.cluster_size); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = a, hi = b;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    int it = 0;
    while (hi - lo > tol) {
        if (++it > opt.max_iter)
            throw NumericalError("locate_ep_1d: golden-section search did not converge", it);
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    const double x = 0.5 * (lo + hi);
    if (x - a < 2 * tol || b - x < 2 * tol)
        throw BracketError("locate_ep_1d: minimal gap sits at the bracket edge");
    return x;
}

// ---------------------------------------------------------------------------
// Perturbation scaling

struct ScalingFit {
    std::vector<double> eps;
    std::vector<double> splitting;
    double exponent = 0;
    double coefficient = 0;
    double residual = 0;   // rms of the log-log fit
};

inline std::vector<double> logspace(double lo, double hi, int n)
{
    std::vector<double> out;
    if (n == 1) {
        out.push_back(lo);
        return out;
    }
    const double a = std::log10(lo), b = std::log10(hi);
    for (int k = 0; k < n; ++k)
        out.push_back(std::pow(10.0, a + (b - a) * k / (n - 1)));
    return out;
}

/// Least squares fit of log y = log c + p log x.
inline ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw ParameterError("fit_power_law: need at least two matching samples");
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0))
            throw ParameterError("fit_power_law: samples must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    ScalingFit f;
    f.eps = x;
    f.splitting = y;
    f.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - f.exponent * sx) / n;
    f.coefficient = std::exp(icpt);
    double r = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = std::log(y[i]) - icpt - f.exponent * std::log(x[i]);
        r += e * e;
    }
    f.residual = std::sqrt(r / n);
    return f;
}

/// The k eigenvalues of `ev` nearest to `center`; TrackingError if the k-th and
/// (k+1)-th are not clearly separated.
inline std::vector<cplx> nearest_cluster(const Vec& ev, cplx center, int k)
{
    std::vector<std::pair<double, Eigen::Index>> d;
    for (Eigen::Index j = 0; j < ev.size(); ++j)
        d.emplace_back(std::abs(ev(j) - center), j);
    std::sort(d.begin(), d.end());
    if (k > static_cast<int>(d.size()))
        throw ParameterError("nearest_cluster: cluster larger than spectrum");
    if (k < static_cast<int>(d.size()) && !(d[k].first > 2.0 * d[k - 1].first))
        throw TrackingError("perturbation_scaling: perturbed cluster mixes with the rest of the spectrum");
    std::vector<cplx> out;
    for (int a = 0; a < k; ++a)
        out.push_back(ev(d[a].second));
    return out;
}

inline double max_pairwise(const std::vector<cplx>& z)
{
    double s = 0;
    for (std::size_t a = 0; a < z.size(); ++a)
        for (std::size_t b = a + 1; b < z.size(); ++b)
            s = std::max(s, std::abs(z[a] - z[b]));
    return s;
}

/// `builder(eps)` returns the generator perturbed by eps from the EP; the splitting of
/// the k eigenvalues nearest `ep_eigenvalue` is fitted against eps.
inline ScalingFit perturbation_scaling(const MatrixBuilder& builder, cplx ep_eigenvalue, int k,
                                       const std::vector<double>& eps_grid)
{
    if (eps_grid.size() < 2)
        throw ParameterError("perturbation_scaling: need at least two eps values");
    const auto [mn, mx] = std::minmax_element(eps_grid.begin(), eps_grid.end());
    if (!(*mn > 0) || *mx / *mn < 100.0 * (1 - 1e-12))
        throw ParameterError("perturbation_scaling: eps grid must be positive and span two decades");
    std::vector<double> split;
    for (double e : eps_grid)
        split.push_back(max_pairwise(nearest_cluster(eigenvalues(builder(e)), ep_eigenvalue, k)));
    return fit_power_law(eps_grid, split);
}

/// Leading Puiseux constants x_i = (lambda_i - lambda_EP) / (scale * eps^(1/k)).
inline std::vector<cplx> puiseux_coefficients(const MatrixBuilder& builder, cplx ep_eigenvalue, int k,
                                              double eps, double scale = 1.0)
{
    auto z = nearest_cluster(eigenvalues(builder(eps)), ep_eigenvalue, k);
    const double f = scale * std::pow(eps, 1.0 / k);
    for (auto& x : z)
        x = (x - ep_eigenvalue) / f;
    std::sort(z.begin(), z.end(), [](cplx a, cplx b) { return std::arg(a) < std::arg(b); });
    return z;
}

} // namespace extliou
