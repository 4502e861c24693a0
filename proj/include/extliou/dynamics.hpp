#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "heom.hpp"
#include "linalg.hpp"
#include "pseudomode.hpp"

namespace extliou {

struct Trajectory {
    std::vector<double> times;
    std::vector<Mat> rho;
    std::string provenance;    // pmeom | heom | analytic
    double rtol = 0;
    double atol = 0;
    std::vector<double> absG;  // optional |G(t)| column
};

/// t = 0 plus `points` log-spaced samples on [1e-3, 10] / lambda.
inline std::vector<double> default_time_grid(double lambda, int points = 400)
{
    std::vector<double> t{0.0};
    const double a = std::log10(1e-3 / lambda), b = std::log10(10.0 / lambda);
    for (int k = 0; k < points; ++k)
        t.push_back(std::pow(10.0, a + (b - a) * k / (points - 1)));
    return t;
}

inline std::vector<double> linear_grid(double t0, double t1, int points)
{
    std::vector<double> t;
    for (int k = 0; k < points; ++k)
        t.push_back(t0 + (t1 - t0) * k / (points - 1));
    return t;
}

inline Trajectory evolve_reduced(const ExtendedLiouvillian& L, const Mat& rho0,
                                 const std::vector<double>& times, const PropagateOptions& opt = {})
{
    if (rho0.rows() != L.system_dim || rho0.cols() != L.system_dim)
        throw DimensionError("evolve_reduced: initial state has the wrong dimension");
    const Vec v0 = L.lift * vec(rho0);
    const auto states = propagate(L.matrix, v0, times, opt);
    Trajectory tr;
    tr.times = times;
    tr.provenance = to_string(L.provenance);
    tr.rtol = opt.rtol;
    tr.atol = opt.atol;
    for (const auto& v : states)
        tr.rho.push_back(unvec(L.reduce * v, L.system_dim, L.system_dim));
    return tr;
}

/// Uses the single-excitation sector when it is closed (RWA qubit with diagonal H_S).
inline Trajectory evolve_reduced(const PseudomodeModel& m, const Mat& rho0,
                                 const std::vector<double>& times, const PropagateOptions& opt = {})
{
    const bool diag = m.H_S.rows() == 2 && std::abs(m.H_S(0, 1)) == 0.0 && std::abs(m.H_S(1, 0)) == 0.0;
    if (m.rwa && diag && m.spec.temperature == 0.0)
        return evolve_reduced(restrict_single_excitation(m), rho0, times, opt);
    return evolve_reduced(build_pm_liouvillian(m), rho0, times, opt);
}

inline Trajectory evolve_reduced(const HeomModel& m, const Mat& rho0, const std::vector<double>& times,
                                 const PropagateOptions& opt = {})
{
    return evolve_reduced(to_extended(build_heom(m)), rho0, times, opt);
}

/// Largest deviations from unit trace, Hermiticity and positivity over a trajectory.
struct PhysicalityCheck {
    double trace = 0;
    double hermiticity = 0;
    double min_eigenvalue = 0;
};

inline PhysicalityCheck check_physical(const Trajectory& tr)
{
    PhysicalityCheck c;
    c.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (const auto& r : tr.rho) {
        c.trace = std::max(c.trace, std::abs(r.trace() - 1.0));
        c.hermiticity = std::max(c.hermiticity, (r - r.adjoint()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (r + r.adjoint()));
        c.min_eigenvalue = std::min(c.min_eigenvalue, es.eigenvalues().minCoeff());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Closed-form decoherence function for the (band-gapped) Lorentzian spin-boson model
//
//   G(t) = A0 + B e^{-a t} [cosh(D t/2) + (2a/D) sinh(D t/2)],
//   a = (1+q) Lambda / 2,  D^2 = Lambda (1-q) ((1-q) Lambda - 2 Gamma),
//   A0 = 2 q Lambda / (Gamma (1-q) + 2 q Lambda),  B = 1 - A0.

struct DecoherenceParams {
    double A0, B, a, D2;
};

inline DecoherenceParams decoherence_params(double gamma, double lambda, double q)
{
    if (!(gamma > 0) || !(lambda > 0))
        throw ParameterError("decoherence_function: Gamma and Lambda must be > 0");
    if (!(q >= 0 && q < 1))
        throw ParameterError("decoherence_function: q must lie in [0, 1)");
    const double dm = 1 - q, dp = 1 + q;
    DecoherenceParams p;
    p.A0 = 2 * q * lambda / (gamma * dm + 2 * q * lambda);
    p.B = gamma * dm / (gamma * dm + 2 * q * lambda);
    p.a = 0.5 * dp * lambda;
    p.D2 = lambda * dm * (dm * lambda - 2 * gamma);
    return p;
}

namespace detail {

/// [cosh(Dt/2) + (2a/D) sinh(Dt/2)] e^{-a t}, continuous through D = 0.
inline double damped_part(const DecoherenceParams& p, double t)
{
    if (p.D2 >= 0) {
        const double d = std::sqrt(p.D2);
        const double e1 = std::exp(-(p.a - 0.5 * d) * t);
        const double ch = 0.5 * e1 * (1 + std::exp(-d * t));
        const double sh_over_d = d > 0 ? -0.5 * e1 * std::expm1(-d * t) / d : 0.5 * t * e1;
        return ch + 2 * p.a * sh_over_d;
    }
    const double w = std::sqrt(-p.D2);
    const double x = 0.5 * w * t;
    const double sinc = std::abs(x) > 1e-4 ? std::sin(x) / x : 1 - x * x / 6;
    return std::exp(-p.a * t) * (std::cos(x) + 2 * p.a * 0.5 * t * sinc);
}

/// cos(wt/2) + (2a/w) sin(wt/2): the oscillating factor of G without the envelope.
inline double scaled_oscillation(const DecoherenceParams& p, double t)
{
    const double w = std::sqrt(-p.D2);
    const double x = 0.5 * w * t;
    const double sinc = std::abs(x) > 1e-4 ? std::sin(x) / x : 1 - x * x / 6;
    return std::cos(x) + p.a * t * sinc;
}

} // namespace detail

inline cplx decoherence_function(double gamma, double lambda, double q, double t)
{
    const auto p = decoherence_params(gamma, lambda, q);
    if (t < 0)
        throw ParameterError("decoherence_function: t must be >= 0");
    return p.A0 + p.B * detail::damped_part(p, t);
}

struct DecoherenceRecord {
    double gamma, lambda, q;
    std::vector<double> times;
    std::vector<cplx> G;
    bool monotone = true;
};

inline DecoherenceRecord decoherence_record(double gamma, double lambda, double q,
                                            const std::vector<double>& times)
{
    DecoherenceRecord r{gamma, lambda, q, times, {}, true};
    for (double t : times)
        r.G.push_back(decoherence_function(gamma, lambda, q, t));
    for (std::size_t k = 1; k < r.G.size(); ++k)
        if (std::abs(r.G[k]) > std::abs(r.G[k - 1]))
            r.monotone = false;
    return r;
}

/// Analytic coherence/population of the spin-boson qubit:
/// rho_ge(t) = rho_ge(0) G, rho_ee(t) = rho_ee(0) |G|^2.
inline Trajectory analytic_spin_boson(double gamma, double lambda, double q, const Mat& rho0,
                                      const std::vector<double>& times)
{
    Trajectory tr;
    tr.times = times;
    tr.provenance = "analytic";
    for (double t : times) {
        const cplx G = decoherence_function(gamma, lambda, q, t);
        Mat r(2, 2);
        r(1, 1) = rho0(1, 1) * std::norm(G);
        r(0, 0) = 1.0 - r(1, 1);
        r(0, 1) = rho0(0, 1) * G;
        r(1, 0) = rho0(1, 0) * std::conj(G);
        tr.rho.push_back(r);
        tr.absG.push_back(std::abs(G));
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Non-Markovianity of the qubit: monotonicity of |G(t)|

struct NonMarkovianity {
    bool nonmarkovian = false;
    double witness_time = std::numeric_limits<double>::quiet_NaN();
    bool analytic = false;     // Gamma > (1 - q) Lambda / 2
};

struct MonotonicityOptions {
    double horizon = 1e3;      // in units of 1/Lambda
    std::size_t samples = 100000;
    int run = 3;               // consecutive increasing samples required after a decrease
};

/// d|G|/dt = -sign(G) sign(s(t)) up to a positive factor, with s = sinh(Dt/2)/D
/// (or sin(wt/2)/w), so the sign test never needs the underflowing envelope.
inline NonMarkovianity is_nonmarkovian(double gamma, double lambda, double q,
                                       const MonotonicityOptions& opt = {})
{
    const auto p = decoherence_params(gamma, lambda, q);
    NonMarkovianity r;
    r.analytic = p.D2 < 0;
    const double h = opt.horizon / lambda / double(opt.samples);
    int up = 0;
    bool seen_down = false;
    double first_up = 0;
    for (std::size_t k = 1; k <= opt.samples; ++k) {
        const double t = h * double(k);
        double s, sg;
        if (p.D2 >= 0) {
            s = 1.0;   // sinh(Dt/2)/D > 0 for t > 0
            sg = 1.0;  // G stays above A0 >= 0
        } else {
            const double w = std::sqrt(-p.D2);
            s = std::sin(0.5 * w * t);
            if (p.A0 > 0) {
                const double g = p.A0 + p.B * std::exp(-p.a * t) * detail::scaled_oscillation(p, t);
                sg = g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0);
            } else {
                const double g = detail::scaled_oscillation(p, t);
                sg = g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0);
            }
        }
        const double slope = -sg * s;
        if (slope < 0) {
            seen_down = true;
            up = 0;
        } else if (slope > 0 && seen_down) {
            if (up == 0)
                first_up = t;
            if (++up >= opt.run) {
                r.nonmarkovian = true;
                r.witness_time = first_up;
                return r;
            }
        }
    }
    return r;
}

/// First zero of the coherence for q = 0 and Gamma > Lambda / 2.
inline double first_vanishing_time(double gamma, double lambda, double horizon = 1e3)
{
    const auto p = decoherence_params(gamma, lambda, 0.0);
    if (!(p.D2 < 0))
        throw NotInRegimeError("first_vanishing_time: Gamma <= Lambda/2, the coherence never vanishes");
    const double w = std::sqrt(-p.D2);
    const double tmax = horizon / lambda;
    const double h = (2 * M_PI / w) / 64;
    double t0 = 0, g0 = detail::scaled_oscillation(p, 0);
    for (double t1 = h; t1 <= tmax + h; t1 += h) {
        const double g1 = detail::scaled_oscillation(p, std::min(t1, tmax));
        if ((g0 > 0) != (g1 > 0)) {
            boost::uintmax_t iters = 200;
            auto f = [&](double t) { return detail::scaled_oscillation(p, t); };
            auto tol = boost::math::tools::eps_tolerance<double>(52);
            auto [lo, hi] = boost::math::tools::toms748_solve(f, t0, std::min(t1, tmax), g0, g1, tol, iters);
            return 0.5 * (lo + hi);
        }
        if (t1 >= tmax)
            break;
        t0 = t1;
        g0 = g1;
    }
    throw NotInRegimeError("first_vanishing_time: no zero within the horizon");
}

// ---------------------------------------------------------------------------
// Reconstruction from (generalized) eigenmatrices

/// rho(t) from exp(Lt) v_j = e^{lt} sum_m t^m/m! v_{j-m} over all Jordan chains.
inline Trajectory reconstruct_reduced(const ExtendedLiouvillian& L, const Mat& rho0,
                                      const std::vector<double>& times, double tol_cluster = 1e-4,
                                      double tol_rank = 1e-8)
{
    const auto blocks = jordan_decomposition(L.matrix, tol_cluster, tol_rank);
    const auto n = L.matrix.rows();
    Mat V(n, n);
    Eigen::Index col = 0;
    for (const auto& b : blocks)
        for (const auto& ch : b.chains)
            for (const auto& v : ch.vectors) {
                if (col >= n)
                    throw NumericalError("reconstruct_reduced: too many chain vectors");
                V.col(col++) = v;
            }
    if (col != n)
        throw NumericalError("reconstruct_reduced: chain vectors do not span the space");
    const Vec v0 = L.lift * vec(rho0);
    const Vec c = V.fullPivLu().solve(v0);

    Trajectory tr;
    tr.times = times;
    tr.provenance = to_string(L.provenance);
    for (double t : times) {
        Vec v = Vec::Zero(n);
        Eigen::Index base = 0;
        for (const auto& b : blocks)
            for (const auto& ch : b.chains) {
                const cplx e = std::exp(ch.eigenvalue * t);
                const auto k = static_cast<Eigen::Index>(ch.vectors.size());
                for (Eigen::Index j = 0; j < k; ++j) {
                    double fac = 1;
                    for (Eigen::Index m = 0; m <= j; ++m) {
                        v += (e * c(base + j) * fac) * ch.vectors[j - m];
                        fac *= t / double(m + 1);
                    }
                }
                base += k;
            }
        tr.rho.push_back(unvec(L.reduce * v, L.system_dim, L.system_dim));
    }
    return tr;
}

inline double max_deviation(const Trajectory& a, const Trajectory& b)
{
    if (a.rho.size() != b.rho.size())
        throw DimensionError("max_deviation: trajectories differ in length");
    double m = 0;
    for (std::size_t k = 0; k < a.rho.size(); ++k)
        m = std::max(m, (a.rho[k] - b.rho[k]).cwiseAbs().maxCoeff());
    return m;
}

/// CSV: t, then re/im of each rho entry (row-major), then |G| when present.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr)
{
    const auto d = tr.rho.empty() ? 0 : tr.rho.front().rows();
    os << "t";
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            os << ",re_" << i << j << ",im_" << i << j;
    const bool g = tr.absG.size() == tr.times.size() && !tr.absG.empty();
    if (g)
        os << ",absG";
    os << '\n';
    char buf[64];
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", tr.times[k]);
        os << buf;
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) {
                std::snprintf(buf, sizeof buf, ",%.17g,%.17g", tr.rho[k](i, j).real(), tr.rho[k](i, j).imag());
                os << buf;
            }
        if (g) {
            std::snprintf(buf, sizeof buf, ",%.17g", tr.absG[k]);
            os << buf;
        }
        os << '\n';
    }
}

} // namespace extliou
