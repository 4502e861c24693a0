#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "errors.hpp"

namespace extliou {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr cplx I1{0.0, 1.0};

// ---------------------------------------------------------------------------
// Kronecker products and row-stacking vectorization

inline Mat kron(const Mat& A, const Mat& B)
{
    Mat K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

/// vec(A) = sum_ij A_ij |i>|j>, i.e. rows are stacked.
inline Vec vec(const Mat& A)
{
    Vec v(A.size());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            v(i * A.cols() + j) = A(i, j);
    return v;
}

inline Mat unvec(const Vec& v, Eigen::Index rows, Eigen::Index cols)
{
    if (rows * cols != v.size())
        throw DimensionError("unvec: vector of length " + std::to_string(v.size()) +
                             " cannot be shaped " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    Mat A(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            A(i, j) = v(i * cols + j);
    return A;
}

inline Mat unvec(const Vec& v)
{
    auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(double(v.size()))));
    return unvec(v, d, d);
}

// ---------------------------------------------------------------------------
// Lindblad-form generators

struct Jump {
    Mat op;
    double rate;
};

/// -i(H x 1 - 1 x H^T) + sum_i (g_i/2)(2 L x L* - L^dag L x 1 - 1 x L^T L*).
/// H need not be Hermitian.
inline Mat liouvillian_from_parts(const Mat& H, const std::vector<Jump>& jumps)
{
    if (H.rows() != H.cols())
        throw DimensionError("liouvillian_from_parts: H is not square");
    const auto d = H.rows();
    const Mat Id = Mat::Identity(d, d);
    Mat L = -I1 * (kron(H, Id) - kron(Id, H.transpose()));
    for (const auto& j : jumps) {
        if (j.op.rows() != d || j.op.cols() != d)
            throw DimensionError("liouvillian_from_parts: jump operator dimension mismatch");
        const Mat LdL = j.op.adjoint() * j.op;
        L += (0.5 * j.rate) *
             (2.0 * kron(j.op, j.op.conjugate()) - kron(LdL, Id) - kron(Id, LdL.transpose()));
    }
    return L;
}

// ---------------------------------------------------------------------------
// Spectra

struct EigOptions {
    Eigen::Index max_dim = 4096;
    double tol_eig = 1e-10;
};

struct SpectrumResult {
    Vec values;                  // sorted by real part, then imaginary part
    Mat vectors;                 // unit-norm right eigenvectors, same order
    std::vector<double> residuals;
};

inline bool spectral_less(const cplx& a, const cplx& b)
{
    if (a.real() != b.real())
        return a.real() < b.real();
    return a.imag() < b.imag();
}

inline SpectrumResult eigendecompose(const Mat& M, const EigOptions& opt = {})
{
    if (M.rows() != M.cols())
        throw DimensionError("eigendecompose: matrix is not square");
    if (M.rows() > opt.max_dim)
        throw CapacityError("eigendecompose: dimension " + std::to_string(M.rows()) +
                            " exceeds cap " + std::to_string(opt.max_dim));
    const auto n = M.rows();
    SpectrumResult out;
    if (n == 0)
        return out;
    Eigen::ComplexEigenSolver<Mat> es;
    es.setMaxIterations(std::max<Eigen::Index>(30 * n, 300));
    es.compute(M, true);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigendecompose: QR iteration did not converge",
                             static_cast<long>(30 * n));
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return spectral_less(es.eigenvalues()(a), es.eigenvalues()(b));
    });
    out.values.resize(n);
    out.vectors.resize(n, n);
    out.residuals.resize(n);
    const double norm = std::max(M.norm(), std::numeric_limits<double>::min());
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = es.eigenvalues()(order[k]);
        Vec v = es.eigenvectors().col(order[k]);
        v.normalize();
        out.vectors.col(k) = v;
        out.residuals[k] = (M * v - out.values(k) * v).norm();
        if (out.residuals[k] > opt.tol_eig * norm)
            throw NumericalError("eigendecompose: residual " + std::to_string(out.residuals[k]) +
                                 " above bound");
    }
    return out;
}

inline Vec eigenvalues(const Mat& M, const EigOptions& opt = {})
{
    if (M.rows() != M.cols())
        throw DimensionError("eigenvalues: matrix is not square");
    if (M.rows() > opt.max_dim)
        throw CapacityError("eigenvalues: dimension exceeds cap");
    Eigen::ComplexEigenSolver<Mat> es(M, false);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigenvalues: QR iteration did not converge");
    Vec v = es.eigenvalues();
    std::sort(v.data(), v.data() + v.size(), spectral_less);
    return v;
}

inline double spectral_scale(const Vec& values)
{
    double s = 1.0;
    for (const auto& z : values)
        s = std::max(s, std::abs(z));
    return s;
}

struct Cluster {
    cplx center;                  // mean of the members
    std::vector<Eigen::Index> members;
    double radius = 0.0;          // max distance of a member to the center
};

/// Single-linkage grouping: i ~ j iff |l_i - l_j| < tol * max(1, spectral radius).
/// With `strict`, a non-member closer than 10x the cluster radius (floored at
/// tol * s) raises AmbiguityError.
inline std::vector<Cluster> cluster_eigenvalues(const Vec& values, double tol = 1e-4,
                                                bool strict = true)
{
    const auto n = values.size();
    const double s = spectral_scale(values);
    const double eps = tol * s;
    std::vector<Eigen::Index> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](Eigen::Index i) {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    };
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (std::abs(values(i) - values(j)) < eps)
                parent[find(i)] = find(j);

    std::vector<Cluster> out;
    std::vector<Eigen::Index> slot(n, -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<Eigen::Index>(out.size());
            out.emplace_back();
        }
        out[slot[r]].members.push_back(i);
    }
    for (auto& c : out) {
        cplx sum = 0;
        for (auto m : c.members)
            sum += values(m);
        c.center = sum / double(c.members.size());
        for (auto m : c.members)
            c.radius = std::max(c.radius, std::abs(values(m) - c.center));
    }
    std::sort(out.begin(), out.end(),
              [](const Cluster& a, const Cluster& b) { return spectral_less(a.center, b.center); });

    if (strict) {
        std::vector<double> gaps;
        for (const auto& c : out) {
            const double r = std::max(c.radius, eps);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (std::find(c.members.begin(), c.members.end(), j) != c.members.end())
                    continue;
                double g = std::abs(values(j) - c.center);
                if (g < 10.0 * r)
                    gaps.push_back(g);
            }
        }
        if (!gaps.empty()) {
            std::ostringstream os;
            os << "cluster_eigenvalues: borderline gaps";
            for (double g : gaps)
                os << ' ' << g;
            throw AmbiguityError(os.str(), gaps);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Jordan structure from rank sequences

struct JordanReport {
    cplx eigenvalue;
    int algebraic = 0;
    int geometric = 0;
    std::vector<int> chains;    // descending
    std::vector<int> ranks;     // r_0 = n, r_1, r_2, ...
    int order() const { return chains.empty() ? 0 : chains.front(); }
};

inline int numerical_rank(const Mat& A, double tol)
{
    if (A.size() == 0)
        return 0;
    Eigen::JacobiSVD<Mat> svd(A);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol * s(0))
            ++r;
    return r;
}

/// Orthonormal basis of the numerical null space of A.
inline Mat null_space(const Mat& A, double tol)
{
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    int r = 0;
    if (s.size() > 0 && s(0) > 0.0)
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > tol * s(0))
                ++r;
    return svd.matrixV().rightCols(A.cols() - r);
}

namespace detail {

// Staircase deflation: with N V = [N V1, 0], ker N^k = span(V0) + V1 ker B^(k-1),
// B = V1^H N V1. Rank decisions use one absolute threshold, never powers of N,
// which would shrink a near-nilpotent block below any relative cutoff.
inline std::vector<Mat> power_kernels(const Mat& N, double thr, int kmax)
{
    const auto n = N.cols();
    std::vector<Mat> K(kmax + 1);
    K[0] = Mat(n, 0);
    if (kmax == 0)
        return K;
    Eigen::JacobiSVD<Mat> svd(N, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > thr)
            ++r;
    const Mat V1 = svd.matrixV().leftCols(r), V0 = svd.matrixV().rightCols(n - r);
    if (r == n || r == 0) {
        for (int k = 1; k <= kmax; ++k)
            K[k] = V0;
        return K;
    }
    const auto sub = power_kernels(Mat(V1.adjoint() * N * V1), thr, kmax - 1);
    for (int k = 1; k <= kmax; ++k) {
        Mat B(n, V0.cols() + sub[k - 1].cols());
        B << V0, V1 * sub[k - 1];
        K[k] = B;
    }
    return K;
}

inline double rank_threshold(const Mat& N, double tol)
{
    if (N.size() == 0)
        return 0.0;
    Eigen::JacobiSVD<Mat> svd(N);
    return tol * std::max(svd.singularValues()(0), std::numeric_limits<double>::min());
}

} // namespace detail

/// Chain lengths from r_k = rank((M - l)^k): #chains of length >= k is r_{k-1} - r_k.
/// If `expected_multiplicity` > 0 and disagrees with the rank analysis, AmbiguityError.
inline JordanReport jordan_structure(const Mat& M, cplx lambda, double tol = 1e-8,
                                     int expected_multiplicity = 0)
{
    if (M.rows() != M.cols())
        throw DimensionError("jordan_structure: matrix is not square");
    const auto n = static_cast<int>(M.rows());
    const Mat N = M - lambda * Mat::Identity(n, n);
    JordanReport rep;
    rep.eigenvalue = lambda;
    rep.ranks.push_back(n);
    const auto K = detail::power_kernels(N, detail::rank_threshold(N, tol), n);
    for (int k = 1; k <= n; ++k) {
        const int r = n - static_cast<int>(K[k].cols());
        rep.ranks.push_back(r);
        if (r == rep.ranks[k - 1])
            break;
    }
    const int p = static_cast<int>(rep.ranks.size()) - 1;
    rep.algebraic = n - rep.ranks.back();
    rep.geometric = n - rep.ranks[1];
    std::vector<int> atleast(p + 2, 0);
    for (int k = 1; k <= p; ++k)
        atleast[k] = rep.ranks[k - 1] - rep.ranks[k];
    for (int k = 1; k < p; ++k)
        if (atleast[k] < atleast[k + 1])
            throw NumericalError("jordan_structure: inconsistent rank sequence");
    for (int k = p; k >= 1; --k)
        for (int c = 0; c < atleast[k] - atleast[k + 1]; ++c)
            rep.chains.push_back(k);
    if (expected_multiplicity > 0 && expected_multiplicity != rep.algebraic)
        throw AmbiguityError("jordan_structure: cluster of size " +
                                 std::to_string(expected_multiplicity) +
                                 " but rank analysis gives multiplicity " +
                                 std::to_string(rep.algebraic),
                             {});
    return rep;
}

/// Jordan chain v_1..v_k with (M - l)v_1 = 0 and (M - l)v_{j+1} = v_j; ||v_1|| = 1.
struct JordanChain {
    cplx eigenvalue;
    std::vector<Vec> vectors;
};

inline std::vector<JordanChain> jordan_chains(const Mat& M, const JordanReport& rep,
                                              double tol = 1e-8)
{
    const auto n = M.rows();
    const Mat N = M - rep.eigenvalue * Mat::Identity(n, n);
    const int p = rep.order();
    const auto kernels = detail::power_kernels(N, detail::rank_threshold(N, tol), p);
    std::vector<JordanChain> out;
    std::vector<Vec> tops;
    std::vector<int> top_len;
    for (int k = p; k >= 1; --k) {
        const int need = static_cast<int>(std::count(rep.chains.begin(), rep.chains.end(), k));
        if (need == 0)
            continue;
        // span to exclude: ker N^{k-1} plus level-k members of longer chains
        std::vector<Vec> excl;
        for (Eigen::Index c = 0; c < kernels[k - 1].cols(); ++c)
            excl.push_back(kernels[k - 1].col(c));
        for (std::size_t t = 0; t < tops.size(); ++t) {
            Vec w = tops[t];
            for (int s = 0; s < top_len[t] - k; ++s)
                w = N * w;
            excl.push_back(w);
        }
        Mat W(n, static_cast<Eigen::Index>(excl.size()));
        for (std::size_t c = 0; c < excl.size(); ++c)
            W.col(c) = excl[c];
        Mat proj = kernels[k];
        if (W.cols() > 0) {
            Eigen::JacobiSVD<Mat> ws(W, Eigen::ComputeThinU);
            const auto& sv = ws.singularValues();
            int r = 0;
            for (Eigen::Index i = 0; i < sv.size(); ++i)
                if (sv(i) > tol * std::max(sv(0), 1e-300))
                    ++r;
            Mat Q = ws.matrixU().leftCols(r);
            proj = kernels[k] - Q * (Q.adjoint() * kernels[k]);
        }
        Eigen::JacobiSVD<Mat> ps(proj, Eigen::ComputeFullV);
        if (ps.singularValues().size() < need || ps.singularValues()(need - 1) < 1e-6)
            throw NumericalError("jordan_chains: could not extend chain basis");
        for (int c = 0; c < need; ++c) {
            Vec x = kernels[k] * ps.matrixV().col(c);
            tops.push_back(x);
            top_len.push_back(k);
        }
    }
    for (std::size_t t = 0; t < tops.size(); ++t) {
        JordanChain ch;
        ch.eigenvalue = rep.eigenvalue;
        std::vector<Vec> down{tops[t]};
        for (int s = 1; s < top_len[t]; ++s)
            down.push_back(N * down.back());
        const double scale = 1.0 / down.back().norm();
        for (auto it = down.rbegin(); it != down.rend(); ++it)
            ch.vectors.push_back(*it * scale);
        out.push_back(std::move(ch));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Propagation v(t) = exp(L t) v0

enum class PropagationMethod { automatic, runge_kutta, spectral };

struct PropagateOptions {
    PropagationMethod method = PropagationMethod::automatic;
    double rtol = 1e-10;
    double atol = 1e-14;         // scaled by max|v0|
    double cond_limit = 1e8;
    std::size_t max_steps = 200000;
};

inline double condition_number(const Mat& V)
{
    Eigen::JacobiSVD<Mat> svd(V);
    const auto& s = svd.singularValues();
    if (s.size() == 0)
        return 1.0;
    const double lo = s(s.size() - 1);
    return lo > 0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

inline void check_times(const std::vector<double>& times)
{
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0))
            throw ParameterError("propagate: times must be nonnegative");
        if (k > 0 && times[k] < times[k - 1])
            throw ParameterError("propagate: times must be nondecreasing");
    }
}

inline std::vector<Vec> propagate_rk(const Mat& L, const Vec& v0, const std::vector<double>& times,
                                     const PropagateOptions& opt = {})
{
    namespace ode = boost::numeric::odeint;
    using state = std::vector<cplx>;
    check_times(times);
    const auto n = v0.size();
    if (L.rows() != n || L.cols() != n)
        throw DimensionError("propagate: generator/vector dimension mismatch");
    std::vector<Vec> out;
    out.reserve(times.size());
    if (times.empty())
        return out;

    std::vector<double> grid;
    const bool pad = times.front() > 0.0;
    if (pad)
        grid.push_back(0.0);
    grid.insert(grid.end(), times.begin(), times.end());
    // integrate_times needs strictly increasing times
    std::vector<double> uniq;
    for (double t : grid)
        if (uniq.empty() || t > uniq.back())
            uniq.push_back(t);

    state x(v0.data(), v0.data() + n);
    const double scale = std::max(v0.cwiseAbs().maxCoeff(), 1e-300);
    auto rhs = [&L, n](const state& y, state& dy, double) {
        Eigen::Map<const Vec> ym(y.data(), n);
        Eigen::Map<Vec> dym(dy.data(), n);
        dym.noalias() = L * ym;
    };
    std::vector<Vec> at_uniq;
    double last = 0.0;
    auto obs = [&](const state& y, double t) {
        at_uniq.emplace_back(Eigen::Map<const Vec>(y.data(), n));
        last = t;
    };
    if (uniq.size() == 1) {
        at_uniq.push_back(v0);
    } else {
        const double span = uniq.back();
        const double lnorm = std::max(L.cwiseAbs().rowwise().sum().maxCoeff(), 1e-12);
        double dt = std::min(1e-2 / lnorm, span * 1e-3);
        try {
            ode::integrate_times(ode::make_controlled(opt.atol * scale, opt.rtol,
                                                      ode::runge_kutta_fehlberg78<state>()),
                                 rhs, x, uniq.begin(), uniq.end(), dt, obs,
                                 ode::max_step_checker(opt.max_steps));
        } catch (const ode::step_adjustment_error& e) {
            throw StiffnessError(std::string("propagate: step size underflow: ") + e.what(), last);
        } catch (const ode::no_progress_error& e) {
            throw StiffnessError(std::string("propagate: no progress: ") + e.what(), last);
        }
    }
    std::size_t u = 0;
    for (std::size_t k = pad ? 1 : 0; k < grid.size(); ++k) {
        while (uniq[u] < grid[k])
            ++u;
        out.push_back(grid[k] == 0.0 ? v0 : at_uniq[u]);
    }
    return out;
}

/// Returns an empty list if the eigenvector basis is too ill-conditioned.
inline std::vector<Vec> propagate_spectral(const Mat& L, const Vec& v0,
                                           const std::vector<double>& times,
                                           const PropagateOptions& opt = {})
{
    check_times(times);
    if (L.rows() != v0.size() || L.cols() != v0.size())
        throw DimensionError("propagate: generator/vector dimension mismatch");
    Eigen::ComplexEigenSolver<Mat> es(L, true);
    if (es.info() != Eigen::Success)
        throw NumericalError("propagate: eigensolver failed");
    const Mat& V = es.eigenvectors();
    if (!(condition_number(V) < opt.cond_limit))
        return {};
    const Vec c = V.partialPivLu().solve(v0);
    std::vector<Vec> out;
    out.reserve(times.size());
    for (double t : times) {
        if (t == 0.0) {
            out.push_back(v0);
            continue;
        }
        Vec e = c;
        for (Eigen::Index k = 0; k < e.size(); ++k)
            e(k) *= std::exp(es.eigenvalues()(k) * t);
        out.push_back(V * e);
    }
    return out;
}

inline std::vector<Vec> propagate(const Mat& L, const Vec& v0, const std::vector<double>& times,
                                  const PropagateOptions& opt = {})
{
    switch (opt.method) {
    case PropagationMethod::runge_kutta:
        return propagate_rk(L, v0, times, opt);
    case PropagationMethod::spectral: {
        auto r = propagate_spectral(L, v0, times, opt);
        if (r.empty() && !times.empty())
            throw NumericalError("propagate: eigenvector basis condition number above limit");
        return r;
    }
    case PropagationMethod::automatic:
    default:
        return propagate_rk(L, v0, times, opt);
    }
}

// ---------------------------------------------------------------------------
// Partial trace

inline Mat partial_trace(const Mat& rho, const std::vector<int>& dims, const std::vector<int>& keep)
{
    long total = 1;
    for (int d : dims) {
        if (d <= 0)
            throw DimensionError("partial_trace: nonpositive subsystem dimension");
        total *= d;
    }
    if (rho.rows() != total || rho.cols() != total)
        throw DimensionError("partial_trace: dims do not match matrix size");
    const int ns = static_cast<int>(dims.size());
    std::vector<bool> kept(ns, false);
    for (int k : keep) {
        if (k < 0 || k >= ns)
            throw DimensionError("partial_trace: keep index out of range");
        kept[k] = true;
    }
    long dk = 1;
    for (int s = 0; s < ns; ++s)
        if (kept[s])
            dk *= dims[s];
    Mat out = Mat::Zero(dk, dk);
    std::vector<int> a(ns), b(ns);
    auto split = [&](long idx, std::vector<int>& digits) {
        for (int s = ns - 1; s >= 0; --s) {
            digits[s] = static_cast<int>(idx % dims[s]);
            idx /= dims[s];
        }
    };
    for (long i = 0; i < total; ++i) {
        split(i, a);
        for (long j = 0; j < total; ++j) {
            split(j, b);
            bool match = true;
            long ki = 0, kj = 0;
            for (int s = 0; s < ns; ++s) {
                if (kept[s]) {
                    ki = ki * dims[s] + a[s];
                    kj = kj * dims[s] + b[s];
                } else if (a[s] != b[s]) {
                    match = false;
                    break;
                }
            }
            if (match)
                out(ki, kj) += rho(i, j);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text format: "rows cols" header, then one line per row of "re im" pairs.

inline void write_matrix(std::ostream& os, const Mat& M)
{
    os << M.rows() << ' ' << M.cols() << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g", M(i, j).real(), M(i, j).imag());
            if (j)
                os << ' ';
            os << buf;
        }
        os << '\n';
    }
}

inline Mat read_matrix(std::istream& is)
{
    long r = 0, c = 0;
    if (!(is >> r >> c) || r < 0 || c < 0)
        throw IoError("read_matrix: bad header");
    Mat M(r, c);
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) {
            double re, im;
            if (!(is >> re >> im))
                throw IoError("read_matrix: truncated data");
            M(i, j) = cplx(re, im);
        }
    return M;
}

} // namespace extliou
