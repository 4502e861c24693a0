#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "environment.hpp"
#include "linalg.hpp"

namespace extliou {

enum class Provenance { pmeom, heom };

inline const char* to_string(Provenance p) { return p == Provenance::pmeom ? "pmeom" : "heom"; }

/// Generator on an enlarged space together with the maps that connect it to the system.
/// `lift` sends vec(rho_S) to the initial extended state (environment in its reference
/// state); `reduce` sends an extended state to vec(rho_S).
struct ExtendedLiouvillian {
    Mat matrix;
    std::vector<std::string> labels;
    std::vector<int> dims;
    Provenance provenance = Provenance::pmeom;
    int system_dim = 2;
    Mat lift;
    Mat reduce;

    Eigen::Index size() const { return matrix.rows(); }
};

struct PseudomodeModel {
    Mat H_S = Mat::Zero(2, 2);
    Mat Q = Mat::Zero(2, 2);      // Q, or Q~ when rwa
    bool rwa = true;
    CorrelationSpec spec;
    int n_max = 1;                // Fock cutoff per pseudomode
    Eigen::Index max_dim = 4096;  // cap on the Liouville-space dimension

    /// Qubit (g = 0, e = 1) in the interaction picture with Q~ = |g><e|.
    static PseudomodeModel spin_boson(const SpectralDensity& J)
    {
        PseudomodeModel m;
        m.Q(0, 1) = 1.0;
        m.rwa = true;
        m.spec = exponents_for(J);
        return m;
    }
};

/// Principal square root; a negative real weight maps to +i sqrt|w|.
inline cplx coupling_from_weight(cplx w)
{
    if (w.imag() == 0.0)
        w = cplx(w.real(), 0.0);
    return std::sqrt(w);
}

namespace detail {

inline Mat annihilation(int n_max)
{
    Mat a = Mat::Zero(n_max + 1, n_max + 1);
    for (int k = 1; k <= n_max; ++k)
        a(k - 1, k) = std::sqrt(double(k));
    return a;
}

/// Embeds `op` acting on factor `site` of the tensor product with the given dims.
inline Mat embed(const Mat& op, const std::vector<int>& dims, std::size_t site)
{
    Mat out = Mat::Identity(1, 1);
    for (std::size_t s = 0; s < dims.size(); ++s)
        out = kron(out, s == site ? op : Mat::Identity(dims[s], dims[s]));
    return out;
}

inline std::string system_label(int s, int d)
{
    if (d == 2)
        return s == 0 ? "g" : "e";
    return std::to_string(s);
}

inline std::vector<std::string> liouville_labels(const std::vector<std::string>& kets)
{
    std::vector<std::string> out;
    out.reserve(kets.size() * kets.size());
    for (const auto& a : kets)
        for (const auto& b : kets)
            out.push_back("|" + a + "><" + b + "|");
    return out;
}

inline void check_model(const PseudomodeModel& m)
{
    if (m.H_S.rows() != m.H_S.cols() || m.H_S.rows() == 0)
        throw DimensionError("pseudomode model: H_S must be square and nonempty");
    if (m.Q.rows() != m.H_S.rows() || m.Q.cols() != m.H_S.cols())
        throw DimensionError("pseudomode model: coupling operator dimension mismatch");
    if (m.n_max < 1)
        throw ParameterError("pseudomode model: n_max must be >= 1");
    for (const auto& t : m.spec.terms)
        if (!(t.decay > 0.0))
            throw ParameterError("pseudomode model: decay rates must be > 0");
}

} // namespace detail

inline std::vector<int> pm_dims(const PseudomodeModel& m)
{
    std::vector<int> dims{static_cast<int>(m.H_S.rows())};
    for (std::size_t i = 0; i < m.spec.terms.size(); ++i)
        dims.push_back(m.n_max + 1);
    return dims;
}

/// H_S + sum_i Omega_i a_i^dag a_i + alpha_i Q (a_i^dag + a_i), or with
/// alpha_i (Q~ a_i^dag + Q~^dag a_i) under the RWA.
inline Mat build_pm_hamiltonian(const PseudomodeModel& m)
{
    detail::check_model(m);
    const auto dims = pm_dims(m);
    double D = 1;
    for (int d : dims)
        D *= d;
    if (D * D > double(m.max_dim))
        throw CapacityError("build_pm_hamiltonian: Liouville dimension " + std::to_string(long(D * D)) +
                            " exceeds cap " + std::to_string(m.max_dim));
    Mat H = detail::embed(m.H_S, dims, 0);
    const Mat Qf = detail::embed(m.Q, dims, 0);
    const Mat a1 = detail::annihilation(m.n_max);
    for (std::size_t i = 0; i < m.spec.terms.size(); ++i) {
        const auto& t = m.spec.terms[i];
        const Mat a = detail::embed(a1, dims, i + 1);
        const cplx alpha = coupling_from_weight(t.weight);
        H += t.frequency * a.adjoint() * a;
        if (m.rwa)
            H += alpha * (Qf * a.adjoint() + Qf.adjoint() * a);
        else
            H += alpha * Qf * (a.adjoint() + a);
    }
    return H;
}

inline std::vector<std::string> pm_ket_labels(const std::vector<int>& dims)
{
    std::vector<std::string> out;
    long D = 1;
    for (int d : dims)
        D *= d;
    for (long k = 0; k < D; ++k) {
        std::vector<int> digit(dims.size());
        long r = k;
        for (std::size_t s = dims.size(); s-- > 0;) {
            digit[s] = static_cast<int>(r % dims[s]);
            r /= dims[s];
        }
        std::string lab = detail::system_label(digit[0], dims[0]);
        for (std::size_t s = 1; s < dims.size(); ++s)
            lab += "," + std::to_string(digit[s]);
        out.push_back(lab);
    }
    return out;
}

inline ExtendedLiouvillian build_pm_liouvillian(const PseudomodeModel& m)
{
    const Mat H = build_pm_hamiltonian(m);
    const auto dims = pm_dims(m);
    const Mat a1 = detail::annihilation(m.n_max);
    std::vector<Jump> jumps;
    for (std::size_t i = 0; i < m.spec.terms.size(); ++i)
        jumps.push_back({detail::embed(a1, dims, i + 1), m.spec.terms[i].decay});

    ExtendedLiouvillian L;
    L.matrix = liouvillian_from_parts(H, jumps);
    L.labels = detail::liouville_labels(pm_ket_labels(dims));
    L.dims = dims;
    L.provenance = Provenance::pmeom;
    const int dS = dims[0];
    L.system_dim = dS;
    const long D = H.rows();
    const long env = D / dS;
    L.lift = Mat::Zero(D * D, dS * dS);
    L.reduce = Mat::Zero(dS * dS, D * D);
    for (int s = 0; s < dS; ++s)
        for (int sp = 0; sp < dS; ++sp) {
            L.lift((s * env) * D + sp * env, s * dS + sp) = 1.0;
            for (long e = 0; e < env; ++e)
                L.reduce(s * dS + sp, (s * env + e) * D + sp * env + e) = 1.0;
        }
    return L;
}

/// Kets of the single-excitation sector in the order |g,0..0>, |e,0..0>, |g,1_i>.
inline std::vector<long> single_excitation_kets(int modes)
{
    const long env = 1L << modes;
    std::vector<long> kets{0, env};
    for (int i = 0; i < modes; ++i)
        kets.push_back(1L << (modes - 1 - i));
    return kets;
}

inline ExtendedLiouvillian restrict_single_excitation(const PseudomodeModel& m)
{
    if (!m.rwa)
        throw UnsupportedError("restrict_single_excitation: requires the rotating-wave coupling");
    if (m.spec.temperature != 0.0)
        throw UnsupportedError("restrict_single_excitation: requires zero temperature");
    if (m.H_S.rows() != 2)
        throw UnsupportedError("restrict_single_excitation: requires a qubit system");
    PseudomodeModel full = m;
    full.n_max = 1;
    full.max_dim = std::numeric_limits<Eigen::Index>::max();
    const int N = static_cast<int>(m.spec.terms.size());
    const Mat H = build_pm_hamiltonian(full);
    const auto dims = pm_dims(full);
    const auto kets = single_excitation_kets(N);
    const long K = static_cast<long>(kets.size());
    if (K * K > m.max_dim)
        throw CapacityError("restrict_single_excitation: dimension exceeds cap");
    Mat P = Mat::Zero(K, H.rows());
    for (long k = 0; k < K; ++k)
        P(k, kets[k]) = 1.0;
    const Mat a1 = detail::annihilation(1);
    std::vector<Jump> jumps;
    for (int i = 0; i < N; ++i)
        jumps.push_back({P * detail::embed(a1, dims, i + 1) * P.transpose(), m.spec.terms[i].decay});

    ExtendedLiouvillian L;
    L.matrix = liouvillian_from_parts(P * H * P.transpose(), jumps);
    std::string zeros;
    for (int j = 0; j < N; ++j)
        zeros += ",0";
    std::vector<std::string> ketlab{"g" + zeros, "e" + zeros};
    for (int i = 0; i < N; ++i) {
        std::string lab = "g";
        for (int j = 0; j < N; ++j)
            lab += (i == j) ? ",1" : ",0";
        ketlab.push_back(lab);
    }
    L.labels = detail::liouville_labels(ketlab);
    L.dims = {static_cast<int>(K)};
    L.provenance = Provenance::pmeom;
    L.system_dim = 2;
    L.lift = Mat::Zero(K * K, 4);
    L.reduce = Mat::Zero(4, K * K);
    for (int s = 0; s < 2; ++s)
        for (int sp = 0; sp < 2; ++sp) {
            L.lift(s * K + sp, s * 2 + sp) = 1.0;
            L.reduce(s * 2 + sp, s * K + sp) = 1.0;
        }
    for (long k = 2; k < K; ++k)
        L.reduce(0, k * K + k) = 1.0;
    return L;
}

// ---------------------------------------------------------------------------
// Reduced (generalized) eigenmatrices

struct ReducedEigenmatrix {
    cplx eigenvalue;
    int chain = 0;   // which chain within the cluster
    int j = 0;       // 0: eigenmatrix, j >= 1: generalized
    Mat rho;         // system-space matrix
};

struct JordanBlockData {
    JordanReport report;
    std::vector<JordanChain> chains;
};

/// Jordan analysis of every eigenvalue cluster of M.
inline std::vector<JordanBlockData> jordan_decomposition(const Mat& M, double tol_cluster = 1e-4,
                                                         double tol_rank = 1e-8)
{
    const Vec ev = eigenvalues(M);
    const auto clusters = cluster_eigenvalues(ev, tol_cluster, true);
    std::vector<JordanBlockData> out;
    for (const auto& c : clusters) {
        JordanBlockData b;
        b.report = jordan_structure(M, c.center, tol_rank, static_cast<int>(c.members.size()));
        b.chains = jordan_chains(M, b.report, tol_rank);
        out.push_back(std::move(b));
    }
    return out;
}

inline std::vector<ReducedEigenmatrix> reduced_eigenmatrices(const ExtendedLiouvillian& L,
                                                             const std::vector<JordanBlockData>& blocks)
{
    std::vector<ReducedEigenmatrix> out;
    for (const auto& b : blocks)
        for (std::size_t c = 0; c < b.chains.size(); ++c)
            for (std::size_t j = 0; j < b.chains[c].vectors.size(); ++j) {
                ReducedEigenmatrix r;
                r.eigenvalue = b.report.eigenvalue;
                r.chain = static_cast<int>(c);
                r.j = static_cast<int>(j);
                r.rho = unvec(L.reduce * b.chains[c].vectors[j], L.system_dim, L.system_dim);
                out.push_back(std::move(r));
            }
    return out;
}

inline std::vector<ReducedEigenmatrix> reduced_eigenmatrices(const ExtendedLiouvillian& L,
                                                             double tol_cluster = 1e-4,
                                                             double tol_rank = 1e-8)
{
    return reduced_eigenmatrices(L, jordan_decomposition(L.matrix, tol_cluster, tol_rank));
}

// ---------------------------------------------------------------------------
// Linear bosonic networks

struct BosonicNetwork {
    std::vector<double> omega;          // mode frequencies
    Eigen::MatrixXd chi;                // symmetric coherent couplings, diagonal ignored
    int coupled = -1;                   // environment-coupled mode, -1 = last
    CorrelationSpec spec;               // pseudomode exponents; empty for the Markovian limit
    double markov_rate = 0.0;           // flat rate used when spec is empty
    double omega_rot = 0.0;             // rotating-frame frequency subtracted from the diagonal
    double bath_center = 0.0;           // pseudomode frequencies are bath_center + Omega_i

    static BosonicNetwork two_mode(double chi, double gamma, double lambda, bool markovian)
    {
        BosonicNetwork n;
        n.omega = {0.0, 0.0};
        n.chi = Eigen::MatrixXd::Zero(2, 2);
        n.chi(0, 1) = n.chi(1, 0) = chi;
        if (markovian)
            n.markov_rate = gamma;
        else
            n.spec = exponents_for(SpectralDensity::lorentzian(gamma, lambda));
        return n;
    }
};

inline Mat effective_nhh(const BosonicNetwork& net)
{
    const int M = static_cast<int>(net.omega.size());
    if (M == 0)
        throw ParameterError("effective_nhh: no modes");
    if (net.chi.rows() != M || net.chi.cols() != M)
        throw DimensionError("effective_nhh: coupling matrix must be M x M");
    if ((net.chi - net.chi.transpose()).cwiseAbs().maxCoeff() > 0.0)
        throw ParameterError("effective_nhh: coupling matrix must be symmetric");
    const int c = net.coupled < 0 ? M - 1 : net.coupled;
    if (c >= M)
        throw ParameterError("effective_nhh: environment-coupled mode index out of range");
    const int N = static_cast<int>(net.spec.terms.size());
    Mat H = Mat::Zero(M + N, M + N);
    for (int k = 0; k < M; ++k) {
        H(k, k) = net.omega[k] - net.omega_rot;
        for (int j = 0; j < M; ++j)
            if (j != k)
                H(j, k) = net.chi(j, k);
    }
    if (N == 0)
        H(c, c) += I1 * net.markov_rate;
    for (int i = 0; i < N; ++i) {
        const auto& t = net.spec.terms[i];
        if (!(t.decay > 0.0))
            throw ParameterError("effective_nhh: decay rates must be > 0");
        const cplx alpha = coupling_from_weight(t.weight);
        H(c, M + i) = alpha;
        H(M + i, c) = alpha;
        H(M + i, M + i) = net.bath_center + t.frequency - net.omega_rot + I1 * (0.5 * t.decay);
    }
    return H;
}

/// v(t) = exp(i H t) v0.
inline std::vector<Vec> evolve_amplitudes(const Mat& H_eff, const Vec& v0,
                                          const std::vector<double>& times,
                                          const PropagateOptions& opt = {})
{
    return propagate(I1 * H_eff, v0, times, opt);
}

} // namespace extliou
