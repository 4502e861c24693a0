#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "environment.hpp"
#include "linalg.hpp"
#include "pseudomode.hpp"

namespace extliou {

/// Multi-index of an auxiliary density operator: sorted label indices (0-based),
/// one entry per occupation. Level = size().
using AdoIndex = std::vector<int>;

/// One hierarchy label: decay rate chi and the up (A) / down (B) superoperators.
struct HeomLabel {
    std::string name;
    cplx chi;
    Mat A;
    Mat B;
};

/// Weight of the down coupling from ADO j - k into j: n_k (occupation of k in j) or 1.
enum class DownWeighting { occupation, distinct };

/// Exponent of the general (non-RWA) decomposition
/// C(t) = sum_l xi^R_l exp(-chi_l t) + i sum_l xi^I_l exp(-chi_l t).
struct GeneralExponent {
    cplx xi;
    cplx chi;
    bool imaginary = false;
};

/// Emission exponent under the RWA: C^-(t) = sum_l xi^-_l exp(-chi_l t); xi^+ is the
/// absorption weight (zero at zero temperature).
struct RwaExponent {
    cplx xi_minus;
    cplx xi_plus = 0.0;
    cplx chi;
};

struct HeomModel {
    Mat H_S = Mat::Zero(2, 2);
    Mat Q = Mat::Zero(2, 2);   // Q, or Q~ when rwa
    bool rwa = true;
    std::vector<RwaExponent> rwa_exponents;
    std::vector<GeneralExponent> general_exponents;
    int tier = 2;
    DownWeighting weighting = DownWeighting::occupation;
    Eigen::Index max_dim = 4096;

    static HeomModel spin_boson(const SpectralDensity& J, int tier = 2)
    {
        HeomModel m;
        m.Q(0, 1) = 1.0;
        m.rwa = true;
        m.tier = tier;
        m.rwa_exponents = rwa_exponents_from(exponents_for(J));
        return m;
    }

    static std::vector<RwaExponent> rwa_exponents_from(const CorrelationSpec& s)
    {
        s.validate();
        std::vector<RwaExponent> out;
        for (const auto& t : s.terms)
            out.push_back({t.weight, 0.0, cplx(0.5 * t.decay, t.frequency)});
        return out;
    }

    /// Real/imaginary split of sum_i w_i exp(-(i Omega_i + gamma_i/2) t); terms with
    /// equal chi are merged and vanishing weights dropped.
    static std::vector<GeneralExponent> general_exponents_from(const CorrelationSpec& s)
    {
        s.validate();
        std::vector<GeneralExponent> re, im;
        auto add = [](std::vector<GeneralExponent>& v, cplx xi, cplx chi, bool imag) {
            for (auto& e : v)
                if (e.chi == chi) {
                    e.xi += xi;
                    return;
                }
            v.push_back({xi, chi, imag});
        };
        for (const auto& t : s.terms) {
            const cplx chi(0.5 * t.decay, t.frequency);
            add(re, 0.5 * t.weight, chi, false);
            add(re, 0.5 * std::conj(t.weight), std::conj(chi), false);
            add(im, t.weight / (2.0 * I1), chi, true);
            add(im, -std::conj(t.weight) / (2.0 * I1), std::conj(chi), true);
        }
        std::vector<GeneralExponent> out;
        for (auto* v : {&re, &im})
            for (const auto& e : *v)
                if (std::abs(e.xi) > 0.0)
                    out.push_back(e);
        return out;
    }

    int system_dim() const { return static_cast<int>(H_S.rows()); }
};

struct HeomLiouvillian {
    Mat matrix;
    std::vector<AdoIndex> ados;          // level-0 first
    std::vector<Eigen::Index> offsets;   // start of each ADO block
    std::vector<std::string> label_names;
    int system_dim = 2;
};

inline std::string ado_name(const AdoIndex& j)
{
    std::string s = "[";
    for (std::size_t r = j.size(); r-- > 0;) {
        s += std::to_string(j[r] + 1);
        if (r)
            s += ",";
    }
    return s + "]";
}

/// All multisets over `labels` labels of size <= tier, level-major then lexicographic.
inline std::vector<AdoIndex> enumerate_ados(int labels, int tier)
{
    if (tier < 0)
        throw ParameterError("enumerate_ados: tier must be >= 0");
    std::vector<AdoIndex> out{AdoIndex{}};
    std::vector<AdoIndex> level{AdoIndex{}};
    for (int m = 1; m <= tier && labels > 0; ++m) {
        std::vector<AdoIndex> next;
        for (const auto& j : level) {
            const int start = j.empty() ? 0 : j.back();
            for (int k = start; k < labels; ++k) {
                AdoIndex n = j;
                n.push_back(k);
                next.push_back(std::move(n));
            }
        }
        std::sort(next.begin(), next.end());
        out.insert(out.end(), next.begin(), next.end());
        level = std::move(next);
    }
    return out;
}

namespace detail {

inline Mat left_mul(const Mat& X)
{
    return kron(X, Mat::Identity(X.rows(), X.rows()));
}

inline Mat right_mul(const Mat& X)
{
    return kron(Mat::Identity(X.rows(), X.rows()), X.transpose());
}

inline void check_heom(const HeomModel& m)
{
    if (m.H_S.rows() != m.H_S.cols() || m.H_S.rows() == 0)
        throw DimensionError("heom model: H_S must be square and nonempty");
    if (m.Q.rows() != m.H_S.rows() || m.Q.cols() != m.H_S.cols())
        throw DimensionError("heom model: coupling operator dimension mismatch");
    if (m.tier < 0)
        throw ParameterError("heom model: tier must be >= 0");
}

inline std::vector<HeomLabel> rwa_labels(const HeomModel& m)
{
    const Mat& Qt = m.Q;
    const Mat Qd = Qt.adjoint();
    std::vector<HeomLabel> out;
    for (std::size_t l = 0; l < m.rwa_exponents.size(); ++l) {
        const auto& e = m.rwa_exponents[l];
        const std::string id = std::to_string(l + 1);
        // absorption label: decays with chi*, raises with Q~^x
        out.push_back({id + "+", std::conj(e.chi), left_mul(Qt) - right_mul(Qt),
                       e.xi_plus * left_mul(Qd) - std::conj(e.xi_minus) * right_mul(Qd)});
        // emission label: decays with chi, raises with (Q~^dag)^x
        out.push_back({id + "-", e.chi, left_mul(Qd) - right_mul(Qd),
                       e.xi_minus * left_mul(Qt) - std::conj(e.xi_plus) * right_mul(Qt)});
    }
    return out;
}

inline std::vector<HeomLabel> general_labels(const HeomModel& m)
{
    const Mat comm = left_mul(m.Q) - right_mul(m.Q);
    const Mat anti = left_mul(m.Q) + right_mul(m.Q);
    std::vector<HeomLabel> out;
    for (std::size_t l = 0; l < m.general_exponents.size(); ++l) {
        const auto& e = m.general_exponents[l];
        const std::string id = std::to_string(l + 1) + (e.imaginary ? "I" : "R");
        out.push_back({id, e.chi, comm, e.imaginary ? Mat(I1 * e.xi * anti) : Mat(e.xi * comm)});
    }
    return out;
}

inline HeomLiouvillian assemble_heom(const HeomModel& m, const std::vector<HeomLabel>& labels)
{
    const int d = m.system_dim();
    const Eigen::Index d2 = Eigen::Index(d) * d;
    const int K = static_cast<int>(labels.size());
    // count before enumerating so that the cap is checked cheaply
    double count = 1, level = 1;
    for (int k = 1; k <= m.tier && K > 0; ++k) {
        level = level * (K + k - 1) / k;
        count += level;
    }
    if (count * double(d2) > double(m.max_dim))
        throw CapacityError("heom: generator dimension " + std::to_string(long(count * d2)) +
                            " exceeds cap " + std::to_string(m.max_dim));

    HeomLiouvillian out;
    out.system_dim = d;
    out.ados = enumerate_ados(K, m.tier);
    for (const auto& l : labels)
        out.label_names.push_back(l.name);
    std::map<AdoIndex, Eigen::Index> pos;
    for (std::size_t a = 0; a < out.ados.size(); ++a) {
        pos[out.ados[a]] = static_cast<Eigen::Index>(a);
        out.offsets.push_back(static_cast<Eigen::Index>(a) * d2);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(out.ados.size()) * d2;
    out.matrix = Mat::Zero(n, n);
    const Mat Id = Mat::Identity(d, d);
    const Mat bare = -I1 * (kron(m.H_S, Id) - kron(Id, m.H_S.transpose()));
    const Mat Id2 = Mat::Identity(d2, d2);
    for (std::size_t a = 0; a < out.ados.size(); ++a) {
        const AdoIndex& j = out.ados[a];
        const Eigen::Index r = out.offsets[a];
        cplx damp = 0;
        for (int k : j)
            damp += labels[k].chi;
        out.matrix.block(r, r, d2, d2) = bare - damp * Id2;
        for (int k = 0; k < K; ++k) {
            if (static_cast<int>(j.size()) < m.tier) {
                AdoIndex up = j;
                up.insert(std::upper_bound(up.begin(), up.end(), k), k);
                out.matrix.block(r, pos.at(up) * d2, d2, d2) += -I1 * labels[k].A;
            }
            const auto cnt = std::count(j.begin(), j.end(), k);
            if (cnt > 0) {
                AdoIndex down = j;
                down.erase(std::find(down.begin(), down.end(), k));
                const double f = m.weighting == DownWeighting::occupation ? double(cnt) : 1.0;
                out.matrix.block(r, pos.at(down) * d2, d2, d2) += (-I1 * f) * labels[k].B;
            }
        }
    }
    return out;
}

} // namespace detail

inline std::vector<AdoIndex> enumerate_ados(const HeomModel& m)
{
    const int K = m.rwa ? 2 * static_cast<int>(m.rwa_exponents.size())
                        : static_cast<int>(m.general_exponents.size());
    return enumerate_ados(K, m.tier);
}

/// RWA hierarchy; labels per exponent l are ordered (l,+), (l,-).
inline HeomLiouvillian build_heom_rwa(const HeomModel& m)
{
    detail::check_heom(m);
    if (!m.rwa)
        throw UnsupportedError("build_heom_rwa: model is not in RWA form");
    return detail::assemble_heom(m, detail::rwa_labels(m));
}

inline HeomLiouvillian build_heom_general(const HeomModel& m)
{
    detail::check_heom(m);
    if (m.rwa)
        throw UnsupportedError("build_heom_general: model is in RWA form");
    return detail::assemble_heom(m, detail::general_labels(m));
}

inline HeomLiouvillian build_heom(const HeomModel& m)
{
    return m.rwa ? build_heom_rwa(m) : build_heom_general(m);
}

inline Mat project_system(const HeomLiouvillian& L, const Vec& state)
{
    if (state.size() != L.matrix.rows())
        throw DimensionError("project_system: state length " + std::to_string(state.size()) +
                             " does not match generator dimension " +
                             std::to_string(L.matrix.rows()));
    const Eigen::Index d2 = Eigen::Index(L.system_dim) * L.system_dim;
    return unvec(state.head(d2), L.system_dim, L.system_dim);
}

inline ExtendedLiouvillian to_extended(const HeomLiouvillian& H)
{
    ExtendedLiouvillian L;
    L.matrix = H.matrix;
    L.provenance = Provenance::heom;
    L.system_dim = H.system_dim;
    const int d = H.system_dim;
    const Eigen::Index d2 = Eigen::Index(d) * d;
    L.dims = {d, static_cast<int>(H.ados.size())};
    for (const auto& a : H.ados)
        for (int s = 0; s < d; ++s)
            for (int sp = 0; sp < d; ++sp)
                L.labels.push_back(ado_name(a) + "|" + detail::system_label(s, d) + "><" +
                                   detail::system_label(sp, d) + "|");
    L.lift = Mat::Zero(H.matrix.rows(), d2);
    L.lift.topRows(d2) = Mat::Identity(d2, d2);
    L.reduce = L.lift.transpose();
    return L;
}

struct HeomBlocks {
    Mat population, coherence, conj_coherence, remainder;
    std::vector<Eigen::Index> ip, ic, ics, irest;
};

/// Splits a qubit hierarchy into the sectors reachable from rho_gg/rho_ee (p),
/// rho_eg (c) and rho_ge (c*), found as connected components of the sparsity graph.
inline HeomBlocks block_decompose(const HeomLiouvillian& L, double threshold = 1e-12)
{
    if (L.system_dim != 2)
        throw UnsupportedError("block_decompose: requires a qubit system");
    const Mat& M = L.matrix;
    const Eigen::Index n = M.rows();
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (Eigen::Index s = 0; s < n; ++s) {
        if (comp[s] >= 0)
            continue;
        std::queue<Eigen::Index> q;
        q.push(s);
        comp[s] = ncomp;
        while (!q.empty()) {
            auto i = q.front();
            q.pop();
            for (Eigen::Index j = 0; j < n; ++j)
                if (comp[j] < 0 && (std::abs(M(i, j)) > threshold || std::abs(M(j, i)) > threshold)) {
                    comp[j] = ncomp;
                    q.push(j);
                }
        }
        ++ncomp;
    }
    const int cp = comp[0], cc = comp[2], ccs = comp[1];
    if (comp[3] != cp || cp == cc || cp == ccs || cc == ccs) {
        double cross = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (comp[i] == cp && comp[j] == cp)
                    cross = std::max(cross, std::abs(M(i, j)));
        throw NotBlockDecomposableError("block_decompose: population and coherence sectors mix",
                                        cross);
    }
    HeomBlocks b;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (comp[i] == cp)
            b.ip.push_back(i);
        else if (comp[i] == cc)
            b.ic.push_back(i);
        else if (comp[i] == ccs)
            b.ics.push_back(i);
        else
            b.irest.push_back(i);
    }
    auto take = [&M](const std::vector<Eigen::Index>& idx) {
        Mat B(idx.size(), idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < idx.size(); ++c)
                B(r, c) = M(idx[r], idx[c]);
        return B;
    };
    b.population = take(b.ip);
    b.coherence = take(b.ic);
    b.conj_coherence = take(b.ics);
    b.remainder = take(b.irest);
    return b;
}

inline void write_ado_manifest(std::ostream& os, const HeomLiouvillian& L)
{
    for (std::size_t a = 0; a < L.ados.size(); ++a) {
        os << a << ' ' << L.offsets[a] << ' ' << L.ados[a].size() << ' ';
        std::string s;
        for (std::size_t r = L.ados[a].size(); r-- > 0;) {
            s += L.label_names[L.ados[a][r]];
            if (r)
                s += ",";
        }
        os << '[' << s << "]\n";
    }
}

} // namespace extliou
