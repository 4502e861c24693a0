#include <catch_amalgamated.hpp>

#include <random>

#include "extliou/dynamics.hpp"
#include "extliou/heom.hpp"
#include "extliou/pseudomode.hpp"

using namespace extliou;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// single-excitation generator of the gapless model, basis |g,0>, |e,0>, |g,1>
Mat gapless_oracle(double G, double L)
{
    const cplx s = I1 * std::sqrt(G * L / 2);
    Mat M = Mat::Zero(9, 9);
    M(0, 8) = 2 * L;
    M(1, 2) = s;
    M(2, 1) = s;
    M(2, 2) = -L;
    M(3, 6) = -s;
    M(4, 5) = s;
    M(4, 7) = -s;
    M(5, 4) = s;
    M(5, 5) = -L;
    M(5, 8) = -s;
    M(6, 3) = -s;
    M(6, 6) = -L;
    M(7, 4) = -s;
    M(7, 7) = -L;
    M(7, 8) = s;
    M(8, 5) = -s;
    M(8, 7) = s;
    M(8, 8) = -2 * L;
    return M;
}

Mat plus_state()
{
    Mat r(2, 2);
    r << 0.5, 0.5, 0.5, 0.5;
    return r;
}

Mat excited_superposition()
{
    // populations 0.3 / 0.7 with maximal coherence
    const double pg = 0.3, pe = 0.7;
    Mat r(2, 2);
    r << pg, std::sqrt(pg * pe), std::sqrt(pg * pe), pe;
    return r;
}

std::vector<int> sorted_chains(const Mat& M, cplx lambda)
{
    auto r = jordan_structure(M, lambda, 1e-8);
    return r.chains;
}

} // namespace

// ---------------------------------------------------------------------------
// pseudomode

TEST_CASE("pseudomode couplings from weights", "[models][pseudomode]")
{
    CHECK(std::abs(coupling_from_weight(0.25) - 0.5) < 1e-15);
    CHECK(std::abs(coupling_from_weight(-0.25) - cplx(0, 0.5)) < 1e-15);
}

TEST_CASE("pseudomode Hamiltonian hermiticity", "[models][pseudomode]")
{
    auto m = PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.4, 1.0));
    Mat H = build_pm_hamiltonian(m);
    CHECK((H - H.adjoint()).norm() < 1e-14);

    m = PseudomodeModel::spin_boson(SpectralDensity::bandgap(0.4, 1.0, 0, 0.25));
    H = build_pm_hamiltonian(m);
    CHECK((H - H.adjoint()).norm() > 1e-3);

    // decoupled: zero weight leaves H_S (x) 1 plus mode frequencies
    PseudomodeModel d;
    d.H_S(1, 1) = 0.7;
    d.Q(0, 1) = 1.0;
    d.spec.terms.push_back({0.0, 0.3, 1.0});
    H = build_pm_hamiltonian(d);
    Mat want = kron(d.H_S, Mat::Identity(2, 2));
    want += kron(Mat::Identity(2, 2), Mat(0.3 * detail::annihilation(1).adjoint() * detail::annihilation(1)));
    CHECK((H - want).norm() < 1e-14);
}

TEST_CASE("restricted generator matches the closed form", "[models][pseudomode]")
{
    for (auto [G, L] : {std::pair{0.5, 1.0}, {0.3, 2.0}, {1.7, 0.6}}) {
        const auto ext = restrict_single_excitation(PseudomodeModel::spin_boson(SpectralDensity::lorentzian(G, L)));
        REQUIRE(ext.size() == 9);
        CHECK((ext.matrix - gapless_oracle(G, L)).cwiseAbs().maxCoeff() < 1e-12);
    }
    const auto bg = restrict_single_excitation(PseudomodeModel::spin_boson(SpectralDensity::bandgap(0.4, 1, 0, 0.25)));
    CHECK(bg.size() == 16);
}

TEST_CASE("full pseudomode Liouvillian", "[models][pseudomode]")
{
    const auto m = PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0));
    const auto full = build_pm_liouvillian(m);
    REQUIRE(full.size() == 16);
    const Vec one = vec(Mat::Identity(4, 4));
    CHECK((one.adjoint() * full.matrix).norm() < 1e-13);

    // the restriction is the projection of the full generator onto the sector
    const auto kets = single_excitation_kets(1);
    const auto ext = restrict_single_excitation(m);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t e = 0; e < 3; ++e)
                    CHECK(std::abs(full.matrix(kets[a] * 4 + kets[b], kets[c] * 4 + kets[e]) -
                                   ext.matrix(a * 3 + b, c * 3 + e)) < 1e-14);

    // nearly decoupled: system block 0, pseudomode damping -gamma/2 and -gamma
    auto weak = PseudomodeModel::spin_boson(SpectralDensity::lorentzian(1e-12, 1.0));
    const Vec ev = eigenvalues(build_pm_liouvillian(weak).matrix);
    int zero = 0, half = 0, whole = 0;
    for (const auto& z : ev) {
        zero += std::abs(z.real()) < 1e-6;
        half += std::abs(z.real() + 1.0) < 1e-6;
        whole += std::abs(z.real() + 2.0) < 1e-6;
    }
    CHECK(zero == 4);
    CHECK(half == 8);
    CHECK(whole == 4);
}

TEST_CASE("pseudomode model validation", "[models][pseudomode]")
{
    auto m = PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0));
    m.spec.terms[0].decay = 0.0;
    CHECK_THROWS_AS(build_pm_liouvillian(m), ParameterError);
    m = PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0));
    m.rwa = false;
    CHECK_THROWS_AS(restrict_single_excitation(m), UnsupportedError);
    m = PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0));
    m.n_max = 40;
    m.max_dim = 1000;
    CHECK_THROWS_AS(build_pm_liouvillian(m), CapacityError);
}

TEST_CASE("spectrum at the exceptional point", "[models][pseudomode]")
{
    const Mat M = restrict_single_excitation(PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0))).matrix;
    const Vec ev = eigenvalues(M);
    int z = 0, m1 = 0, mh = 0;
    for (const auto& x : ev) {
        z += std::abs(x) < 1e-4;
        m1 += std::abs(x + 1.0) < 1e-4;
        mh += std::abs(x + 0.5) < 1e-4;
    }
    CHECK(z == 1);
    CHECK(m1 == 4);
    CHECK(mh == 4);
    CHECK(sorted_chains(M, -1.0) == std::vector<int>{3, 1});
    CHECK(sorted_chains(M, -0.5) == std::vector<int>{2, 2});
}

TEST_CASE("conjugate pairs and stability for gapless models", "[models][property]")
{
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> g(0.01, 3.0), l(0.2, 5.0);
    for (int seed = 0; seed < 100; ++seed) {
        const double G = g(rng), L = l(rng);
        const Mat M = restrict_single_excitation(PseudomodeModel::spin_boson(SpectralDensity::lorentzian(G, L))).matrix;
        const Vec one = vec(Mat::Identity(3, 3));
        REQUIRE((one.adjoint() * M).norm() < 1e-12 * (1 + M.norm()));
        const Vec ev = eigenvalues(M);
        const double s = spectral_scale(ev);
        for (const auto& z : ev) {
            REQUIRE(z.real() <= 1e-10 * s);
            double best = 1e300;
            for (const auto& w : ev)
                best = std::min(best, std::abs(std::conj(z) - w));
            REQUIRE(best < 1e-6 * s);
        }
    }
}

TEST_CASE("reduced eigenmatrices", "[models][pseudomode]")
{
    const auto ext = restrict_single_excitation(PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0)));
    const auto red = reduced_eigenmatrices(ext);
    bool saw_zero = false, saw_half = false;
    for (const auto& r : red) {
        if (std::abs(r.eigenvalue) < 1e-6) {
            saw_zero = true;
            CHECK(std::abs(r.rho(1, 1)) < 1e-10);
            CHECK(std::abs(r.rho(0, 1)) < 1e-10);
            CHECK(std::abs(r.rho(1, 0)) < 1e-10);
            CHECK(std::abs(r.rho(0, 0)) > 1e-3);
        }
        if (std::abs(r.eigenvalue + 0.5) < 1e-6) {
            saw_half = true;
            CHECK(std::abs(r.rho(0, 0)) < 1e-10);
            CHECK(std::abs(r.rho(1, 1)) < 1e-10);
        }
    }
    CHECK(saw_zero);
    CHECK(saw_half);

    const auto away = restrict_single_excitation(PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.3, 1.0)));
    for (const auto& r : reduced_eigenmatrices(away))
        CHECK(r.j == 0);
}

TEST_CASE("effective non-Hermitian Hamiltonians", "[models][pseudomode]")
{
    const double chi = 0.3, G = 0.8;
    Mat H = effective_nhh(BosonicNetwork::two_mode(chi, G, 1.0, true));
    Mat want(2, 2);
    want << 0.0, chi, chi, cplx(0, G);
    CHECK((H - want).norm() < 1e-15);

    H = effective_nhh(BosonicNetwork::two_mode(chi, G, 1.5, false));
    REQUIRE(H.rows() == 3);
    CHECK(std::abs(H(1, 2) - std::sqrt(G * 1.5 / 2)) < 1e-15);
    CHECK(std::abs(H(2, 1) - std::sqrt(G * 1.5 / 2)) < 1e-15);
    CHECK(std::abs(H(2, 2) - cplx(0, 1.5)) < 1e-15);
    CHECK(std::abs(H(0, 1) - chi) < 1e-15);

    BosonicNetwork free;
    free.omega = {0.1, 0.4};
    free.chi = Eigen::MatrixXd::Zero(2, 2);
    H = effective_nhh(free);
    CHECK((H - H.adjoint()).norm() < 1e-15);
    CHECK(std::abs(H(0, 1)) == 0.0);

    BosonicNetwork bad = free;
    bad.chi(0, 1) = 1.0;
    CHECK_THROWS_AS(effective_nhh(bad), ParameterError);
}

TEST_CASE("amplitude dynamics at exceptional points", "[models][pseudomode]")
{
    const double G = 0.8;
    const Mat H2 = effective_nhh(BosonicNetwork::two_mode(G / 2, G, 1.0, true));
    Vec v0(2);
    v0 << 1.0, 0.0;
    const std::vector<double> t{0.0, 0.5, 2.0, 7.0};
    auto v = evolve_amplitudes(H2, v0, t);
    const Mat N2 = I1 * H2 + 0.5 * G * Mat::Identity(2, 2);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Vec want = std::exp(-0.5 * G * t[k]) * (v0 + t[k] * N2 * v0);
        CHECK((v[k] - want).norm() < 1e-9);
    }

    const Mat H3 = effective_nhh(BosonicNetwork::two_mode(1.0 / (3 * std::sqrt(3.0)), 16.0 / 27.0, 1.0, false));
    Vec w0 = Vec::Zero(3);
    w0(0) = 1.0;
    const Mat N3 = I1 * H3 + Mat::Identity(3, 3) / 3.0;
    CHECK((N3 * N3 * N3).norm() < 1e-12);
    v = evolve_amplitudes(H3, w0, t);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Vec want = std::exp(-t[k] / 3) * (w0 + t[k] * N3 * w0 + 0.5 * t[k] * t[k] * N3 * N3 * w0);
        CHECK((v[k] - want).norm() < 1e-9);
    }

    BosonicNetwork closed;
    closed.omega = {0.0, 0.5};
    closed.chi = Eigen::MatrixXd::Zero(2, 2);
    closed.chi(0, 1) = closed.chi(1, 0) = 0.7;
    v = evolve_amplitudes(effective_nhh(closed), v0, {0.0, 3.0, 11.0});
    for (const auto& x : v)
        CHECK(std::abs(x.norm() - 1.0) < 1e-9);
}

// ---------------------------------------------------------------------------
// heom

TEST_CASE("ADO enumeration", "[models][heom]")
{
    CHECK(enumerate_ados(1, 2) == std::vector<AdoIndex>{{}, {0}, {0, 0}});
    CHECK(enumerate_ados(3, 0) == std::vector<AdoIndex>{{}});
    CHECK(enumerate_ados(2, 1) == std::vector<AdoIndex>{{}, {0}, {1}});
    CHECK(enumerate_ados(2, 2).size() == 6);
    CHECK(enumerate_ados(HeomModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0), 2)).size() == 6);
    CHECK_THROWS_AS(enumerate_ados(1, -1), ParameterError);
}

TEST_CASE("RWA hierarchy structure", "[models][heom]")
{
    const auto m = HeomModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0), 2);
    const auto H = build_heom_rwa(m);
    CHECK(H.matrix.rows() == 24);
    CHECK(build_heom_rwa(HeomModel::spin_boson(SpectralDensity::bandgap(0.4, 1.0, 0, 0.25), 2)).matrix.rows() == 60);

    // level-0 rows touch only level 0 and level 1
    for (Eigen::Index c = 0; c < H.matrix.cols(); ++c) {
        const auto level = H.ados[c / 4].size();
        if (level >= 2)
            CHECK(H.matrix.topRows(4).col(c).norm() == 0.0);
    }

    HeomModel bare = m;
    bare.tier = 0;
    bare.H_S(1, 1) = 0.9;
    const auto B = build_heom_rwa(bare);
    CHECK((B.matrix - liouvillian_from_parts(bare.H_S, {})).norm() < 1e-15);
}

TEST_CASE("hierarchy blocks at the exceptional point", "[models][heom]")
{
    HeomModel m = HeomModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0), 2);
    m.weighting = DownWeighting::distinct;
    const auto b = block_decompose(build_heom_rwa(m));
    REQUIRE(b.population.rows() == 6);
    REQUIRE(b.coherence.rows() == 5);
    REQUIRE(b.conj_coherence.rows() == 5);
    CHECK(b.remainder.rows() == 8);

    const cplx x = I1 * 0.25;
    Mat Lp(6, 6);
    Lp << 0, 0, -I1, I1, 0, 0,
          0, 0, I1, -I1, 0, 0,
          0, x, -1, 0, -I1, I1,
          0, -x, 0, -1, I1, -I1,
          0, 0, -x, x, -2, 0,
          0, 0, 0, 0, 0, -2;
    Mat Lc(5, 5);
    Lc << 0, -I1, I1, 0, 0,
          -x, -1, 0, -I1, I1,
          0, 0, -1, I1, -I1,
          0, 0, x, -2, 0,
          0, 0, -x, 0, -2;
    Mat Lcs(5, 5);
    Lcs << 0, I1, -I1, 0, 0,
           x, -1, 0, -I1, I1,
           0, 0, -1, I1, -I1,
           0, 0, x, -2, 0,
           0, 0, -x, 0, -2;
    CHECK((b.population - Lp).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b.coherence - Lc).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b.conj_coherence - Lcs).cwiseAbs().maxCoeff() < 1e-12);

    CHECK(sorted_chains(b.population, -1.0) == std::vector<int>{3, 1});
    CHECK(sorted_chains(b.population, 0.0) == std::vector<int>{1});
    CHECK(sorted_chains(b.population, -2.0) == std::vector<int>{1});
    CHECK(sorted_chains(b.coherence, -0.5) == std::vector<int>{2});
    CHECK(sorted_chains(b.coherence, -2.0) == std::vector<int>{1});
    CHECK(sorted_chains(b.coherence, cplx(-1.5, -0.5)) == std::vector<int>{1});
    CHECK(sorted_chains(b.coherence, cplx(-1.5, 0.5)) == std::vector<int>{1});
}

TEST_CASE("general hierarchy", "[models][heom]")
{
    HeomModel m;
    m.rwa = false;
    m.Q(0, 1) = m.Q(1, 0) = 1.0;
    m.H_S(1, 1) = 0.5;
    m.tier = 1;
    m.general_exponents = {{0.3, 0.7, false}};
    auto H = build_heom_general(m);
    CHECK(H.matrix.rows() == 8);
    const Vec one = vec(Mat::Identity(2, 2));
    CHECK((one.adjoint() * H.matrix.topRows(4)).norm() < 1e-14);

    m.tier = 2;
    m.general_exponents = HeomModel::general_exponents_from(exponents_for(SpectralDensity::bandgap(0.4, 1.0, 0.0, 0.3)));
    H = build_heom_general(m);
    CHECK((one.adjoint() * H.matrix.topRows(4)).norm() < 1e-13);

    HeomModel free = m;
    free.Q.setZero();
    H = build_heom_general(free);
    const Mat L0 = liouvillian_from_parts(free.H_S, {});
    for (std::size_t a = 0; a < H.ados.size(); ++a)
        for (std::size_t b = 0; b < H.ados.size(); ++b) {
            const Mat blk = H.matrix.block(4 * a, 4 * b, 4, 4);
            if (a != b) {
                CHECK(blk.norm() == 0.0);
                continue;
            }
            cplx damp = 0;
            for (int l : H.ados[a])
                damp += free.general_exponents[l].chi;
            CHECK((blk - (L0 - damp * Mat::Identity(4, 4))).norm() < 1e-14);
        }
    CHECK_THROWS_AS(build_heom_rwa(m), UnsupportedError);
}

TEST_CASE("band-gap hierarchy reproduces the pseudomode dynamics", "[models][heom]")
{
    const auto J = SpectralDensity::bandgap(0.6, 1.0, 0.0, 0.3);
    const auto t = linear_grid(0, 10, 41);
    const auto a = evolve_reduced(HeomModel::spin_boson(J, 2), excited_superposition(), t);
    const auto b = evolve_reduced(PseudomodeModel::spin_boson(J), excited_superposition(), t);
    CHECK(max_deviation(a, b) < 1e-9);
}

TEST_CASE("system projection", "[models][heom]")
{
    const auto H = build_heom_rwa(HeomModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0), 2));
    Vec s = Vec::Zero(24);
    s(3) = 1.0;
    Mat ee = Mat::Zero(2, 2);
    ee(1, 1) = 1.0;
    CHECK(project_system(H, s) == ee);
    Vec ado = Vec::Zero(24);
    ado(5) = 1.0;
    CHECK(project_system(H, ado).norm() == 0.0);
    const auto traj = propagate(H.matrix, s, {0.0, 0.7, 3.0});
    for (const auto& v : traj) {
        const Mat r = project_system(H, v);
        CHECK(std::abs(r.trace() - 1.0) < 1e-9);
        CHECK((r - r.adjoint()).norm() < 1e-9);
    }
    CHECK_THROWS_AS(project_system(H, Vec::Zero(5)), DimensionError);
}

// ---------------------------------------------------------------------------
// dynamics

TEST_CASE("polynomial decay at the exceptional point", "[models][dynamics]")
{
    const auto rho0 = excited_superposition();
    const auto t = linear_grid(0, 10, 101);
    for (const auto& tr : {evolve_reduced(PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0)), rho0, t),
                           evolve_reduced(HeomModel::spin_boson(SpectralDensity::lorentzian(0.5, 1.0), 2), rho0, t)}) {
        CHECK((tr.rho[0] - rho0).norm() == 0.0);
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double x = t[k];
            const cplx coh = tr.rho[k](1, 0) / rho0(1, 0);
            const double pop = tr.rho[k](1, 1).real() / rho0(1, 1).real();
            CHECK(std::abs(coh - 0.5 * (x + 2) * std::exp(-x / 2)) < 1e-8);
            CHECK(std::abs(pop - 0.25 * (x * x + 4 * x + 4) * std::exp(-x)) < 1e-8);
        }
    }
}

TEST_CASE("decoherence function", "[models][dynamics]")
{
    for (double q : {0.0, 0.2, 0.6})
        for (double G : {0.1, 0.5, 1.3})
            CHECK(std::abs(decoherence_function(G, 1.0, q, 0.0) - 1.0) < 1e-15);
    for (double x : {0.1, 1.0, 4.0, 20.0})
        CHECK_THAT(decoherence_function(0.5, 1.0, 0.0, x).real(), WithinRel((1 + x / 2) * std::exp(-x / 2), 1e-12));

    const auto t = linear_grid(0, 10, 51);
    const auto tr = evolve_reduced(PseudomodeModel::spin_boson(SpectralDensity::lorentzian(0.3, 1.0)), plus_state(), t);
    for (std::size_t k = 0; k < t.size(); ++k)
        CHECK(std::abs(tr.rho[k](0, 1) / 0.5 - decoherence_function(0.3, 1.0, 0.0, t[k])) < 1e-8);

    // continuity through D = 0
    for (double q : {0.0, 0.25})
        for (double x : {0.5, 3.0}) {
            const double Gs = (1 - q) / 2;
            CHECK(std::abs(decoherence_function(Gs * (1 + 1e-9), 1.0, q, x) - decoherence_function(Gs, 1.0, q, x)) < 1e-8);
            CHECK(std::abs(decoherence_function(Gs * (1 - 1e-9), 1.0, q, x) - decoherence_function(Gs, 1.0, q, x)) < 1e-8);
        }
    CHECK_THROWS_AS(decoherence_function(-1.0, 1.0, 0.0, 1.0), ParameterError);
}

TEST_CASE("decoherence function against the band-gap pseudomode model", "[models][dynamics]")
{
    const auto t = linear_grid(0, 10, 41);
    for (auto [G, q] : {std::pair{0.2, 0.5}, {0.8, 0.25}, {0.375, 0.25}}) {
        const auto J = SpectralDensity::bandgap(G, 1.0, 0.0, q);
        const auto pm = evolve_reduced(PseudomodeModel::spin_boson(J), excited_superposition(), t);
        const auto an = analytic_spin_boson(G, 1.0, q, excited_superposition(), t);
        CHECK(max_deviation(pm, an) < 1e-8);
        const auto phys = check_physical(pm);
        CHECK(phys.trace < 1e-9);
        CHECK(phys.hermiticity < 1e-9);
        CHECK(phys.min_eigenvalue > -1e-9);
    }
}

TEST_CASE("non-Markovianity classification", "[models][dynamics]")
{
    CHECK_FALSE(is_nonmarkovian(0.4, 1.0, 0.0).nonmarkovian);
    const auto nm = is_nonmarkovian(0.6, 1.0, 0.0);
    CHECK(nm.nonmarkovian);
    CHECK(std::isfinite(nm.witness_time));
    CHECK(nm.witness_time > 0);
    // |G| decreases up to the witness and grows right after it
    const double tw = nm.witness_time;
    CHECK(std::abs(decoherence_function(0.6, 1.0, 0.0, tw + 0.05)) > std::abs(decoherence_function(0.6, 1.0, 0.0, tw)));

    CHECK_FALSE(is_nonmarkovian(0.25, 1.0, 0.5).nonmarkovian);
    CHECK(is_nonmarkovian(0.251, 1.0, 0.5).nonmarkovian);
}

TEST_CASE("first vanishing time near the boundary", "[models][dynamics]")
{
    for (double eps : {1e-4, 1e-2}) {
        const double G = 0.5 * (1 + eps);
        const double tv = first_vanishing_time(G, 1.0, 1e4);
        CHECK(std::abs(decoherence_function(G, 1.0, 0.0, tv)) < 1e-9);
        // brute-force first sign change of G
        double prev = 1.0, tz = -1;
        const double h = 1e-3 / std::sqrt(eps);
        for (double x = h; x < 1e4; x += h) {
            const double g = decoherence_function(G, 1.0, 0.0, x).real();
            if ((g > 0) != (prev > 0)) {
                tz = x;
                break;
            }
            prev = g;
        }
        CHECK(std::abs(tz - tv) <= h);
        // leading order: t^-1 = sqrt(eps) / (2 pi)
        CHECK_THAT(1.0 / tv, WithinRel(std::sqrt(eps) / (2 * M_PI), 0.05));
    }
    CHECK_THROWS_AS(first_vanishing_time(0.4, 1.0), NotInRegimeError);
}

TEST_CASE("reconstruction from generalized eigenmatrices", "[models][dynamics]")
{
    const auto t = linear_grid(0, 8, 33);
    for (auto [G, q] : {std::pair{0.5, 0.0}, {0.375, 0.25}, {0.9, 0.0}}) {
        const auto J = SpectralDensity::bandgap(G, 1.0, 0.0, q);
        const auto ext = restrict_single_excitation(PseudomodeModel::spin_boson(J));
        const auto a = reconstruct_reduced(ext, excited_superposition(), t);
        const auto b = evolve_reduced(ext, excited_superposition(), t);
        CHECK(max_deviation(a, b) < 1e-8);
    }
}

TEST_CASE("trajectory CSV layout", "[models][dynamics]")
{
    auto tr = analytic_spin_boson(0.5, 1.0, 0.0, plus_state(), {0.0, 1.0});
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    const std::string s = os.str();
    CHECK(s.rfind("t,re_00,im_00,re_01,im_01,re_10,im_10,re_11,im_11,absG\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 3);
}
