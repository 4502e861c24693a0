// Qubit dynamics at the EP from three routes: direct integration, Jordan chains, closed form.
#include <cstdio>

#include "extliou/dynamics.hpp"

int main()
{
    using namespace extliou;
    const auto J = SpectralDensity::lorentzian(0.5, 1.0);
    const auto L = restrict_single_excitation(PseudomodeModel::spin_boson(J));
    Mat rho0(2, 2);
    rho0 << 0.5, 0.5, 0.5, 0.5;
    const auto t = linear_grid(0.0, 10.0, 11);
    const auto direct = evolve_reduced(L, rho0, t);
    const auto jordan = reconstruct_reduced(L, rho0, t);
    const auto closed = analytic_spin_boson(0.5, 1.0, 0.0, rho0, t);
    std::printf("%6s %14s %14s %14s\n", "t", "rho_ge direct", "rho_ge jordan", "rho_ge exact");
    for (std::size_t k = 0; k < t.size(); ++k)
        std::printf("%6.2f %14.10f %14.10f %14.10f\n", t[k], direct.rho[k](0, 1).real(), jordan.rho[k](0, 1).real(),
                    closed.rho[k](0, 1).real());
    std::printf("max deviation direct/jordan %.3g, direct/exact %.3g\n", max_deviation(direct, jordan),
                max_deviation(direct, closed));
}
