// Jordan structure of the single-excitation generator for the gapless and band-gap models.
#include <iostream>

#include "extliou/pseudomode.hpp"
#include "extliou/spectral_ep.hpp"

int main()
{
    using namespace extliou;
    for (double q : {0.0, 0.25}) {
        const double gamma = (1 - q) / 2;
        const auto J = SpectralDensity::bandgap(gamma, 1.0, 0.0, q);
        const auto L = restrict_single_excitation(PseudomodeModel::spin_boson(J));
        std::cout << "q = " << q << ", Gamma = " << gamma << ", dimension " << L.size() << "\n";
        for (const auto& r : detect_ep(L.matrix, 1e-4, 1e-8, gamma)) {
            write_ep_report(std::cout, r);
            std::cout << '\n';
        }
    }
}
