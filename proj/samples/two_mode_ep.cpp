// Two coupled modes: Markovian EP2 versus the environment-induced EP3.
#include <cmath>
#include <iostream>

#include "extliou/pseudomode.hpp"
#include "extliou/spectral_ep.hpp"

int main()
{
    using namespace extliou;
    const auto eps = logspace(1e-6, 1e-3, 13);

    auto ep2 = [](double e) { return effective_nhh(BosonicNetwork::two_mode(0.5 * (1 + e), 1.0, 1.0, true)); };
    auto f2 = perturbation_scaling(ep2, cplx(0, 0.5), 2, eps);
    std::cout << "Markovian EP2: splitting ~ " << f2.coefficient << " eps^" << f2.exponent << "\n";

    const double G = 16.0 / 27.0;
    LocateOptions opt;
    opt.mode = LocateMode::minimal_gap;
    opt.cluster_size = 3;
    const double chi = locate_ep_1d(
        [G](double c) { return effective_nhh(BosonicNetwork::two_mode(c, G, 1.0, false)); }, 0.1, 0.3, 1e-12, opt);
    std::cout << "EP3 located at chi = " << chi << " (1/(3 sqrt 3) = " << 1 / (3 * std::sqrt(3.0)) << ")\n";

    auto ep3 = [G](double e) {
        return effective_nhh(BosonicNetwork::two_mode((1 + e) / (3 * std::sqrt(3.0)), G, 1.0, false));
    };
    auto f3 = perturbation_scaling(ep3, cplx(0, 1.0 / 3), 3, eps);
    std::cout << "EP3: splitting ~ " << f3.coefficient << " eps^" << f3.exponent << "\n";
    for (const auto& x : puiseux_coefficients(ep3, cplx(0, 1.0 / 3), 3, 1e-9))
        std::cout << "  x = " << x << ", x^3 = " << x * x * x << "\n";
}
