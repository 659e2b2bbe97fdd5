#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "kerrspec/core.hpp"

namespace testcases {

using namespace kerrspec;

struct Case {
    DeviceParams d;
    ToneSpec probe;
};

/// Random device and probe with a linear-response photon number below `n_max_linear`.
inline Case random_case(std::mt19937_64& rng, double n_max_linear = 1.5, double kerr_mhz_max = 15.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Case c;
    c.d = DeviceParams::from_lab(8.0 + 4.0 * u(rng), kerr_mhz_max * (2.0 * u(rng) - 1.0), 0.2 + 1.8 * u(rng),
                                 0.2 + 1.8 * u(rng));
    const double k = c.d.kappa_tot();
    const double det = (-2.0 * std::abs(c.d.kerr) - 3.0 * k) + u(rng) * (2.0 * std::abs(c.d.kerr) + 6.0 * k);
    const double n_lin = 0.01 + (n_max_linear - 0.01) * u(rng);
    const double e = std::sqrt(n_lin * k * k / (4.0 * c.d.kappa_e));
    c.probe = ToneSpec{c.d.omega_r + det, amplitude_to_dbm(e, c.d.omega_r + det), 2.0 * std::numbers::pi * u(rng)};
    return c;
}

} // namespace testcases
