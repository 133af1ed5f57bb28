#include "tokdyn/rng.hpp"

#include <cmath>
#include <numbers>

namespace tokdyn {

namespace {

// Box-Muller on one pair of uniforms.
inline void box_muller(double u_open, double u, double& z0, double& z1) {
    const double radius = std::sqrt(-2.0 * std::log(u_open));
    const double angle = 2.0 * std::numbers::pi * u;
    z0 = radius * std::cos(angle);
    z1 = radius * std::sin(angle);
}

}  // namespace

double Stream::normal() {
    if (have_normal_) {
        have_normal_ = false;
        return spare_normal_;
    }
    const double u_open = uniform_open_low();
    const double u = uniform();
    double z0 = 0.0;
    box_muller(u_open, u, z0, spare_normal_);
    have_normal_ = true;
    return z0;
}

void Stream::fill_normal(std::span<double> out) {
    std::size_t i = 0;
    if (have_normal_ && !out.empty()) {
        out[i++] = spare_normal_;
        have_normal_ = false;
    }
    for (; i + 1 < out.size(); i += 2) {
        const double u_open = uniform_open_low();
        const double u = uniform();
        box_muller(u_open, u, out[i], out[i + 1]);
    }
    if (i < out.size()) out[i] = normal();
}

}  // namespace tokdyn
