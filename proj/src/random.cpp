#include "fblab/random.hpp"

#include <cmath>
#include <numbers>

namespace fblab {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMulA = 0xD2511F53u;
    constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t pa = static_cast<std::uint64_t>(kMulA) * ctr[0];
        const std::uint64_t pb = static_cast<std::uint64_t>(kMulB) * ctr[2];
        const auto hi_a = static_cast<std::uint32_t>(pa >> 32), lo_a = static_cast<std::uint32_t>(pa);
        const auto hi_b = static_cast<std::uint32_t>(pb >> 32), lo_b = static_cast<std::uint32_t>(pb);
        ctr = {hi_b ^ ctr[1] ^ key[0], lo_b, hi_a ^ ctr[3] ^ key[1], lo_a};
        key[0] += kWeylA;
        key[1] += kWeylB;
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

namespace {

// Uniform in (0, 1] with 53 random bits.
double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// One Philox block yields a Box-Muller pair; components 2j and 2j+1 share block j.
std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream, std::uint32_t step, std::uint32_t block) {
    const auto out = philox4x32({step, block, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
                                {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const double u1 = to_unit(out[0], out[1]);
    const double u2 = to_unit(out[2], out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(angle), r * std::sin(angle)};
}

}  // namespace

double RandomSource::normal(std::uint64_t stream, std::uint32_t step, std::uint32_t component) const {
    return normal_pair(seed_, stream, step, component / 2)[component % 2];
}

void RandomSource::normals(std::uint64_t stream, std::uint32_t step, Eigen::Ref<Eigen::VectorXd> out) const {
    for (Eigen::Index c = 0; c < out.size(); c += 2) {
        const auto pair = normal_pair(seed_, stream, step, static_cast<std::uint32_t>(c / 2));
        out[c] = pair[0];
        if (c + 1 < out.size()) out[c + 1] = pair[1];
    }
}

Eigen::MatrixXd brownian_increments(const RandomSource& src, std::uint64_t stream, const TimeGrid& grid, int d) {
    Eigen::MatrixXd inc(grid.n_steps(), d);
    Eigen::VectorXd z(d);
    const double scale = std::sqrt(grid.dt());
    for (int m = 0; m < grid.n_steps(); ++m) {
        src.normals(stream, static_cast<std::uint32_t>(m), z);
        inc.row(m) = scale * z.transpose();
    }
    return inc;
}

}  // namespace fblab
