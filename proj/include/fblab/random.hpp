#pragma once

#include "fblab/grid.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>

namespace fblab {

/// Philox4x32-10 block cipher (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Maps a 128-bit counter and 64-bit key to 128 bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// SplitMix64 finaliser; used for seeding shifts, not for sampling paths.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based source of Gaussian increments. The value for
/// (stream, step, component) depends on nothing else, so ensembles are
/// reproducible under any parallel schedule or ensemble size.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t master_seed) : seed_(master_seed) {}

    std::uint64_t master_seed() const { return seed_; }

    /// Standard normal for (stream, step, component).
    double normal(std::uint64_t stream, std::uint32_t step, std::uint32_t component) const;

    /// Fills `out` with standard normals for components 0..out.size()-1.
    void normals(std::uint64_t stream, std::uint32_t step, Eigen::Ref<Eigen::VectorXd> out) const;

private:
    std::uint64_t seed_;
};

/// n_steps x d matrix of Brownian increments, each component N(0, dt).
Eigen::MatrixXd brownian_increments(const RandomSource& src, std::uint64_t stream, const TimeGrid& grid, int d);

}  // namespace fblab
