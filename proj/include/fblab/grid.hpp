#pragma once

#include "fblab/errors.hpp"

#include <cmath>
#include <string>

namespace fblab {

/// Uniform partition t0 = s_0 < ... < s_n = T.
class TimeGrid {
public:
    TimeGrid(double t0, double T, int n_steps) : t0_(t0), T_(T), n_(n_steps) {
        if (n_steps < 1) throw input_error("time grid needs at least one step");
        if (!(T - t0 > 0.0) || !std::isfinite(T - t0)) throw input_error("time grid needs T > t0");
    }

    double t0() const { return t0_; }
    double T() const { return T_; }
    int n_steps() const { return n_; }
    int n_nodes() const { return n_ + 1; }
    double dt() const { return (T_ - t0_) / n_; }
    /// Node m; the last node is T exactly.
    double node(int m) const { return m == n_ ? T_ : t0_ + m * dt(); }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double t0_;
    double T_;
    int n_;
};

/// Uniform 1-D mesh x_min = x_0 < ... < x_N = x_max (N = n_cells).
class SpatialGrid {
public:
    SpatialGrid(double x_min, double x_max, int n_cells) : lo_(x_min), hi_(x_max), n_(n_cells) {
        if (n_cells < 2) throw input_error("spatial grid needs at least two cells");
        if (!(x_max > x_min) || !std::isfinite(x_max - x_min)) throw input_error("spatial grid needs x_min < x_max");
    }

    double x_min() const { return lo_; }
    double x_max() const { return hi_; }
    int n_cells() const { return n_; }
    int n_nodes() const { return n_ + 1; }
    double width() const { return hi_ - lo_; }
    double dx() const { return (hi_ - lo_) / n_; }
    double node(int j) const { return j == n_ ? hi_ : lo_ + j * dx(); }

    /// Fraction of the width kept clear on each side of the working region.
    static constexpr double kMargin = 0.2;

    /// True when x lies at least kMargin * width away from both ends.
    bool in_working_region(double x) const {
        const double m = kMargin * width();
        return x >= lo_ + m - 1e-12 * width() && x <= hi_ - m + 1e-12 * width();
    }

    /// Throws unless x0 lies in the working region.
    void require_margin(double x0) const {
        if (!in_working_region(x0)) {
            throw input_error("start point " + std::to_string(x0) + " is not inside the 20% margin of [" +
                              std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
        }
    }

    friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;

private:
    double lo_;
    double hi_;
    int n_;
};

}  // namespace fblab
