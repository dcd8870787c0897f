#pragma once

#include "fblab/problem.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fblab {

struct ProbeConfig {
    int probe_budget = 10000;
    double box_radius = 5.0;
    /// Difference quotients or growth ratios above this certify a violation.
    double lipschitz_cap = 1e6;
    std::uint64_t probe_seed = 0;
};

/// A sampled point at which an assumption failed. Second points of a pair are
/// suffixed with a prime, e.g. "x1'".
struct Violation {
    std::string assumption;   ///< "A.1", "A.3", "B.2", or "domain"
    std::string coefficient;  ///< "f", "g", "sigma", "h"
    double value = 0.0;       ///< offending quotient / ratio / eigenvalue
    std::vector<std::pair<std::string, double>> witness;
};

/// Empirical constants of the Lipschitz / growth / ellipticity assumptions on
/// the box [-R, R]^dim x [t0, T]. Nothing here is a proof.
struct ValidationReport {
    double L_hat = 0.0;       ///< max sampled difference quotient over all coefficients
    double Lambda_hat = 0.0;  ///< max sampled |value| / (1 + |args|)
    std::optional<double> lambda_hat;  ///< min sampled eigenvalue of sigma sigma^T
    bool bounded_sigma = true;
    bool bounded_h = true;
    int probe_points = 0;
    std::map<std::string, double> lipschitz_by_coefficient;
    std::map<std::string, double> growth_by_coefficient;
    std::vector<Violation> violations;
};

/// Probes the coefficients of `spec` with `probe_budget` low-discrepancy point
/// pairs. Report-only: never throws for failed assumptions.
ValidationReport validate(const ProblemSpec& spec, const ProbeConfig& config = {});

}  // namespace fblab
