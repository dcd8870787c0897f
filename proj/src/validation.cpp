#include "fblab/validation.hpp"

#include "fblab/errors.hpp"
#include "fblab/parallel.hpp"
#include "fblab/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace fblab {

namespace {

// Additive recurrence with the generalised golden ratio (Roberts' R_D
// sequence): point i has coordinates frac(shift_j + (i + 1) alpha_j).
class KroneckerSequence {
public:
    KroneckerSequence(int dim, std::uint64_t seed) : alpha_(dim), shift_(dim) {
        double phi = 2.0;
        for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
        for (int j = 0; j < dim; ++j) {
            alpha_[j] = std::fmod(std::pow(1.0 / phi, j + 1), 1.0);
            shift_[j] = static_cast<double>(splitmix64(seed ^ (0x5DEECE66Dull * (j + 1))) >> 11) * 0x1.0p-53;
        }
    }

    double coordinate(std::size_t i, int j) const {
        const double v = shift_[j] + static_cast<double>(i + 1) * alpha_[j];
        return v - std::floor(v);
    }

private:
    std::vector<double> alpha_;
    std::vector<double> shift_;
};

struct Candidate {
    double value = 0.0;
    bool set = false;
    std::vector<std::pair<std::string, double>> witness;
};

struct ProbeResult {
    bool domain_error = false;
    std::string domain_message;
    std::array<double, 4> quotient{};  // f, g, sigma, h
    std::array<double, 4> growth{};
    double min_eigen = std::numeric_limits<double>::infinity();
    double sigma_norm = 0.0;
    double h_norm = 0.0;
    bool inside_half_box = false;
};

constexpr std::array<const char*, 4> kNames{"f", "g", "sigma", "h"};

std::vector<std::pair<std::string, double>> label(const VariableLayout& layout, const std::vector<double>& p,
                                                  const std::vector<double>* q, CoefficientKind kind) {
    std::vector<std::pair<std::string, double>> out;
    for (int s = 0; s < layout.size(); ++s) {
        if (!layout.allowed(s, kind)) continue;
        out.emplace_back(layout.name(s), p[static_cast<std::size_t>(s)]);
    }
    if (q) {
        for (int s = 1; s < layout.size(); ++s) {
            if (!layout.allowed(s, kind)) continue;
            out.emplace_back(layout.name(s) + "'", (*q)[static_cast<std::size_t>(s)]);
        }
    }
    return out;
}

// Norms over the argument blocks a coefficient kind may read.
struct ArgNorms {
    double x = 0.0, y = 0.0, z = 0.0;
};

ArgNorms arg_norms(const VariableLayout& L, const std::vector<double>& p, const std::vector<double>& q) {
    ArgNorms n;
    for (int i = 0; i < L.d; ++i) n.x += std::pow(p[L.x_slot(i)] - q[L.x_slot(i)], 2);
    for (int i = 0; i < L.k; ++i) n.y += std::pow(p[L.y_slot(i)] - q[L.y_slot(i)], 2);
    for (int r = 0; r < L.k; ++r)
        for (int c = 0; c < L.d; ++c) n.z += std::pow(p[L.z_slot(r, c)] - q[L.z_slot(r, c)], 2);
    n.x = std::sqrt(n.x);
    n.y = std::sqrt(n.y);
    n.z = std::sqrt(n.z);
    return n;
}

// Which argument blocks a coefficient reads. The difference quotient divides
// by these blocks only, so a map of x alone is not diluted by changes in y.
struct Blocks {
    bool x = false, y = false, z = false;
};

Blocks read_blocks(const std::vector<Expression>& exprs, const VariableLayout& L) {
    Blocks b;
    for (const auto& e : exprs)
        for (const auto& node : e.nodes()) {
            if (node.op != Op::Var || node.slot == VariableLayout::t_slot()) continue;
            if (node.slot < L.y_slot(0)) b.x = true;
            else if (node.slot < L.z_slot(0, 0)) b.y = true;
            else b.z = true;
        }
    return b;
}

double relevant(const ArgNorms& n, const Blocks& b) {
    return (b.x ? n.x : 0.0) + (b.y ? n.y : 0.0) + (b.z ? n.z : 0.0);
}

// Growth is measured against the full argument list the kind may read.
double relevant(const ArgNorms& n, CoefficientKind kind) {
    switch (kind) {
        case CoefficientKind::Drift:
        case CoefficientKind::Diffusion: return n.x + n.y;
        case CoefficientKind::Driver: return n.x + n.y + n.z;
        case CoefficientKind::Terminal: return n.x;
    }
    return 0.0;
}

double eval_norm(const std::vector<Expression>& exprs, const std::vector<double>& slots, Eigen::VectorXd* out) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(exprs.size()));
    for (std::size_t i = 0; i < exprs.size(); ++i) v[static_cast<Eigen::Index>(i)] = exprs[i].evaluate(slots);
    if (out) *out = v;
    return v.norm();
}

}  // namespace

ValidationReport validate(const ProblemSpec& spec, const ProbeConfig& config) {
    if (config.probe_budget < 100) throw input_error("probe_budget must be at least 100");
    if (!(config.box_radius > 0.0)) throw input_error("box_radius must be positive");

    const VariableLayout& L = spec.layout();
    const int free_dims = L.size() - 1;
    const KroneckerSequence seq(1 + 2 * free_dims, config.probe_seed);
    const double R = config.box_radius;
    const std::array<const std::vector<Expression>*, 4> coeffs{&spec.f(), &spec.g(), &spec.sigma(), &spec.h()};
    const std::array<CoefficientKind, 4> kinds{CoefficientKind::Drift, CoefficientKind::Driver,
                                               CoefficientKind::Diffusion, CoefficientKind::Terminal};
    std::array<Blocks, 4> blocks;
    for (std::size_t c = 0; c < 4; ++c) blocks[c] = read_blocks(*coeffs[c], L);

    auto make_points = [&](std::size_t i) {
        std::vector<double> p(static_cast<std::size_t>(L.size())), q(p.size());
        p[0] = q[0] = spec.t0() + seq.coordinate(i, 0) * spec.horizon();
        for (int j = 0; j < free_dims; ++j) {
            p[static_cast<std::size_t>(j + 1)] = R * (2.0 * seq.coordinate(i, 1 + j) - 1.0);
            q[static_cast<std::size_t>(j + 1)] = R * (2.0 * seq.coordinate(i, 1 + free_dims + j) - 1.0);
        }
        return std::pair{p, q};
    };

    const auto n = static_cast<std::size_t>(config.probe_budget);
    std::vector<ProbeResult> results(n);
    parallel_for(n, [&](std::size_t i) {
        auto [p, q] = make_points(i);
        ProbeResult& r = results[i];
        try {
            const ArgNorms diff = arg_norms(L, p, q);
            const std::vector<double> origin(p.size(), 0.0);
            std::vector<double> p_no_t = p;
            p_no_t[0] = 0.0;
            const ArgNorms size = arg_norms(L, p_no_t, origin);
            for (std::size_t c = 0; c < 4; ++c) {
                Eigen::VectorXd fp, fq;
                const double np = eval_norm(*coeffs[c], p, &fp);
                eval_norm(*coeffs[c], q, &fq);
                const double denom = relevant(diff, blocks[c]);
                r.quotient[c] = denom > 1e-12 ? (fp - fq).norm() / denom : 0.0;
                r.growth[c] = np / (1.0 + relevant(size, kinds[c]));
            }
            Eigen::VectorXd sig;
            r.sigma_norm = eval_norm(spec.sigma(), p, &sig);
            r.h_norm = eval_norm(spec.h(), p, nullptr);
            const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> S(
                sig.data(), L.d, L.d);
            const Eigen::MatrixXd a = S * S.transpose();
            r.min_eigen = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()[0];
            r.inside_half_box = true;
            for (int j = 1; j < L.size(); ++j)
                if (std::abs(p[static_cast<std::size_t>(j)]) > 0.5 * R) r.inside_half_box = false;
        } catch (const DomainError& e) {
            r.domain_error = true;
            r.domain_message = e.what();
        }
    });

    ValidationReport report;
    report.probe_points = config.probe_budget;
    std::array<Candidate, 4> worst_quotient, worst_growth;
    Candidate min_eigen, sup_sigma, sup_h;
    double sup_sigma_half = 0.0, sup_h_half = 0.0;
    bool domain_recorded = false;

    for (std::size_t i = 0; i < n; ++i) {
        const ProbeResult& r = results[i];
        if (r.domain_error) {
            if (!domain_recorded) {
                auto [p, q] = make_points(i);
                report.violations.push_back({"domain", "", 0.0, label(L, p, &q, CoefficientKind::Driver)});
                domain_recorded = true;
            }
            continue;
        }
        for (std::size_t c = 0; c < 4; ++c) {
            if (!worst_quotient[c].set || r.quotient[c] > worst_quotient[c].value) {
                worst_quotient[c].value = r.quotient[c];
                worst_quotient[c].set = true;
                worst_quotient[c].witness.clear();
                worst_quotient[c].witness.emplace_back("#", static_cast<double>(i));
            }
            if (!worst_growth[c].set || r.growth[c] > worst_growth[c].value) {
                worst_growth[c].value = r.growth[c];
                worst_growth[c].set = true;
                worst_growth[c].witness.assign(1, {"#", static_cast<double>(i)});
            }
        }
        if (!min_eigen.set || r.min_eigen < min_eigen.value) {
            min_eigen = {r.min_eigen, true, {{"#", static_cast<double>(i)}}};
        }
        if (!sup_sigma.set || r.sigma_norm > sup_sigma.value) sup_sigma = {r.sigma_norm, true, {{"#", static_cast<double>(i)}}};
        if (!sup_h.set || r.h_norm > sup_h.value) sup_h = {r.h_norm, true, {{"#", static_cast<double>(i)}}};
        if (r.inside_half_box) {
            sup_sigma_half = std::max(sup_sigma_half, r.sigma_norm);
            sup_h_half = std::max(sup_h_half, r.h_norm);
        }
    }

    // Witnesses were recorded as probe indices; expand them into labelled points.
    auto expand = [&](const Candidate& c, CoefficientKind kind, bool pair) {
        const auto i = static_cast<std::size_t>(c.witness.front().second);
        auto [p, q] = make_points(i);
        return label(L, p, pair ? &q : nullptr, kind);
    };

    for (std::size_t c = 0; c < 4; ++c) {
        if (!worst_quotient[c].set) continue;
        report.lipschitz_by_coefficient[kNames[c]] = worst_quotient[c].value;
        report.growth_by_coefficient[kNames[c]] = worst_growth[c].value;
        report.L_hat = std::max(report.L_hat, worst_quotient[c].value);
        report.Lambda_hat = std::max(report.Lambda_hat, worst_growth[c].value);
        if (worst_quotient[c].value > config.lipschitz_cap)
            report.violations.push_back({"A.1", kNames[c], worst_quotient[c].value, expand(worst_quotient[c], kinds[c], true)});
        if (worst_growth[c].value > config.lipschitz_cap)
            report.violations.push_back({"A.3", kNames[c], worst_growth[c].value, expand(worst_growth[c], kinds[c], false)});
    }

    if (min_eigen.set) {
        report.lambda_hat = min_eigen.value;
        if (min_eigen.value <= 1e-12)
            report.violations.push_back({"B.2", "sigma", min_eigen.value, expand(min_eigen, CoefficientKind::Diffusion, false)});
    }
    // Bounded when doubling the box radius does not grow the sampled supremum by more than 10%.
    auto bounded = [](double full, double half) { return full <= 1e-300 || full <= 1.1 * half; };
    // Unboundedness is reported through the flags only; affine terminal data is common and legitimate.
    if (sup_sigma.set) report.bounded_sigma = bounded(sup_sigma.value, sup_sigma_half);
    if (sup_h.set) report.bounded_h = bounded(sup_h.value, sup_h_half);
    return report;
}

}  // namespace fblab
