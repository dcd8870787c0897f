#include "fblab/problem.hpp"

#include "fblab/errors.hpp"

#include <cmath>

namespace fblab {

namespace {

constexpr std::size_t kSlotCapacity = 1 + kMaxDimension + kMaxDimension + kMaxDimension * kMaxDimension;
using Slots = std::array<double, kSlotCapacity>;

std::vector<Expression> parse_all(const std::vector<std::string>& src, CoefficientKind kind,
                                  const VariableLayout& layout, std::size_t expected) {
    if (src.size() != expected) {
        throw input_error(std::string(to_string(kind)) + " needs " + std::to_string(expected) +
                          " entries, got " + std::to_string(src.size()));
    }
    std::vector<Expression> out;
    out.reserve(src.size());
    for (const auto& s : src) {
        try {
            out.push_back(parse(s, kind, layout));
        } catch (const ParseError& e) {
            throw ParseError(std::string(to_string(kind)) + " \"" + s + "\": " + e.what(), e.position());
        }
    }
    return out;
}

void fill_xy(Slots& slots, const VariableLayout& layout, double t, const Eigen::VectorXd& x,
             const Eigen::VectorXd& y) {
    slots[0] = t;
    for (int i = 0; i < layout.d; ++i) slots[layout.x_slot(i)] = x[i];
    for (int i = 0; i < layout.k; ++i) slots[layout.y_slot(i)] = y[i];
}

}  // namespace

ProblemSpec::ProblemSpec(int d, int k, double t0, double T, Eigen::VectorXd x0,
                         std::vector<double> epsilons, CoefficientText text)
    : layout_{d, k}, t0_(t0), T_(T), x0_(std::move(x0)), epsilons_(std::move(epsilons)),
      text_(std::move(text)) {
    if (d < 1 || k < 1 || d > kMaxDimension || k > kMaxDimension)
        throw input_error("dimensions must satisfy 1 <= d, k <= " + std::to_string(kMaxDimension));
    if (!std::isfinite(t0) || !std::isfinite(T) || !(T - t0 > 0.0))
        throw input_error("horizon must satisfy T > t0");
    if (x0_.size() != d) throw input_error("x0 must have d entries");
    if (!x0_.allFinite()) throw input_error("x0 must be finite");
    for (std::size_t i = 0; i < epsilons_.size(); ++i) {
        if (!(epsilons_[i] > 0.0) || !std::isfinite(epsilons_[i]))
            throw input_error("every epsilon must be positive and finite");
        if (i > 0 && !(epsilons_[i] < epsilons_[i - 1]))
            throw input_error("epsilons must be strictly descending");
    }
    f_ = parse_all(text_.f, CoefficientKind::Drift, layout_, static_cast<std::size_t>(d));
    g_ = parse_all(text_.g, CoefficientKind::Driver, layout_, static_cast<std::size_t>(k));
    h_ = parse_all(text_.h, CoefficientKind::Terminal, layout_, static_cast<std::size_t>(k));
    if (text_.sigma.size() != static_cast<std::size_t>(d))
        throw input_error("sigma needs " + std::to_string(d) + " rows");
    std::vector<std::string> flat;
    for (const auto& row : text_.sigma) {
        if (row.size() != static_cast<std::size_t>(d))
            throw input_error("sigma rows need " + std::to_string(d) + " entries");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    sigma_ = parse_all(flat, CoefficientKind::Diffusion, layout_, static_cast<std::size_t>(d * d));
}

ProblemSpec ProblemSpec::with_epsilons(std::vector<double> epsilons) const {
    return ProblemSpec(d(), k(), t0_, T_, x0_, std::move(epsilons), text_);
}

ProblemSpec ProblemSpec::with_start(double t0, const Eigen::VectorXd& x0) const {
    return ProblemSpec(d(), k(), t0, T_, x0, epsilons_, text_);
}

Eigen::VectorXd ProblemSpec::drift(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    Slots slots{};
    fill_xy(slots, layout_, t, x, y);
    Eigen::VectorXd out(d());
    for (int i = 0; i < d(); ++i) out[i] = f_[static_cast<std::size_t>(i)].evaluate(slots);
    return out;
}

Eigen::VectorXd ProblemSpec::driver(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& z) const {
    Slots slots{};
    fill_xy(slots, layout_, t, x, y);
    for (int r = 0; r < k(); ++r)
        for (int c = 0; c < d(); ++c) slots[layout_.z_slot(r, c)] = z(r, c);
    Eigen::VectorXd out(k());
    for (int i = 0; i < k(); ++i) out[i] = g_[static_cast<std::size_t>(i)].evaluate(slots);
    return out;
}

Eigen::MatrixXd ProblemSpec::diffusion(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    Slots slots{};
    fill_xy(slots, layout_, t, x, y);
    Eigen::MatrixXd out(d(), d());
    for (int r = 0; r < d(); ++r)
        for (int c = 0; c < d(); ++c) out(r, c) = sigma_[static_cast<std::size_t>(r * d() + c)].evaluate(slots);
    return out;
}

Eigen::VectorXd ProblemSpec::terminal(const Eigen::VectorXd& x) const {
    Slots slots{};
    for (int i = 0; i < d(); ++i) slots[layout_.x_slot(i)] = x[i];
    Eigen::VectorXd out(k());
    for (int i = 0; i < k(); ++i) out[i] = h_[static_cast<std::size_t>(i)].evaluate(slots);
    return out;
}

double ProblemSpec::drift1(double t, double x, double y) const {
    const std::array<double, 4> slots{t, x, y, 0.0};
    return f_[0].evaluate(slots);
}

double ProblemSpec::driver1(double t, double x, double y, double z) const {
    const std::array<double, 4> slots{t, x, y, z};
    return g_[0].evaluate(slots);
}

double ProblemSpec::diffusion1(double t, double x, double y) const {
    const std::array<double, 4> slots{t, x, y, 0.0};
    return sigma_[0].evaluate(slots);
}

double ProblemSpec::terminal1(double x) const {
    const std::array<double, 4> slots{0.0, x, 0.0, 0.0};
    return h_[0].evaluate(slots);
}

void require_scalar_problem(const ProblemSpec& spec, const char* what) {
    if (spec.d() != 1 || spec.k() != 1)
        throw input_error(std::string(what) + " supports d = k = 1 only (got d = " + std::to_string(spec.d()) +
                          ", k = " + std::to_string(spec.k()) + ")");
}

}  // namespace fblab
