#pragma once

#include "fblab/expression.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace fblab {

/// Largest state / backward dimension accepted by ProblemSpec.
inline constexpr int kMaxDimension = 6;

/// Coefficient source text, as it appears in a scenario file.
struct CoefficientText {
    std::vector<std::string> f;                   ///< d entries
    std::vector<std::string> g;                   ///< k entries
    std::vector<std::vector<std::string>> sigma;  ///< d x d, row-major
    std::vector<std::string> h;                   ///< k entries
};

/// One instance of the coupled forward-backward system
///   dX = f(s, X, Y) ds + sqrt(eps) sigma(s, X, Y) dB,   X_t0 = x0
///  -dY = g(s, X, Y, Z) ds - Z dB,                        Y_T  = h(X_T)
class ProblemSpec {
public:
    ProblemSpec(int d, int k, double t0, double T, Eigen::VectorXd x0, std::vector<double> epsilons,
                CoefficientText text);

    int d() const { return layout_.d; }
    int k() const { return layout_.k; }
    double t0() const { return t0_; }
    double T() const { return T_; }
    double horizon() const { return T_ - t0_; }
    const Eigen::VectorXd& x0() const { return x0_; }
    const std::vector<double>& epsilons() const { return epsilons_; }
    const CoefficientText& text() const { return text_; }
    const VariableLayout& layout() const { return layout_; }

    const std::vector<Expression>& f() const { return f_; }
    const std::vector<Expression>& g() const { return g_; }
    const std::vector<Expression>& sigma() const { return sigma_; }  ///< row-major d x d
    const std::vector<Expression>& h() const { return h_; }

    /// Same problem with a different epsilon list (must stay positive and descending).
    ProblemSpec with_epsilons(std::vector<double> epsilons) const;
    /// Same problem started from (t0, x0).
    ProblemSpec with_start(double t0, const Eigen::VectorXd& x0) const;

    // Vector-valued evaluation. z is k x d.
    Eigen::VectorXd drift(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    Eigen::VectorXd driver(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& z) const;
    Eigen::MatrixXd diffusion(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
    Eigen::VectorXd terminal(const Eigen::VectorXd& x) const;

    // Scalar shortcuts for d = k = 1; the hot loops of the 1-D solvers use these.
    double drift1(double t, double x, double y) const;
    double driver1(double t, double x, double y, double z) const;
    double diffusion1(double t, double x, double y) const;
    double terminal1(double x) const;

private:
    VariableLayout layout_;
    double t0_;
    double T_;
    Eigen::VectorXd x0_;
    std::vector<double> epsilons_;
    CoefficientText text_;
    std::vector<Expression> f_, g_, sigma_, h_;
};

/// Throws unless d = k = 1.
void require_scalar_problem(const ProblemSpec& spec, const char* what);

}  // namespace fblab
