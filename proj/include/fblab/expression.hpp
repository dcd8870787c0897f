#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fblab {

/// Which coefficient an expression defines; fixes the admissible variables.
///   Drift     f(t, x, y)
///   Driver    g(t, x, y, z)
///   Diffusion sigma(t, x, y)
///   Terminal  h(x)
enum class CoefficientKind { Drift, Driver, Diffusion, Terminal };

std::string_view to_string(CoefficientKind kind);

/// Slot layout shared by every coefficient of one problem:
/// [t, x1..xd, y1..yk, z11..zkd] with z stored row-major (k rows, d columns).
struct VariableLayout {
    int d = 1;
    int k = 1;

    int size() const { return 1 + d + k + k * d; }
    static constexpr int t_slot() { return 0; }
    int x_slot(int i) const { return 1 + i; }
    int y_slot(int i) const { return 1 + d + i; }
    int z_slot(int row, int col) const { return 1 + d + k + row * d + col; }

    bool allowed(int slot, CoefficientKind kind) const;
    std::string name(int slot) const;
    /// Slot for a variable name, or -1.
    int lookup(std::string_view name) const;
};

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Tanh, Abs, Sqrt, Min, Max };

/// Flat abstract syntax tree. Children always precede their parent, so the
/// root is the last node and evaluation is one forward sweep.
class Expression {
public:
    struct Node {
        Op op = Op::Const;
        double value = 0.0;  // Const
        int slot = -1;       // Var
        int lhs = -1;
        int rhs = -1;
    };

    Expression() = default;
    Expression(std::vector<Node> nodes, VariableLayout layout, CoefficientKind kind);

    const std::vector<Node>& nodes() const { return nodes_; }
    const VariableLayout& layout() const { return layout_; }
    CoefficientKind kind() const { return kind_; }
    bool empty() const { return nodes_.empty(); }

    /// Evaluates at a full slot vector (see VariableLayout). Throws DomainError
    /// when any intermediate value is non-finite.
    double evaluate(std::span<const double> slots) const;

    /// True when the expression reads no variable.
    bool is_constant() const;

    /// Fully parenthesised text that parses back to the same tree.
    std::string print() const;

    friend bool structurally_equal(const Expression& a, const Expression& b);

private:
    std::vector<Node> nodes_;
    VariableLayout layout_;
    CoefficientKind kind_ = CoefficientKind::Drift;
};

/// Parses `source` for the given coefficient kind. Throws ParseError with
/// the offending position on syntax errors and on variables the kind may
/// not read (e.g. z1 inside h).
Expression parse(std::string_view source, CoefficientKind kind, VariableLayout layout = {});

/// Evaluates with named variables, e.g. {{"x1", 2.0}, {"y1", 3.0}}.
/// Every variable the expression reads must be supplied.
double evaluate(const Expression& e, const std::map<std::string, double>& point);

}  // namespace fblab
