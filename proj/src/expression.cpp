#include "fblab/expression.hpp"

#include "fblab/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cctype>

namespace fblab {

std::string_view to_string(CoefficientKind kind) {
    switch (kind) {
        case CoefficientKind::Drift: return "f";
        case CoefficientKind::Driver: return "g";
        case CoefficientKind::Diffusion: return "sigma";
        case CoefficientKind::Terminal: return "h";
    }
    return "?";
}

bool VariableLayout::allowed(int slot, CoefficientKind kind) const {
    if (slot < 0 || slot >= size()) return false;
    const bool is_t = slot == 0;
    const bool is_x = slot >= 1 && slot < 1 + d;
    const bool is_y = slot >= 1 + d && slot < 1 + d + k;
    const bool is_z = slot >= 1 + d + k;
    switch (kind) {
        case CoefficientKind::Drift:
        case CoefficientKind::Diffusion: return is_t || is_x || is_y;
        case CoefficientKind::Driver: return is_t || is_x || is_y || is_z;
        case CoefficientKind::Terminal: return is_x;
    }
    return false;
}

std::string VariableLayout::name(int slot) const {
    if (slot == 0) return "t";
    if (slot < 1 + d) return "x" + std::to_string(slot);
    if (slot < 1 + d + k) return "y" + std::to_string(slot - d);
    const int z = slot - 1 - d - k;
    const int row = z / d + 1;
    const int col = z % d + 1;
    if (row < 10 && col < 10) return "z" + std::to_string(row) + std::to_string(col);
    return "z" + std::to_string(row) + "_" + std::to_string(col);
}

namespace {

bool parse_index(std::string_view digits, int& out) {
    if (digits.empty()) return false;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
    return ec == std::errc() && ptr == digits.data() + digits.size() && out >= 1;
}

}  // namespace

int VariableLayout::lookup(std::string_view name) const {
    if (name == "t") return 0;
    if (name.size() < 2) return -1;
    const char head = name.front();
    const std::string_view rest = name.substr(1);
    int i = 0;
    if (head == 'x' && parse_index(rest, i)) return i <= d ? x_slot(i - 1) : -1;
    if (head == 'y' && parse_index(rest, i)) return i <= k ? y_slot(i - 1) : -1;
    if (head == 'z') {
        int row = 0, col = 0;
        if (auto sep = rest.find('_'); sep != std::string_view::npos) {
            if (!parse_index(rest.substr(0, sep), row) || !parse_index(rest.substr(sep + 1), col))
                return -1;
        } else if (rest.size() == 2 && std::isdigit(rest[0]) && std::isdigit(rest[1])) {
            row = rest[0] - '0';
            col = rest[1] - '0';
        } else {
            return -1;
        }
        if (row < 1 || col < 1 || row > k || col > d) return -1;
        return z_slot(row - 1, col - 1);
    }
    return -1;
}

Expression::Expression(std::vector<Node> nodes, VariableLayout layout, CoefficientKind kind)
    : nodes_(std::move(nodes)), layout_(layout), kind_(kind) {}

namespace {

double apply(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;
        case Op::Neg: return -a;
        case Op::Sin: return std::sin(a);
        case Op::Cos: return std::cos(a);
        case Op::Exp: return std::exp(a);
        case Op::Tanh: return std::tanh(a);
        case Op::Abs: return std::abs(a);
        case Op::Sqrt: return std::sqrt(a);
        case Op::Min: return std::min(a, b);
        case Op::Max: return std::max(a, b);
        default: return a;
    }
}

}  // namespace

double Expression::evaluate(std::span<const double> slots) const {
    // Single-leaf expressions ("0", "y1") dominate the bundled scenarios.
    if (nodes_.size() == 1) {
        const Node& n = nodes_[0];
        if (n.op == Op::Const) return n.value;
        if (n.op == Op::Var) {
            const double v = slots[static_cast<std::size_t>(n.slot)];
            if (!std::isfinite(v))
                throw DomainError("non-finite value while evaluating " + std::string(to_string(kind_)) + " = " + print());
            return v;
        }
    }
    constexpr std::size_t kStack = 128;
    std::array<double, kStack> local;  // deliberately uninitialised
    std::vector<double> heap;
    double* values = local.data();
    if (nodes_.size() > kStack) {
        heap.resize(nodes_.size());
        values = heap.data();
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        double v;
        if (n.op == Op::Const) {
            v = n.value;
        } else if (n.op == Op::Var) {
            v = slots[static_cast<std::size_t>(n.slot)];
        } else {
            const double a = values[n.lhs];
            const double b = n.rhs >= 0 ? values[n.rhs] : 0.0;
            v = apply(n.op, a, b);
        }
        if (!std::isfinite(v)) {
            throw DomainError("non-finite value while evaluating " + std::string(to_string(kind_)) +
                              " = " + print());
        }
        values[i] = v;
    }
    return nodes_.empty() ? 0.0 : values[nodes_.size() - 1];
}

bool Expression::is_constant() const {
    for (const Node& n : nodes_)
        if (n.op == Op::Var) return false;
    return true;
}

namespace {

std::string_view function_name(Op op) {
    switch (op) {
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Tanh: return "tanh";
        case Op::Abs: return "abs";
        case Op::Sqrt: return "sqrt";
        case Op::Min: return "min";
        case Op::Max: return "max";
        default: return "";
    }
}

std::string format_literal(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

void print_node(const std::vector<Expression::Node>& nodes, int i, const VariableLayout& layout,
                std::string& out) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    switch (n.op) {
        case Op::Const: out += format_literal(n.value); return;
        case Op::Var: out += layout.name(n.slot); return;
        case Op::Neg:
            // "(-(a))" keeps a negated literal distinct from a negative literal.
            out += "(-(";
            print_node(nodes, n.lhs, layout, out);
            out += "))";
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const char sym = n.op == Op::Add ? '+' : n.op == Op::Sub ? '-' : n.op == Op::Mul ? '*' : '/';
            out += '(';
            print_node(nodes, n.lhs, layout, out);
            out += ' ';
            out += sym;
            out += ' ';
            print_node(nodes, n.rhs, layout, out);
            out += ')';
            return;
        }
        default:
            out += function_name(n.op);
            out += '(';
            print_node(nodes, n.lhs, layout, out);
            if (n.rhs >= 0) {
                out += ", ";
                print_node(nodes, n.rhs, layout, out);
            }
            out += ')';
            return;
    }
}

bool equal_nodes(const Expression& a, int i, const Expression& b, int j) {
    const auto& x = a.nodes()[static_cast<std::size_t>(i)];
    const auto& y = b.nodes()[static_cast<std::size_t>(j)];
    if (x.op != y.op) return false;
    if (x.op == Op::Const)
        return x.value == y.value && std::signbit(x.value) == std::signbit(y.value);
    if (x.op == Op::Var) return x.slot == y.slot;
    if ((x.lhs >= 0) != (y.lhs >= 0) || (x.rhs >= 0) != (y.rhs >= 0)) return false;
    if (x.lhs >= 0 && !equal_nodes(a, x.lhs, b, y.lhs)) return false;
    if (x.rhs >= 0 && !equal_nodes(a, x.rhs, b, y.rhs)) return false;
    return true;
}

class Parser {
public:
    Parser(std::string_view src, CoefficientKind kind, VariableLayout layout)
        : src_(src), kind_(kind), layout_(layout) {}

    Expression run() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        expression();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError("unexpected character '" + std::string(1, src_[pos_]) + "'", pos_);
        return Expression(std::move(nodes_), layout_, kind_);
    }

private:
    int push(Expression::Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            const std::string found = pos_ < src_.size() ? std::string(1, src_[pos_]) : "end of input";
            throw ParseError("expected '" + std::string(1, c) + "' but found " + found, pos_);
        }
    }

    int expression() {
        int lhs = term();
        for (;;) {
            if (accept('+')) {
                const int rhs = term();
                lhs = push({Op::Add, 0.0, -1, lhs, rhs});
            } else if (accept('-')) {
                const int rhs = term();
                lhs = push({Op::Sub, 0.0, -1, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int term() {
        int lhs = unary();
        for (;;) {
            if (accept('*')) {
                const int rhs = unary();
                lhs = push({Op::Mul, 0.0, -1, lhs, rhs});
            } else if (accept('/')) {
                const int rhs = unary();
                lhs = push({Op::Div, 0.0, -1, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int unary() {
        skip_ws();
        if (accept('-')) {
            skip_ws();
            // A minus directly in front of a literal is part of the literal.
            if (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
                return number(true);
            const int child = unary();
            return push({Op::Neg, 0.0, -1, child, -1});
        }
        if (accept('+')) return unary();
        return primary();
    }

    int number(bool negative) {
        const std::size_t start = pos_;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v);
        if (ec != std::errc() || !std::isfinite(v)) throw ParseError("malformed number", start);
        pos_ = static_cast<std::size_t>(ptr - src_.data());
        return push({Op::Const, negative ? -v : v, -1, -1, -1});
    }

    int primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            const int inner = expression();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(false);
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            const std::string_view ident = src_.substr(start, pos_ - start);
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == '(') return call(ident, start);
            const int slot = layout_.lookup(ident);
            if (slot < 0 || !layout_.allowed(slot, kind_)) {
                throw ParseError("unknown variable '" + std::string(ident) + "' for " +
                                     std::string(to_string(kind_)),
                                 start);
            }
            return push({Op::Var, 0.0, slot, -1, -1});
        }
        throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
    }

    int call(std::string_view name, std::size_t at) {
        struct Fn {
            std::string_view name;
            Op op;
            int arity;
        };
        static constexpr std::array<Fn, 8> table{{{"sin", Op::Sin, 1},
                                                  {"cos", Op::Cos, 1},
                                                  {"exp", Op::Exp, 1},
                                                  {"tanh", Op::Tanh, 1},
                                                  {"abs", Op::Abs, 1},
                                                  {"sqrt", Op::Sqrt, 1},
                                                  {"min", Op::Min, 2},
                                                  {"max", Op::Max, 2}}};
        for (const Fn& fn : table) {
            if (fn.name != name) continue;
            expect('(');
            const int a = expression();
            int b = -1;
            if (fn.arity == 2) {
                expect(',');
                b = expression();
            }
            expect(')');
            return push({fn.op, 0.0, -1, a, b});
        }
        throw ParseError("unknown function '" + std::string(name) + "'", at);
    }

    std::string_view src_;
    CoefficientKind kind_;
    VariableLayout layout_;
    std::size_t pos_ = 0;
    std::vector<Expression::Node> nodes_;
};

}  // namespace

std::string Expression::print() const {
    std::string out;
    if (!nodes_.empty()) print_node(nodes_, static_cast<int>(nodes_.size()) - 1, layout_, out);
    return out;
}

bool structurally_equal(const Expression& a, const Expression& b) {
    if (a.empty() || b.empty()) return a.empty() && b.empty();
    return equal_nodes(a, static_cast<int>(a.nodes().size()) - 1, b, static_cast<int>(b.nodes().size()) - 1);
}

Expression parse(std::string_view source, CoefficientKind kind, VariableLayout layout) {
    return Parser(source, kind, layout).run();
}

double evaluate(const Expression& e, const std::map<std::string, double>& point) {
    std::vector<double> slots(static_cast<std::size_t>(e.layout().size()), 0.0);
    for (const auto& n : e.nodes()) {
        if (n.op != Op::Var) continue;
        const std::string name = e.layout().name(n.slot);
        auto it = point.find(name);
        if (it == point.end()) throw input_error("point does not supply variable '" + name + "'");
        slots[static_cast<std::size_t>(n.slot)] = it->second;
    }
    return e.evaluate(slots);
}

}  // namespace fblab
