#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace etsim {

using Int = std::int64_t;

// All user-facing failures derive from this; the CLI maps it to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExprKind { Constant, Symbol, Add, Mul, FloorDiv, Mod, Min, Max };

class SymExpr;
using ExprPtr = std::shared_ptr<const SymExpr>;

// Immutable integer expression tree over named symbols. Division is floor
// division; negative values are rejected during evaluation (shapes and index
// maps are nonnegative by construction).
class SymExpr {
public:
    static ExprPtr constant(Int v);
    static ExprPtr symbol(std::string name);
    static ExprPtr make(ExprKind k, ExprPtr lhs, ExprPtr rhs);

    ExprKind kind() const { return kind_; }
    Int value() const { return value_; }
    const std::string& name() const { return name_; }
    const ExprPtr& lhs() const { return lhs_; }
    const ExprPtr& rhs() const { return rhs_; }

    std::string to_string() const;

private:
    SymExpr() = default;
    ExprKind kind_ = ExprKind::Constant;
    Int value_ = 0;
    std::string name_;
    ExprPtr lhs_, rhs_;
};

// Convenience builders.
ExprPtr operator+(ExprPtr a, ExprPtr b);
ExprPtr operator*(ExprPtr a, ExprPtr b);
ExprPtr floordiv(ExprPtr a, ExprPtr b);
ExprPtr mod(ExprPtr a, ExprPtr b);
ExprPtr emin(ExprPtr a, ExprPtr b);
ExprPtr emax(ExprPtr a, ExprPtr b);

using ShapeBinding = std::map<std::string, Int>;

// Evaluates expr under binding. Throws Error on unbound symbols, division or
// modulo by zero, and any negative intermediate or final value.
Int eval_expr(const SymExpr& expr, const ShapeBinding& binding);
Int eval_expr(const ExprPtr& expr, const ShapeBinding& binding);

std::set<std::string> free_symbols(const SymExpr& expr);
std::set<std::string> free_symbols(const ExprPtr& expr);

// Parses the textual grammar: nonneg integers, identifiers, + * // %,
// min(a,b), max(a,b), parentheses. '*' and '//' and '%' bind tighter than '+'.
// Throws Error with position info on malformed input.
ExprPtr parse_expr(std::string_view text);

std::string binding_to_string(const ShapeBinding& b);

}  // namespace etsim
