#include "etsim/symexpr.hpp"

#include <cctype>
#include <sstream>

namespace etsim {

ExprPtr SymExpr::constant(Int v) {
    auto e = std::shared_ptr<SymExpr>(new SymExpr());
    e->kind_ = ExprKind::Constant;
    e->value_ = v;
    return e;
}

ExprPtr SymExpr::symbol(std::string name) {
    auto e = std::shared_ptr<SymExpr>(new SymExpr());
    e->kind_ = ExprKind::Symbol;
    e->name_ = std::move(name);
    return e;
}

ExprPtr SymExpr::make(ExprKind k, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::shared_ptr<SymExpr>(new SymExpr());
    e->kind_ = k;
    e->lhs_ = std::move(lhs);
    e->rhs_ = std::move(rhs);
    return e;
}

ExprPtr operator+(ExprPtr a, ExprPtr b) { return SymExpr::make(ExprKind::Add, std::move(a), std::move(b)); }
ExprPtr operator*(ExprPtr a, ExprPtr b) { return SymExpr::make(ExprKind::Mul, std::move(a), std::move(b)); }
ExprPtr floordiv(ExprPtr a, ExprPtr b) { return SymExpr::make(ExprKind::FloorDiv, std::move(a), std::move(b)); }
ExprPtr mod(ExprPtr a, ExprPtr b) { return SymExpr::make(ExprKind::Mod, std::move(a), std::move(b)); }
ExprPtr emin(ExprPtr a, ExprPtr b) { return SymExpr::make(ExprKind::Min, std::move(a), std::move(b)); }
ExprPtr emax(ExprPtr a, ExprPtr b) { return SymExpr::make(ExprKind::Max, std::move(a), std::move(b)); }

std::string SymExpr::to_string() const {
    switch (kind_) {
        case ExprKind::Constant: return std::to_string(value_);
        case ExprKind::Symbol: return name_;
        case ExprKind::Min: return "min(" + lhs_->to_string() + ", " + rhs_->to_string() + ")";
        case ExprKind::Max: return "max(" + lhs_->to_string() + ", " + rhs_->to_string() + ")";
        default: break;
    }
    const char* op = kind_ == ExprKind::Add      ? " + "
                     : kind_ == ExprKind::Mul    ? " * "
                     : kind_ == ExprKind::FloorDiv ? " // "
                                                   : " % ";
    auto wrap = [](const ExprPtr& e) {
        if (e->kind() == ExprKind::Constant || e->kind() == ExprKind::Symbol ||
            e->kind() == ExprKind::Min || e->kind() == ExprKind::Max)
            return e->to_string();
        return "(" + e->to_string() + ")";
    };
    return wrap(lhs_) + op + wrap(rhs_);
}

Int eval_expr(const SymExpr& expr, const ShapeBinding& binding) {
    auto check = [](Int v) {
        if (v < 0) throw Error("expression evaluated to negative value " + std::to_string(v));
        return v;
    };
    switch (expr.kind()) {
        case ExprKind::Constant: return check(expr.value());
        case ExprKind::Symbol: {
            auto it = binding.find(expr.name());
            if (it == binding.end()) throw Error("unbound symbol '" + expr.name() + "'");
            return check(it->second);
        }
        default: break;
    }
    Int a = eval_expr(*expr.lhs(), binding);
    Int b = eval_expr(*expr.rhs(), binding);
    switch (expr.kind()) {
        case ExprKind::Add: return check(a + b);
        case ExprKind::Mul: return check(a * b);
        case ExprKind::FloorDiv:
            if (b == 0) throw Error("division by zero in '" + expr.to_string() + "'");
            return check(a / b);  // operands are nonnegative, so this is floor division
        case ExprKind::Mod:
            if (b == 0) throw Error("modulo by zero in '" + expr.to_string() + "'");
            return check(a % b);
        case ExprKind::Min: return check(a < b ? a : b);
        case ExprKind::Max: return check(a > b ? a : b);
        default: throw Error("corrupt expression node");
    }
}

Int eval_expr(const ExprPtr& expr, const ShapeBinding& binding) {
    if (!expr) throw Error("null expression");
    return eval_expr(*expr, binding);
}

static void collect_symbols(const SymExpr& e, std::set<std::string>& out) {
    switch (e.kind()) {
        case ExprKind::Constant: return;
        case ExprKind::Symbol: out.insert(e.name()); return;
        default:
            collect_symbols(*e.lhs(), out);
            collect_symbols(*e.rhs(), out);
    }
}

std::set<std::string> free_symbols(const SymExpr& expr) {
    std::set<std::string> out;
    collect_symbols(expr, out);
    return out;
}

std::set<std::string> free_symbols(const ExprPtr& expr) {
    if (!expr) return {};
    return free_symbols(*expr);
}

namespace {

// Recursive-descent parser for the expression grammar.
//   expr    := term (('+') term)*
//   term    := factor (('*' | '//' | '%') factor)*
//   factor  := INT | IDENT | 'min' '(' expr ',' expr ')' | 'max' '(' ... ')'
//            | '(' expr ')'
class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    std::string_view text_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) {
        throw Error("parse error at offset " + std::to_string(pos_) + " in '" +
                    std::string(text_) + "': " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(std::string_view tok) {
        skip_ws();
        if (text_.substr(pos_, tok.size()) == tok) {
            // '*' must not swallow the first char of '//' lookalikes; tokens
            // here are unambiguous except '*' vs '//': distinct first chars.
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    ExprPtr expr() {
        ExprPtr e = term();
        while (true) {
            if (eat("+")) {
                e = SymExpr::make(ExprKind::Add, e, term());
            } else {
                return e;
            }
        }
    }

    ExprPtr term() {
        ExprPtr e = factor();
        while (true) {
            skip_ws();
            if (text_.substr(pos_, 2) == "//") {
                pos_ += 2;
                e = SymExpr::make(ExprKind::FloorDiv, e, factor());
            } else if (eat("*")) {
                e = SymExpr::make(ExprKind::Mul, e, factor());
            } else if (eat("%")) {
                e = SymExpr::make(ExprKind::Mod, e, factor());
            } else {
                return e;
            }
        }
    }

    ExprPtr factor() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) return integer();
        if (c == '(') {
            ++pos_;
            ExprPtr e = expr();
            if (!eat(")")) fail("expected ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string id = ident();
            if ((id == "min" || id == "max") && peek() == '(') {
                eat("(");
                ExprPtr a = expr();
                if (!eat(",")) fail("expected ',' in " + id + "()");
                ExprPtr b = expr();
                if (!eat(")")) fail("expected ')' closing " + id + "()");
                return SymExpr::make(id == "min" ? ExprKind::Min : ExprKind::Max, a, b);
            }
            return SymExpr::symbol(id);
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    ExprPtr integer() {
        size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        Int v = 0;
        try {
            v = std::stoll(std::string(text_.substr(start, pos_ - start)));
        } catch (const std::out_of_range&) {
            fail("integer literal out of range");
        }
        return SymExpr::constant(v);
    }

    std::string ident() {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }
};

}  // namespace

ExprPtr parse_expr(std::string_view text) { return Parser(text).parse(); }

std::string binding_to_string(const ShapeBinding& b) {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (const auto& [k, v] : b) {
        if (!first) os << ", ";
        first = false;
        os << k << "=" << v;
    }
    os << "}";
    return os.str();
}

}  // namespace etsim
