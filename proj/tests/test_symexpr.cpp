#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <optional>
#include <random>

#include "etsim/symexpr.hpp"

using namespace etsim;

namespace {

// Independent reference evaluator: post-order linearization run on a value
// stack, sharing no code with eval_expr. Returns nullopt where eval_expr
// would throw (unbound symbol, div/mod by zero, negative value).
std::optional<Int> stack_eval(const ExprPtr& e, const ShapeBinding& b) {
    std::vector<const SymExpr*> order, walk{e.get()};
    while (!walk.empty()) {
        const SymExpr* n = walk.back();
        walk.pop_back();
        order.push_back(n);
        if (n->kind() != ExprKind::Constant && n->kind() != ExprKind::Symbol) {
            walk.push_back(n->lhs().get());
            walk.push_back(n->rhs().get());
        }
    }
    std::vector<Int> stack;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const SymExpr* n = *it;
        Int v = 0;
        switch (n->kind()) {
            case ExprKind::Constant: v = n->value(); break;
            case ExprKind::Symbol: {
                auto f = b.find(n->name());
                if (f == b.end()) return std::nullopt;
                v = f->second;
                break;
            }
            default: {
                Int rhs = stack.back();
                stack.pop_back();
                Int lhs = stack.back();
                stack.pop_back();
                switch (n->kind()) {
                    case ExprKind::Add: v = lhs + rhs; break;
                    case ExprKind::Mul: v = lhs * rhs; break;
                    case ExprKind::FloorDiv:
                        if (rhs == 0) return std::nullopt;
                        v = lhs / rhs;
                        break;
                    case ExprKind::Mod:
                        if (rhs == 0) return std::nullopt;
                        v = lhs % rhs;
                        break;
                    case ExprKind::Min: v = std::min(lhs, rhs); break;
                    case ExprKind::Max: v = std::max(lhs, rhs); break;
                    default: REQUIRE(false);
                }
            }
        }
        if (v < 0) return std::nullopt;
        stack.push_back(v);
    }
    REQUIRE(stack.size() == 1);
    return stack[0];
}

ExprPtr random_expr(std::mt19937_64& rng, int depth) {
    auto pick = [&](Int n) { return static_cast<Int>(rng() % static_cast<uint64_t>(n)); };
    if (depth == 0 || pick(4) == 0) {
        if (pick(2) == 0) return SymExpr::constant(pick(12));
        static const char* syms[] = {"n", "m", "k"};
        return SymExpr::symbol(syms[pick(3)]);
    }
    ExprKind kinds[] = {ExprKind::Add, ExprKind::Mul, ExprKind::FloorDiv,
                        ExprKind::Mod, ExprKind::Min, ExprKind::Max};
    return SymExpr::make(kinds[pick(6)], random_expr(rng, depth - 1), random_expr(rng, depth - 1));
}

}  // namespace

TEST_CASE("constant and symbol evaluation") {
    CHECK(eval_expr(SymExpr::constant(7), {}) == 7);
    CHECK(eval_expr(SymExpr::symbol("n") * SymExpr::constant(32), {{"n", 4}}) == 128);
    CHECK(eval_expr(floordiv(SymExpr::constant(128), SymExpr::constant(32)), {}) == 4);
    CHECK(eval_expr(mod(SymExpr::constant(7), SymExpr::constant(4)), {}) == 3);
    CHECK(eval_expr(emin(SymExpr::constant(3), SymExpr::constant(9)), {}) == 3);
    CHECK(eval_expr(emax(SymExpr::constant(3), SymExpr::constant(9)), {}) == 9);
}

TEST_CASE("evaluation errors") {
    CHECK_THROWS_WITH_AS(eval_expr(SymExpr::symbol("n"), {}), doctest::Contains("unbound symbol 'n'"),
                         Error);
    CHECK_THROWS_WITH_AS(eval_expr(floordiv(SymExpr::constant(4), SymExpr::constant(0)), {}),
                         doctest::Contains("division by zero"), Error);
    CHECK_THROWS_WITH_AS(eval_expr(mod(SymExpr::constant(4), SymExpr::constant(0)), {}),
                         doctest::Contains("modulo by zero"), Error);
    CHECK_THROWS_AS(eval_expr(SymExpr::symbol("n"), {{"n", -2}}), Error);
    CHECK_THROWS_AS(eval_expr(SymExpr::constant(-1), {}), Error);
}

TEST_CASE("parser accepts the documented grammar") {
    CHECK(eval_expr(parse_expr("n*32"), {{"n", 4}}) == 128);
    CHECK(eval_expr(parse_expr("128//32"), {}) == 4);
    CHECK(eval_expr(parse_expr("7"), {}) == 7);
    CHECK(eval_expr(parse_expr("min(4, n) + 3"), {{"n", 2}}) == 5);
    CHECK(eval_expr(parse_expr("max(4, n) + 3"), {{"n", 9}}) == 12);
    CHECK(eval_expr(parse_expr("(n + m) // 2"), {{"n", 5}, {"m", 4}}) == 4);
    CHECK(eval_expr(parse_expr("n % 4"), {{"n", 11}}) == 3);
    CHECK(eval_expr(parse_expr("2 + 3 * 4"), {}) == 14);     // precedence
    CHECK(eval_expr(parse_expr("2 * 3 + 4"), {}) == 10);
    CHECK(eval_expr(parse_expr("8 // 2 // 2"), {}) == 2);    // left associative
    CHECK(eval_expr(parse_expr(" t0 * 4 + t1 "), {{"t0", 2}, {"t1", 3}}) == 11);
    CHECK(eval_expr(parse_expr("minx + max_y"), {{"minx", 1}, {"max_y", 2}}) == 3);
}

TEST_CASE("parser rejects malformed input") {
    CHECK_THROWS_AS(parse_expr("n - 1"), Error);     // no subtraction in the grammar
    CHECK_THROWS_AS(parse_expr("2 +"), Error);
    CHECK_THROWS_AS(parse_expr("min(3)"), Error);
    CHECK_THROWS_AS(parse_expr("(n"), Error);
    CHECK_THROWS_AS(parse_expr("3 3"), Error);
    CHECK_THROWS_AS(parse_expr(""), Error);
    CHECK_THROWS_AS(parse_expr("99999999999999999999999999"), Error);
}

TEST_CASE("to_string round-trips through the parser") {
    std::mt19937_64 rng(7);
    ShapeBinding b{{"n", 13}, {"m", 2}, {"k", 5}};
    for (int i = 0; i < 500; ++i) {
        ExprPtr e = random_expr(rng, 4);
        ExprPtr r = parse_expr(e->to_string());
        auto want = stack_eval(e, b);
        if (!want) continue;
        CHECK(eval_expr(r, b) == *want);
    }
}

TEST_CASE("differential: eval_expr matches an independent stack evaluator") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 3000; ++i) {
        ExprPtr e = random_expr(rng, 5);
        ShapeBinding b{{"n", static_cast<Int>(rng() % 16)},
                       {"m", static_cast<Int>(rng() % 16)},
                       {"k", static_cast<Int>(rng() % 16)}};
        auto want = stack_eval(e, b);
        if (want) {
            CHECK(eval_expr(e, b) == *want);
        } else {
            CHECK_THROWS_AS(eval_expr(e, b), Error);
        }
    }
}

TEST_CASE("free symbols") {
    auto e = parse_expr("min(n, 4) * m + n");
    auto syms = free_symbols(e);
    CHECK(syms == std::set<std::string>{"n", "m"});
    CHECK(free_symbols(SymExpr::constant(3)).empty());
}
