#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "destab/module_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

using namespace destab;

namespace {

const char* uv_text = R"(# one exterior class over one polynomial class, truncated
prime: 3
window: 1 4
generator: u 1
generator: v 2
generator: uv 3
generator: v2 4
beta u = v
beta uv = v2
P 1 u = 0
)";

bool all_zero(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](int x) { return x == 0; });
}

} // namespace

TEST_CASE("parse a small module and act on it") {
    ModuleWindow m = parse_module(uv_text);
    CHECK(m.p == 3);
    CHECK(m.lo == 1);
    CHECK(m.hi == 4);
    CHECK(m.dim(1) == 1);
    CHECK(m.dim(2) == 1);
    CHECK(m.basis.at(3) == std::vector<std::string>{"uv"});

    ModuleElt u = m.basis_elt(1, 0);
    ModuleElt bu = act_letter(m, 0, u);
    CHECK(bu.degree == 2);
    CHECK(bu.v == Vec{1});
    ModuleElt bbu = act_letter(m, 0, bu);
    CHECK(all_zero(bbu.v));
}

TEST_CASE("parse errors carry line numbers") {
    CHECK_THROWS_WITH_AS(parse_module("prime: 4\n"), doctest::Contains("line 1"), destab_error);
    CHECK_THROWS_WITH_AS(parse_module("prime: 3\nnonsense: 1\n"), doctest::Contains("line 2"),
                         destab_error);
    CHECK_THROWS_WITH_AS(parse_module("prime: 3\nwindow: 0 4\ngenerator: x 0\nbeta y = 0\n"),
                         doctest::Contains("line 4"), destab_error);
    /* wrong target degree */
    CHECK_THROWS_WITH_AS(
        parse_module("prime: 3\nwindow: 0 4\ngenerator: x 0\ngenerator: y 2\nbeta x = 1*y\n"),
        doctest::Contains("line 5"), destab_error);
    /* duplicate generator */
    CHECK_THROWS_WITH_AS(parse_module("prime: 3\nwindow: 0 4\ngenerator: x 0\ngenerator: x 0\n"),
                         doctest::Contains("duplicate"), destab_error);
    /* missing header */
    CHECK_THROWS_WITH_AS(parse_module("window: 0 4\n"), doctest::Contains("prime"), destab_error);
    /* action above the window with a nonzero right-hand side */
    CHECK_THROWS_WITH_AS(
        parse_module("prime: 3\nwindow: 0 2\ngenerator: x 2\ngenerator: y 0\nbeta x = 1*y\n"),
        doctest::Contains("above the window"), destab_error);
}

TEST_CASE("lincomb syntax: coefficients, bare names, accumulation") {
    ModuleWindow m = parse_module("prime: 3\n"
                                  "window: 0 1\n"
                                  "generator: a 0\n"
                                  "generator: b 1\n"
                                  "generator: c 1\n"
                                  "beta a = 2*b + c + 2*c\n");
    ModuleElt ba = act_letter(m, 0, m.basis_elt(0, 0));
    CHECK(ba.v == Vec{2, 0}); /* c + 2c = 3c = 0 */
}

TEST_CASE("suspend directive shifts after load") {
    ModuleWindow m = parse_module("prime: 3\nwindow: 0 2\ngenerator: x 0\nsuspend: 2\n");
    CHECK(m.lo == 2);
    CHECK(m.dim(2) == 1);
    CHECK(m.suspension_offset == 2);
}

TEST_CASE("dump and reparse round-trips") {
    ModuleWindow m = parse_module(uv_text);
    ModuleWindow back = parse_module(dump_module(m));
    CHECK(back == m);

    ModuleWindow b = builtin_bv1(3, 8);
    CHECK(parse_module(dump_module(b)) == b);
}

TEST_CASE("builtin bv1 matches the known action") {
    ModuleWindow b = builtin_bv1(3, 12);
    for (int d = 0; d <= 12; ++d)
        CHECK(b.dim(d) == 1);

    /* beta u = v, beta(u v) = v^2 */
    CHECK(act_letter(b, 0, b.basis_elt(1, 0)).v == Vec{1});
    CHECK(act_letter(b, 0, b.basis_elt(3, 0)).v == Vec{1});
    CHECK(all_zero(act_letter(b, 0, b.basis_elt(2, 0)).v));

    /* P^1(v^j) = j v^{j+2} at p=3 */
    CHECK(act_letter(b, 1, b.basis_elt(2, 0)).v == Vec{1});  /* v -> v^3 */
    CHECK(act_letter(b, 1, b.basis_elt(4, 0)).v == Vec{2});  /* v^2 -> 2 v^4 */
    CHECK(all_zero(act_letter(b, 1, b.basis_elt(6, 0)).v));  /* v^3 -> 3 v^5 = 0 */
    /* P^1 u = 0, P^1(u v) = u v^3 */
    CHECK(all_zero(act_letter(b, 1, b.basis_elt(1, 0)).v));
    CHECK(act_letter(b, 1, b.basis_elt(3, 0)).v == Vec{1});

    /* top-power rule: P^j(v^j) = v^{3j} */
    CHECK(act_letter(b, 2, b.basis_elt(4, 0)).v == Vec{1});

    /* truncation example: degrees 0,1,2 survive below 3 */
    ModuleWindow t = truncate(b, 3, TruncSide::below);
    CHECK(t.dim(0) == 1);
    CHECK(t.dim(1) == 1);
    CHECK(t.dim(2) == 1);
    CHECK(t.dim(3) == 0);

    /* bv1 is unstable: the excess quotient does nothing */
    SteenrodCtx ctx(3);
    CHECK(destabilize(b) == b);
    CHECK(module_relation_violations(ctx, b).empty());

    /* lambda on bv1: lambda(Phi u) = beta u = v, lambda(Phi v) = P^1 v = v^3 */
    SparseMatFp lam = lambda_map(b);
    CHECK(lam.block(2).at(0, 0) == 1);
    CHECK(lam.block(6).at(0, 0) == 1);
}

TEST_CASE("relation checker flags a corrupted module") {
    SteenrodCtx ctx(3);
    ModuleWindow m = parse_module("prime: 3\n"
                                  "window: 0 3\n"
                                  "generator: x 0\n"
                                  "generator: y 1\n"
                                  "generator: z 2\n"
                                  "generator: w 3\n"
                                  "beta x = 1*y\n"
                                  "beta y = 1*z\n" /* beta^2 nonzero */
    );
    auto v = module_relation_violations(ctx, m);
    CHECK(!v.empty());
}

TEST_CASE("load_module builtins and files") {
    SteenrodCtx ctx(3);
    ModuleWindow s = load_module(ctx, "sphere(-2)", 10);
    CHECK(s.lo == -2);
    CHECK(s.dim(-2) == 1);
    CHECK(s.basis.total_dim() == 1);

    ModuleWindow f = load_module(ctx, "free(1)", 13);
    CHECK(f.lo == 1);
    CHECK(f.hi == 13);
    CHECK(f.dim(1) == 1);
    CHECK(f.dim(2) == 1); /* beta g */
    CHECK(f.dim(3) == 0);

    ModuleWindow b = load_module(ctx, "bv1(6)", 99);
    CHECK(b.hi == 6);

    CHECK_THROWS_WITH_AS(load_module(ctx, "bv1(x)", 10), doctest::Contains("bad argument"),
                         destab_error);
    CHECK_THROWS_WITH_AS(load_module(ctx, "/nonexistent/path.mod", 10),
                         doctest::Contains("cannot open"), destab_error);

    /* file round trip and prime mismatch */
    std::string path = "test_module_io_tmp.mod";
    {
        std::ofstream out(path);
        out << uv_text;
    }
    ModuleWindow m = load_module(ctx, path, 0);
    CHECK(m == parse_module(uv_text));
    SteenrodCtx ctx5(5);
    CHECK_THROWS_WITH_AS(load_module(ctx5, path, 0), doctest::Contains("prime mismatch"),
                         destab_error);
    std::remove(path.c_str());
}
