#include "destab/invariants.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>
#include <tuple>

#include "destab/fpla.hpp"

namespace destab {

namespace {

int powi(int base, int e) {
    int r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

int mask_interleave_sign(unsigned a, unsigned b) {
    /* sign of merging the ascending word of a before the ascending word of b */
    int inversions = 0;
    for (unsigned i = 0; i < 32; ++i) {
        if (!(a >> i)) break;
        if (a & (1u << i)) inversions += std::popcount(b & ((1u << i) - 1u));
    }
    return inversions % 2 == 0 ? 1 : -1;
}

}  // namespace

/* ---- H*(BV_s) ---- */

int bv_rank(const BVMono& m) { return static_cast<int>(m.vexp.size()); }

int bv_degree(const BVMono& m) {
    int d = std::popcount(m.umask);
    for (int e : m.vexp) d += 2 * e;
    return d;
}

void bv_add_scaled(int p, BVElt& acc, const BVElt& x, int c) {
    c = norm_mod(c, p);
    if (c == 0) return;
    for (const auto& [mono, coef] : x) {
        int v = norm_mod(acc[mono] + coef * c, p);
        if (v == 0)
            acc.erase(mono);
        else
            acc[mono] = v;
    }
}

BVElt bv_scale(int p, int c, const BVElt& x) {
    BVElt r;
    bv_add_scaled(p, r, x, c);
    return r;
}

BVElt bv_multiply(int p, const BVElt& a, const BVElt& b) {
    BVElt r;
    for (const auto& [ma, ca] : a) {
        for (const auto& [mb, cb] : b) {
            if (ma.umask & mb.umask) continue;
            if (ma.vexp.size() != mb.vexp.size()) throw destab_error("rank mismatch");
            BVMono m;
            m.umask = ma.umask | mb.umask;
            m.vexp.resize(ma.vexp.size());
            for (std::size_t i = 0; i < m.vexp.size(); ++i)
                m.vexp[i] = ma.vexp[i] + mb.vexp[i];
            int c = norm_mod(ca * cb * mask_interleave_sign(ma.umask, mb.umask), p);
            int v = norm_mod(r[m] + c, p);
            if (v == 0)
                r.erase(m);
            else
                r[m] = v;
        }
    }
    return r;
}

BVElt bv_power(int p, const BVElt& a, int n) {
    if (n < 0) throw destab_error("negative power");
    BVElt r;
    if (a.empty() && n > 0) return r;
    int s = a.empty() ? 0 : bv_rank(a.begin()->first);
    r[BVMono{0, std::vector<int>(s, 0)}] = 1;
    BVElt base = a;
    while (n > 0) {
        if (n & 1) r = bv_multiply(p, r, base);
        n >>= 1;
        if (n) base = bv_multiply(p, base, base);
    }
    return r;
}

BVElt bv_substitute(int p, const BVElt& x, const std::vector<std::vector<int>>& g) {
    const int s = static_cast<int>(g.size());
    std::vector<BVElt> uimg(s), vimg(s);
    for (int i = 0; i < s; ++i) {
        if (static_cast<int>(g[i].size()) != s) throw destab_error("rank mismatch");
        for (int j = 0; j < s; ++j) {
            int c = norm_mod(g[i][j], p);
            if (c == 0) continue;
            BVMono mu;
            mu.umask = 1u << j;
            mu.vexp.assign(s, 0);
            uimg[i][mu] = c;
            BVMono mv;
            mv.vexp.assign(s, 0);
            mv.vexp[j] = 1;
            vimg[i][mv] = c;
        }
    }
    BVElt r;
    for (const auto& [mono, coef] : x) {
        if (bv_rank(mono) != s) throw destab_error("rank mismatch");
        BVElt term;
        term[BVMono{0, std::vector<int>(s, 0)}] = norm_mod(coef, p);
        for (int i = 0; i < s; ++i)
            if (mono.umask & (1u << i)) term = bv_multiply(p, term, uimg[i]);
        for (int i = 0; i < s; ++i)
            if (mono.vexp[i] > 0)
                term = bv_multiply(p, term, bv_power(p, vimg[i], mono.vexp[i]));
        bv_add_scaled(p, r, term, 1);
    }
    return r;
}

BVElt bv_beta(int p, const BVElt& x) {
    BVElt r;
    for (const auto& [mono, coef] : x) {
        int pos = 0;
        for (int i = 0; i < bv_rank(mono); ++i) {
            if (!(mono.umask & (1u << i))) continue;
            BVMono m = mono;
            m.umask &= ~(1u << i);
            m.vexp[i] += 1;
            int c = norm_mod((pos % 2 == 0 ? coef : -coef), p);
            int v = norm_mod(r[m] + c, p);
            if (v == 0)
                r.erase(m);
            else
                r[m] = v;
            ++pos;
        }
    }
    return r;
}

namespace {

void ppower_rec(int p, const BVMono& mono, int i, int kleft, int coef,
                std::vector<int>& exps, BVElt& out) {
    const int s = bv_rank(mono);
    if (i == s) {
        if (kleft != 0) return;
        BVMono m;
        m.umask = mono.umask;
        m.vexp = exps;
        int v = norm_mod(out[m] + coef, p);
        if (v == 0)
            out.erase(m);
        else
            out[m] = v;
        return;
    }
    const int top = std::min(kleft, mono.vexp[i]);
    for (int t = 0; t <= top; ++t) {
        int c = norm_mod(coef * binom_mod(mono.vexp[i], t, p), p);
        if (c == 0) continue;
        exps[i] = mono.vexp[i] + t * (p - 1);
        ppower_rec(p, mono, i + 1, kleft - t, c, exps, out);
    }
    exps[i] = mono.vexp[i];
}

}  // namespace

BVElt bv_ppower(int p, int k, const BVElt& x) {
    if (k < 0) throw destab_error("index");
    BVElt r;
    for (const auto& [mono, coef] : x) {
        std::vector<int> exps = mono.vexp;
        ppower_rec(p, mono, 0, k, norm_mod(coef, p), exps, r);
    }
    return r;
}

BVElt bv_st1(int p, const BVElt& x) {
    const int h = (p - 1) / 2;
    /* split into homogeneous components */
    std::map<int, BVElt> by_deg;
    for (const auto& [mono, coef] : x) by_deg[bv_degree(mono)][mono] = coef;
    BVElt r;
    for (const auto& [d, comp] : by_deg) {
        if (d < 0) throw destab_error("index");
        const int k = d / 2;
        const int delta = d % 2;
        for (int i = 0; 2 * i <= d; ++i) {
            const int l = k - i;
            for (int eps = 0; eps <= 1; ++eps) {
                BVElt op = bv_ppower(p, i, comp);
                if (eps) op = bv_beta(p, op);
                if (op.empty()) continue;
                const int c = h * (delta + 2 * l) - eps;
                if (c < 0) throw destab_error("unstable violation");
                const int sign = (l + eps) % 2 == 0 ? 1 : -1;
                for (const auto& [mono, coef] : op) {
                    BVMono m;
                    m.umask = (mono.umask << 1) | (eps ? 1u : 0u);
                    m.vexp.assign(bv_rank(mono) + 1, 0);
                    m.vexp[0] = c;
                    for (int j = 0; j < bv_rank(mono); ++j) m.vexp[j + 1] = mono.vexp[j];
                    int v = norm_mod(r[m] + sign * coef, p);
                    if (v == 0)
                        r.erase(m);
                    else
                        r[m] = v;
                }
            }
        }
    }
    return r;
}

std::vector<std::vector<std::vector<int>>> gl_generators(int p, int s) {
    std::vector<std::vector<std::vector<int>>> gens;
    auto identity = [&]() {
        std::vector<std::vector<int>> g(s, std::vector<int>(s, 0));
        for (int i = 0; i < s; ++i) g[i][i] = 1;
        return g;
    };
    /* primitive root mod p */
    int root = 0;
    for (int r = 2; r < p; ++r) {
        int ord = 1, v = r;
        while (v != 1) {
            v = mul_mod(v, r, p);
            ++ord;
        }
        if (ord == p - 1) {
            root = r;
            break;
        }
    }
    auto diag = identity();
    diag[0][0] = root;
    gens.push_back(diag);
    if (s >= 2) {
        auto trans = identity();
        trans[0][1] = 1;  // v_1 -> v_1 + v_2
        gens.push_back(trans);
        for (int i = 0; i + 1 < s; ++i) {
            auto swap = identity();
            swap[i][i] = swap[i + 1][i + 1] = 0;
            swap[i][i + 1] = swap[i + 1][i] = 1;
            gens.push_back(swap);
        }
    }
    return gens;
}

/* ---- Dickson / Mui ---- */

int invariant_rank_cap(int p) { return p == 3 ? 3 : 2; }

BVElt dickson_product(int p, int s, int i) {
    if (!is_odd_prime(p)) throw destab_error("prime");
    if (s < 1 || s > invariant_rank_cap(p)) throw destab_error("rank cap");
    if (i < 0 || i > s) throw destab_error("index");
    const int total = powi(p, s);
    /* coefficients of X^0 .. X^{p^s} */
    std::vector<BVElt> coeff(total + 1);
    coeff[0][BVMono{0, std::vector<int>(s, 0)}] = 1;
    int processed = 0;
    std::vector<int> form(s, 0);
    for (int n = 0; n < total; ++n) {
        int rem = n;
        for (int j = 0; j < s; ++j) {
            form[j] = rem % p;
            rem /= p;
        }
        BVElt f;
        for (int j = 0; j < s; ++j) {
            if (form[j] == 0) continue;
            BVMono m;
            m.vexp.assign(s, 0);
            m.vexp[j] = 1;
            f[m] = form[j];
        }
        ++processed;
        for (int d = processed; d >= 1; --d) {
            BVElt next = coeff[d - 1];
            bv_add_scaled(p, next, bv_multiply(p, f, coeff[d]), -1);
            coeff[d] = std::move(next);
        }
        coeff[0] = bv_scale(p, -1, bv_multiply(p, f, coeff[0]));
    }
    const int sign = (s - i) % 2 == 0 ? 1 : -1;
    return bv_scale(p, sign, coeff[powi(p, i)]);
}

namespace {

/* determinant of the matrix with the given row exponents (entries v_j^{p^r}) */
BVElt power_determinant(int p, int s, const std::vector<int>& row_powers,
                        const std::vector<int>& cols) {
    const int n = static_cast<int>(row_powers.size());
    BVElt r;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        int inversions = 0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (perm[a] > perm[b]) ++inversions;
        BVMono m;
        m.vexp.assign(s, 0);
        for (int rr = 0; rr < n; ++rr) m.vexp[cols[perm[rr]]] += powi(p, row_powers[rr]);
        int v = norm_mod(r[m] + (inversions % 2 == 0 ? 1 : -1), p);
        if (v == 0)
            r.erase(m);
        else
            r[m] = v;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return r;
}

}  // namespace

BVElt mui_L(int p, int s) {
    static std::map<std::pair<int, int>, BVElt> cache;
    auto key = std::make_pair(p, s);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (s < 1 || s > invariant_rank_cap(p)) throw destab_error("rank cap");
    std::vector<int> rows(s), cols(s);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    return cache[key] = power_determinant(p, s, rows, cols);
}

BVElt mui_M(int p, int s, int i) {
    static std::map<std::tuple<int, int, int>, BVElt> cache;
    auto key = std::make_tuple(p, s, i);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (s < 1 || s > invariant_rank_cap(p)) throw destab_error("rank cap");
    if (i < 0 || i >= s) throw destab_error("index");
    std::vector<int> rows;
    for (int r = 0; r < s; ++r)
        if (r != i) rows.push_back(r);
    BVElt out;
    for (int j = 0; j < s; ++j) {
        std::vector<int> cols;
        for (int c = 0; c < s; ++c)
            if (c != j) cols.push_back(c);
        BVElt minor = power_determinant(p, s, rows, cols);
        BVMono uj;
        uj.umask = 1u << j;
        uj.vexp.assign(s, 0);
        BVElt ufac;
        ufac[uj] = 1;
        bv_add_scaled(p, out, bv_multiply(p, ufac, minor), j % 2 == 0 ? 1 : -1);
    }
    return cache[key] = out;
}

BVElt dickson(int p, int s, int i) {
    static std::map<std::tuple<int, int, int>, BVElt> cache;
    auto key = std::make_tuple(p, s, i);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (!is_odd_prime(p)) throw destab_error("prime");
    if (s < 0 || s > invariant_rank_cap(p)) throw destab_error("rank cap");
    if (i < 0 || i > s) throw destab_error("index");
    BVElt out;
    if (i == s) {
        out[BVMono{0, std::vector<int>(s, 0)}] = 1;
    } else if (s <= 2) {
        out = dickson_product(p, s, i);
    } else {
        /* Q_{s,0} = Q_{1,0} st1(Q_{s-1,0});
           Q_{s,i} = Q_{1,0}^{p^i} st1(Q_{s-1,i}) + st1(Q_{s-1,i-1}) for i >= 1 */
        BVMono q1;
        q1.vexp.assign(s, 0);
        q1.vexp[0] = p - 1;
        if (i == 0) {
            BVElt q1e;
            q1e[q1] = 1;
            out = bv_multiply(p, q1e, bv_st1(p, dickson(p, s - 1, 0)));
        } else {
            BVMono q1p = q1;
            q1p.vexp[0] = (p - 1) * powi(p, i);
            BVElt q1pe;
            q1pe[q1p] = 1;
            out = bv_multiply(p, q1pe, bv_st1(p, dickson(p, s - 1, i)));
            bv_add_scaled(p, out, bv_st1(p, dickson(p, s - 1, i - 1)), 1);
        }
    }
    return cache[key] = out;
}

BVElt mui_e(int p, int s) {
    static std::map<std::pair<int, int>, BVElt> cache;
    auto key = std::make_pair(p, s);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    return cache[key] = bv_power(p, mui_L(p, s), (p - 1) / 2);
}

BVElt mui_Mtilde(int p, int s, int i) {
    static std::map<std::tuple<int, int, int>, BVElt> cache;
    auto key = std::make_tuple(p, s, i);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    return cache[key] =
               bv_multiply(p, mui_M(p, s, i), bv_power(p, mui_L(p, s), (p - 3) / 2));
}

BVElt mui_R(int p, int s, int i) {
    static std::map<std::tuple<int, int, int>, BVElt> cache;
    auto key = std::make_tuple(p, s, i);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    return cache[key] = bv_multiply(p, mui_Mtilde(p, s, i), mui_e(p, s));
}

/* ---- Gamma_s ---- */

int gamma_rank(const GammaMono& m) { return static_cast<int>(m.e.size()) + 1; }

int gamma_degree(int p, const GammaMono& m) {
    const int s = gamma_rank(m);
    const int ps = powi(p, s);
    int d = m.e0 * 2 * (ps - 1);
    for (int j = 1; j < s; ++j) d += m.e[j - 1] * 2 * (ps - powi(p, j));
    for (int i = 0; i < s; ++i)
        if (m.rmask & (1u << i)) d += 2 * (ps - powi(p, i)) - 1;
    return d;
}

bool gamma_is_odd(const GammaMono& m) { return std::popcount(m.rmask) % 2 == 1; }

GammaMono gamma_unit(int s) {
    GammaMono m;
    m.e.assign(std::max(0, s - 1), 0);
    return m;
}

GammaMono gamma_Q0(int s, int n) {
    GammaMono m = gamma_unit(s);
    m.e0 = n;
    return m;
}

GammaMono gamma_Q(int s, int j) {
    if (j < 1 || j > s - 1) throw destab_error("index");
    GammaMono m = gamma_unit(s);
    m.e[j - 1] = 1;
    return m;
}

GammaMono gamma_R(int s, int i) {
    if (i < 0 || i >= s) throw destab_error("index");
    GammaMono m = gamma_unit(s);
    m.rmask = 1u << i;
    return m;
}

GammaMono gamma_w() {
    GammaMono m = gamma_R(1, 0);
    m.e0 = -1;
    return m;
}

void gamma_add_scaled(int p, GammaElt& acc, const GammaElt& x, int c) {
    c = norm_mod(c, p);
    if (c == 0) return;
    for (const auto& [mono, coef] : x) {
        int v = norm_mod(acc[mono] + coef * c, p);
        if (v == 0)
            acc.erase(mono);
        else
            acc[mono] = v;
    }
}

GammaElt gamma_scale(int p, int c, const GammaElt& x) {
    GammaElt r;
    gamma_add_scaled(p, r, x, c);
    return r;
}

namespace {

/* monomial product; returns sign 0 when the exterior parts collide */
int gamma_mono_mul(const GammaMono& a, const GammaMono& b, GammaMono& out) {
    if (a.e.size() != b.e.size()) throw destab_error("rank mismatch");
    if (a.rmask & b.rmask) return 0;
    out.rmask = a.rmask | b.rmask;
    out.e0 = a.e0 + b.e0;
    out.e.resize(a.e.size());
    for (std::size_t i = 0; i < a.e.size(); ++i) out.e[i] = a.e[i] + b.e[i];
    return mask_interleave_sign(a.rmask, b.rmask);
}

}  // namespace

GammaElt gamma_multiply(int p, const GammaElt& a, const GammaElt& b) {
    GammaElt r;
    GammaMono m;
    for (const auto& [ma, ca] : a) {
        for (const auto& [mb, cb] : b) {
            int sign = gamma_mono_mul(ma, mb, m);
            if (sign == 0) continue;
            int v = norm_mod(r[m] + sign * ca * cb, p);
            if (v == 0)
                r.erase(m);
            else
                r[m] = v;
        }
    }
    return r;
}

GammaElt gamma_power(int p, const GammaElt& a, int n) {
    if (n < 0) {
        if (a.size() != 1) throw destab_error("not invertible");
        const auto& [mono, coef] = *a.begin();
        if (mono.rmask != 0) throw destab_error("not invertible");
        for (int e : mono.e)
            if (e != 0) throw destab_error("not invertible");
        GammaMono m = mono;
        m.e0 *= n;
        GammaElt r;
        r[m] = pow_mod(inv_mod(norm_mod(coef, p), p), -n, p);
        return r;
    }
    int s = a.empty() ? 1 : gamma_rank(a.begin()->first);
    GammaElt r;
    r[gamma_unit(s)] = 1;
    GammaElt base = a;
    while (n > 0) {
        if (n & 1) r = gamma_multiply(p, r, base);
        n >>= 1;
        if (n) base = gamma_multiply(p, base, base);
    }
    return r;
}

namespace {

void gamma_enum_rec(int p, int s, int j, int rem, GammaMono& m,
                    std::vector<GammaMono>& out) {
    const int ps = powi(p, s);
    if (j == s) {
        const int w0 = 2 * (ps - 1);
        if (rem % w0 == 0) {
            m.e0 = rem / w0;
            out.push_back(m);
        }
        return;
    }
    const int w = 2 * (ps - powi(p, j));
    for (int e = 0; e * w <= rem; ++e) {
        m.e[j - 1] = e;
        gamma_enum_rec(p, s, j + 1, rem - e * w, m, out);
    }
    m.e[j - 1] = 0;
}

}  // namespace

std::vector<GammaMono> gamma_poly_monomials(int p, int s, int degree) {
    std::vector<GammaMono> out;
    const int ps = powi(p, s);
    for (unsigned rmask = 0; rmask < (1u << s); ++rmask) {
        int base = 0;
        for (int i = 0; i < s; ++i)
            if (rmask & (1u << i)) base += 2 * (ps - powi(p, i)) - 1;
        if (base > degree) continue;
        GammaMono m = gamma_unit(s);
        m.rmask = rmask;
        gamma_enum_rec(p, s, 1, degree - base, m, out);
    }
    return out;
}

namespace {

BVElt gamma_mono_to_bv(int p, const GammaMono& g) {
    static std::map<std::pair<int, GammaMono>, BVElt> cache;
    auto key = std::make_pair(p, g);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const int s = gamma_rank(g);
    if (g.e0 < 0) throw destab_error("negative power");
    BVElt out;
    out[BVMono{0, std::vector<int>(s, 0)}] = 1;
    for (int i = 0; i < s; ++i)
        if (g.rmask & (1u << i)) out = bv_multiply(p, out, mui_R(p, s, i));
    if (g.e0 > 0) out = bv_multiply(p, out, bv_power(p, dickson(p, s, 0), g.e0));
    for (int j = 1; j < s; ++j)
        if (g.e[j - 1] > 0)
            out = bv_multiply(p, out, bv_power(p, dickson(p, s, j), g.e[j - 1]));
    return cache[key] = out;
}

}  // namespace

BVElt gamma_to_bv(int p, const GammaElt& g) {
    BVElt r;
    for (const auto& [mono, coef] : g)
        bv_add_scaled(p, r, gamma_mono_to_bv(p, mono), coef);
    return r;
}

GammaElt bv_to_gamma(int p, int s, const BVElt& x) {
    std::map<int, BVElt> by_deg;
    for (const auto& [mono, coef] : x) by_deg[bv_degree(mono)][mono] = coef;
    GammaElt out;
    for (const auto& [d, comp] : by_deg) {
        std::vector<GammaMono> basis = gamma_poly_monomials(p, s, d);
        std::vector<BVElt> expansions;
        expansions.reserve(basis.size());
        std::map<BVMono, int> row_of;
        for (const GammaMono& b : basis) {
            GammaElt unit;
            unit[b] = 1;
            expansions.push_back(gamma_to_bv(p, unit));
            for (const auto& [mono, coef] : expansions.back())
                row_of.emplace(mono, 0);
        }
        for (const auto& [mono, coef] : comp) row_of.emplace(mono, 0);
        int nrows = 0;
        for (auto& [mono, row] : row_of) row = nrows++;
        Mat a(nrows, static_cast<int>(basis.size()));
        for (int c = 0; c < static_cast<int>(basis.size()); ++c)
            for (const auto& [mono, coef] : expansions[c]) a.at(row_of[mono], c) = coef;
        Vec rhs(nrows, 0);
        for (const auto& [mono, coef] : comp) rhs[row_of[mono]] = norm_mod(coef, p);
        Solver solver(a, p);
        auto sol = solver.solve(rhs);
        if (!sol) throw destab_error("not invariant");
        for (int c = 0; c < static_cast<int>(basis.size()); ++c) {
            if ((*sol)[c] == 0) continue;
            out[basis[c]] = (*sol)[c];
        }
    }
    return out;
}

/* ---- theta ---- */

GammaElt theta(int p, int s, const MilnorMono& m) {
    GammaElt acc;
    acc[gamma_unit(s)] = 1;
    for (int k : m.emask) {
        if (k >= s) return {};
        GammaMono f = gamma_R(s, k);
        f.e0 = -1;
        GammaElt fe;
        fe[f] = (k + 1) % 2 == 0 ? 1 : p - 1;
        acc = gamma_multiply(p, acc, fe);
    }
    for (std::size_t idx = 0; idx < m.r.size(); ++idx) {
        const int i = static_cast<int>(idx) + 1;
        const int ri = m.r[idx];
        if (ri == 0) continue;
        if (i > s) return {};
        GammaMono f = gamma_unit(s);
        f.e0 = -ri;
        if (i < s) f.e[i - 1] = ri;
        GammaElt fe;
        fe[f] = (i * ri) % 2 == 0 ? 1 : p - 1;
        acc = gamma_multiply(p, acc, fe);
    }
    return acc;
}

GammaElt theta(int p, int s, const MilnorSum& m) {
    GammaElt r;
    for (const auto& [mono, coef] : m) gamma_add_scaled(p, r, theta(p, s, mono), coef);
    return r;
}

/* ---- psi ---- */

void gamma_pair_add_scaled(int p, GammaPairElt& acc, const GammaPairElt& x, int c) {
    c = norm_mod(c, p);
    if (c == 0) return;
    for (const auto& [mono, coef] : x) {
        int v = norm_mod(acc[mono] + coef * c, p);
        if (v == 0)
            acc.erase(mono);
        else
            acc[mono] = v;
    }
}

GammaPairElt gamma_pair_multiply(int p, const GammaPairElt& a, const GammaPairElt& b) {
    GammaPairElt r;
    GammaMono left, right;
    for (const auto& [ma, ca] : a) {
        for (const auto& [mb, cb] : b) {
            int sl = gamma_mono_mul(ma.first, mb.first, left);
            if (sl == 0) continue;
            int sr = gamma_mono_mul(ma.second, mb.second, right);
            if (sr == 0) continue;
            int koszul =
                (gamma_is_odd(ma.second) && gamma_is_odd(mb.first)) ? -1 : 1;
            int c = norm_mod(sl * sr * koszul * ca * cb, p);
            if (c == 0) continue;
            auto key = std::make_pair(left, right);
            int v = norm_mod(r[key] + c, p);
            if (v == 0)
                r.erase(key);
            else
                r[key] = v;
        }
    }
    return r;
}

namespace {

/* left factor Q_{s,a}^{p^j} Q_{s,0}^{p^t - p^j} of the coproduct sums */
GammaMono psi_left_q(int p, int s, int t, int a, int j) {
    GammaMono m = gamma_unit(s);
    m.e0 = powi(p, t) - powi(p, j);
    if (a == 0)
        m.e0 = powi(p, t);
    else if (a < s)
        m.e[a - 1] = powi(p, j);
    return m;
}

GammaPairElt psi_q_generator(int p, int s, int t, int i) {
    GammaPairElt out;
    for (int j = std::max(0, i - s); j <= std::min(i, t); ++j) {
        GammaMono left = psi_left_q(p, s, t, i - j, j);
        GammaMono right = gamma_unit(t);
        if (j > 0 && j < t)
            right.e[j - 1] = 1;
        else if (j == 0)
            right.e0 = 1;
        out[std::make_pair(left, right)] = 1;
    }
    return out;
}

GammaPairElt psi_r_generator(int p, int s, int t, int i) {
    GammaPairElt out;
    if (i < s) {
        GammaMono left = gamma_R(s, i);
        left.e0 = powi(p, t) - 1;
        GammaMono right = gamma_Q0(t, 1);
        out[std::make_pair(left, right)] = 1;
    }
    for (int j = std::max(0, i - s); j <= std::min(i, t - 1); ++j) {
        GammaMono left = psi_left_q(p, s, t, i - j, j);
        GammaMono right = gamma_R(t, j);
        auto key = std::make_pair(left, right);
        out[key] = norm_mod(out[key] + 1, p);
        if (out[key] == 0) out.erase(key);
    }
    return out;
}

}  // namespace

GammaPairElt psi_coproduct(int p, int s, int t, const GammaMono& g) {
    if (s < 1 || t < 1) throw destab_error("index");
    if (gamma_rank(g) != s + t) throw destab_error("rank mismatch");
    GammaPairElt acc;
    {
        GammaMono left = gamma_Q0(s, g.e0 * powi(p, t));
        GammaMono right = gamma_Q0(t, g.e0);
        acc[std::make_pair(left, right)] = 1;
    }
    for (int j = 1; j < s + t; ++j) {
        const int n = g.e[j - 1];
        if (n == 0) continue;
        GammaPairElt base = psi_q_generator(p, s, t, j);
        for (int c = 0; c < n; ++c) acc = gamma_pair_multiply(p, acc, base);
    }
    for (int i = 0; i < s + t; ++i) {
        if (!(g.rmask & (1u << i))) continue;
        acc = gamma_pair_multiply(p, acc, psi_r_generator(p, s, t, i));
    }
    return acc;
}

GammaPairElt psi_coproduct(int p, int s, int t, const GammaElt& g) {
    GammaPairElt r;
    for (const auto& [mono, coef] : g)
        gamma_pair_add_scaled(p, r, psi_coproduct(p, s, t, mono), coef);
    return r;
}

/* ---- evaluation ---- */

int partial_1(const GammaElt& g) {
    auto it = g.find(gamma_w());
    return it == g.end() ? 0 : it->second;
}

GammaElt partial_s(int p, int s, const GammaElt& g, koszul_mode mode) {
    if (s < 1) throw destab_error("index");
    GammaElt out;
    if (s == 1) {
        int c = partial_1(g);
        if (c != 0) out[gamma_unit(0)] = c;
        return out;
    }
    const GammaMono w = gamma_w();
    GammaPairElt pairs = psi_coproduct(p, s - 1, 1, g);
    for (const auto& [pr, coef] : pairs) {
        if (!(pr.second == w)) continue;
        int sign = 1;
        if (mode == koszul_mode::graded && gamma_is_odd(pr.first)) sign = -1;
        int v = norm_mod(out[pr.first] + sign * coef, p);
        if (v == 0)
            out.erase(pr.first);
        else
            out[pr.first] = v;
    }
    return out;
}

/* ---- phi_s ---- */

GammaElt phi_s_map(int p, int s, const GammaElt& q) {
    if (s < 1) throw destab_error("index");
    GammaElt out;
    for (const auto& [mono, coef] : q) {
        if (gamma_rank(mono) != s) throw destab_error("rank mismatch");
        if (mono.rmask != 0 || mono.e0 < 0) throw destab_error("phi_s domain");
        if (mono.e0 > 0) continue;
        GammaMono m = gamma_unit(s - 1);
        for (int j = 1; j < s; ++j) {
            if (mono.e[j - 1] == 0) continue;
            if (j == 1)
                m.e0 += p * mono.e[0];
            else
                m.e[j - 2] += p * mono.e[j - 1];
        }
        int v = norm_mod(out[m] + coef, p);
        if (v == 0)
            out.erase(m);
        else
            out[m] = v;
    }
    return out;
}

/* ---- K_s ---- */

int ks_rank(const KsMono& m) { return static_cast<int>(m.b.size()) + 1; }

int ks_degree(int p, const KsMono& m) {
    const int s = ks_rank(m);
    const int ps = powi(p, s);
    int d = m.a * (ps - 1);
    for (int j = 1; j < s; ++j) d += m.b[j - 1] * 2 * (ps - powi(p, j));
    for (int i = 0; i < s; ++i)
        if (m.mmask & (1u << i)) d += ps - 2 * powi(p, i);
    return d;
}

int ks_parity(const KsMono& m) {
    return norm_mod(std::popcount(m.mmask) + m.a, 2);
}

KsMono ks_unit(int s) {
    KsMono m;
    m.b.assign(std::max(0, s - 1), 0);
    return m;
}

void ks_add_scaled(int p, KsElt& acc, const KsElt& x, int c) {
    c = norm_mod(c, p);
    if (c == 0) return;
    for (const auto& [mono, coef] : x) {
        int v = norm_mod(acc[mono] + coef * c, p);
        if (v == 0)
            acc.erase(mono);
        else
            acc[mono] = v;
    }
}

KsElt ks_multiply(int p, const KsElt& a, const KsElt& b) {
    KsElt r;
    for (const auto& [ma, ca] : a) {
        for (const auto& [mb, cb] : b) {
            if (ma.mmask & mb.mmask) continue;
            if (ma.b.size() != mb.b.size()) throw destab_error("rank mismatch");
            KsMono m;
            m.mmask = ma.mmask | mb.mmask;
            m.a = ma.a + mb.a;
            m.b.resize(ma.b.size());
            for (std::size_t i = 0; i < ma.b.size(); ++i) m.b[i] = ma.b[i] + mb.b[i];
            int c = norm_mod(ca * cb * mask_interleave_sign(ma.mmask, mb.mmask), p);
            int v = norm_mod(r[m] + c, p);
            if (v == 0)
                r.erase(m);
            else
                r[m] = v;
        }
    }
    return r;
}

KsElt gamma_to_ks(const GammaElt& g) {
    KsElt r;
    for (const auto& [mono, coef] : g) {
        KsMono m;
        m.mmask = mono.rmask;
        m.a = std::popcount(mono.rmask) + 2 * mono.e0;
        m.b = mono.e;
        r[m] = coef;
    }
    return r;
}

GammaElt ks_to_gamma(const KsElt& k) {
    GammaElt r;
    for (const auto& [mono, coef] : k) {
        const int d = mono.a - std::popcount(mono.mmask);
        if (d % 2 != 0) throw destab_error("parity");
        GammaMono m;
        m.rmask = mono.mmask;
        m.e0 = d / 2;
        m.e = mono.b;
        r[m] = coef;
    }
    return r;
}

namespace {

void ks_enum_rec(int p, int s, int j, int rem, KsMono& m, int parity,
                 std::vector<KsMono>& out) {
    const int ps = powi(p, s);
    if (j == s) {
        const int wa = ps - 1;
        if (rem % wa == 0) {
            m.a = rem / wa;
            if (parity < 0 || ks_parity(m) == parity) out.push_back(m);
        }
        return;
    }
    const int w = 2 * (ps - powi(p, j));
    for (int b = 0; b * w <= rem; ++b) {
        m.b[j - 1] = b;
        ks_enum_rec(p, s, j + 1, rem - b * w, m, parity, out);
    }
    m.b[j - 1] = 0;
}

}  // namespace

std::vector<KsMono> ks_monomials(int p, int s, int degree, int parity) {
    std::vector<KsMono> out;
    if (degree < 0) return out;
    const int ps = powi(p, s);
    for (unsigned mmask = 0; mmask < (1u << s); ++mmask) {
        int base = 0;
        for (int i = 0; i < s; ++i)
            if (mmask & (1u << i)) base += ps - 2 * powi(p, i);
        if (base > degree) continue;
        KsMono m = ks_unit(s);
        m.mmask = mmask;
        ks_enum_rec(p, s, 1, degree - base, m, parity, out);
    }
    return out;
}

BVElt ks_to_bv(int p, const KsElt& k) {
    BVElt r;
    for (const auto& [mono, coef] : k) {
        const int s = ks_rank(mono);
        if (mono.a < 0) throw destab_error("negative power");
        BVElt term;
        term[BVMono{0, std::vector<int>(s, 0)}] = norm_mod(coef, p);
        for (int i = 0; i < s; ++i)
            if (mono.mmask & (1u << i)) term = bv_multiply(p, term, mui_Mtilde(p, s, i));
        if (mono.a > 0) term = bv_multiply(p, term, bv_power(p, mui_e(p, s), mono.a));
        for (int j = 1; j < s; ++j)
            if (mono.b[j - 1] > 0)
                term = bv_multiply(p, term, bv_power(p, dickson(p, s, j), mono.b[j - 1]));
        bv_add_scaled(p, r, term, 1);
    }
    return r;
}

/* ---- Steenrod action on Gamma_s ---- */

GammaActionCtx::GammaActionCtx(int p, int s, int deg_cap)
    : p_(p), s_(s), cap_(deg_cap) {
    if (!is_odd_prime(p)) throw destab_error("prime");
    if (s < 1 || s > invariant_rank_cap(p)) throw destab_error("rank cap");
}

const GammaElt& GammaActionCtx::gen_beta(int which) const {
    if (auto it = gen_beta_.find(which); it != gen_beta_.end()) return it->second;
    GammaElt val;
    if (which >= s_) {
        const int i = which - s_;
        val = bv_to_gamma(p_, s_, bv_beta(p_, mui_R(p_, s_, i)));
    }
    /* beta vanishes on the polynomial Dickson part */
    return gen_beta_[which] = val;
}

const GammaElt& GammaActionCtx::gen_ppower(int which, int k) const {
    auto key = std::make_pair(which, k);
    if (auto it = gen_p_.find(key); it != gen_p_.end()) return it->second;
    BVElt gen = which < s_ ? dickson(p_, s_, which) : mui_R(p_, s_, which - s_);
    const int deg = gen.empty() ? 0 : bv_degree(gen.begin()->first);
    GammaElt val;
    if (k == 0) {
        val[which < s_ ? (which == 0 ? gamma_Q0(s_, 1) : gamma_Q(s_, which))
                       : gamma_R(s_, which - s_)] = 1;
    } else if (2 * k <= deg) {
        val = bv_to_gamma(p_, s_, bv_ppower(p_, k, gen));
    }
    return gen_p_[key] = val;
}

const GammaElt& GammaActionCtx::q0_power(int n, int k) const {
    auto key = std::make_pair(std::make_pair(0, n), k);
    if (auto it = pow_p_.find(key); it != pow_p_.end()) return it->second;
    GammaElt val;
    if (n == 0) {
        if (k == 0) val[gamma_unit(s_)] = 1;
    } else if (n > 0) {
        const int d0 = 2 * (powi(p_, s_) - 1);
        for (int i = 0; i <= k && 2 * i <= d0; ++i)
            gamma_add_scaled(p_, val,
                             gamma_multiply(p_, gen_ppower(0, i), q0_power(n - 1, k - i)),
                             1);
    } else if (n == -1) {
        if (k == 0) {
            val[gamma_Q0(s_, -1)] = 1;
        } else {
            const int d0 = 2 * (powi(p_, s_) - 1);
            GammaElt sum;
            for (int i = 1; i <= k && 2 * i <= d0; ++i)
                gamma_add_scaled(p_, sum,
                                 gamma_multiply(p_, gen_ppower(0, i), q0_power(-1, k - i)),
                                 1);
            GammaElt inv;
            inv[gamma_Q0(s_, -1)] = 1;
            val = gamma_scale(p_, -1, gamma_multiply(p_, inv, sum));
        }
    } else {
        for (int i = 0; i <= k; ++i)
            gamma_add_scaled(p_, val,
                             gamma_multiply(p_, q0_power(-1, i), q0_power(n + 1, k - i)),
                             1);
    }
    return pow_p_[key] = val;
}

const GammaElt& GammaActionCtx::qj_power(int j, int n, int k) const {
    auto key = std::make_pair(std::make_pair(j, n), k);
    if (auto it = pow_p_.find(key); it != pow_p_.end()) return it->second;
    if (n < 0) throw destab_error("negative power");
    GammaElt val;
    if (n == 0) {
        if (k == 0) val[gamma_unit(s_)] = 1;
    } else {
        const int dj = 2 * (powi(p_, s_) - powi(p_, j));
        for (int i = 0; i <= k && 2 * i <= dj; ++i)
            gamma_add_scaled(
                p_, val,
                gamma_multiply(p_, gen_ppower(j, i), qj_power(j, n - 1, k - i)), 1);
    }
    return pow_p_[key] = val;
}

GammaElt GammaActionCtx::ppower_mono(int k, const GammaMono& g) const {
    /* Cartan convolution over the canonical factor order */
    std::vector<GammaElt> acc(k + 1);
    acc[0][gamma_unit(s_)] = 1;
    auto absorb_table = [&](auto&& table) {
        std::vector<GammaElt> next(k + 1);
        for (int w = 0; w <= k; ++w) {
            if (acc[w].empty()) continue;
            for (int w2 = 0; w + w2 <= k; ++w2) {
                const GammaElt& f = table(w2);
                if (f.empty()) continue;
                gamma_add_scaled(p_, next[w + w2], gamma_multiply(p_, acc[w], f), 1);
            }
        }
        acc = std::move(next);
    };
    for (int i = 0; i < s_; ++i)
        if (g.rmask & (1u << i))
            absorb_table([&](int w2) -> const GammaElt& { return gen_ppower(s_ + i, w2); });
    if (g.e0 != 0)
        absorb_table([&](int w2) -> const GammaElt& { return q0_power(g.e0, w2); });
    for (int j = 1; j < s_; ++j)
        if (g.e[j - 1] != 0)
            absorb_table(
                [&](int w2) -> const GammaElt& { return qj_power(j, g.e[j - 1], w2); });
    return acc[k];
}

GammaElt GammaActionCtx::beta_mono(const GammaMono& g) const {
    if (g.rmask == 0) return {};
    const int i = std::countr_zero(g.rmask);
    GammaMono rest = g;
    rest.rmask &= ~(1u << i);
    GammaElt rest_elt;
    rest_elt[rest] = 1;
    GammaElt out = gamma_multiply(p_, gen_beta(s_ + i), rest_elt);
    GammaElt ri;
    ri[gamma_R(s_, i)] = 1;
    gamma_add_scaled(p_, out, gamma_multiply(p_, ri, beta_mono(rest)), -1);
    return out;
}

GammaElt GammaActionCtx::beta(const GammaElt& g) const {
    GammaElt out;
    for (const auto& [mono, coef] : g) {
        if (gamma_rank(mono) != s_) throw destab_error("rank mismatch");
        if (gamma_degree(p_, mono) + 1 > cap_) throw destab_error("cap exceeded");
        gamma_add_scaled(p_, out, beta_mono(mono), coef);
    }
    return out;
}

GammaElt GammaActionCtx::ppower(int k, const GammaElt& g) const {
    if (k < 0) throw destab_error("index");
    GammaElt out;
    for (const auto& [mono, coef] : g) {
        if (gamma_rank(mono) != s_) throw destab_error("rank mismatch");
        if (gamma_degree(p_, mono) + 2 * k * (p_ - 1) > cap_)
            throw destab_error("cap exceeded");
        gamma_add_scaled(p_, out, ppower_mono(k, mono), coef);
    }
    return out;
}

GammaElt GammaActionCtx::act_letter(int op, const GammaElt& g) const {
    return op == 0 ? beta(g) : ppower(op, g);
}

/* ---- text format ---- */

std::string bv_mono_to_string(const BVMono& m) {
    std::ostringstream os;
    os << "u{";
    bool first = true;
    for (int i = 0; i < bv_rank(m); ++i) {
        if (!(m.umask & (1u << i))) continue;
        if (!first) os << ",";
        os << (i + 1);
        first = false;
    }
    os << "} v^(";
    for (int i = 0; i < bv_rank(m); ++i) {
        if (i) os << ",";
        os << m.vexp[i];
    }
    os << ")";
    return os.str();
}

std::string bv_to_string(const BVElt& x) {
    if (x.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [mono, coef] : x) {
        if (!first) os << " + ";
        os << coef << " * " << bv_mono_to_string(mono);
        first = false;
    }
    return os.str();
}

std::string gamma_mono_to_string(const GammaMono& m) {
    std::ostringstream os;
    os << "R{";
    bool first = true;
    for (int i = 0; i < gamma_rank(m); ++i) {
        if (!(m.rmask & (1u << i))) continue;
        if (!first) os << ",";
        os << i;
        first = false;
    }
    os << "} Q^(" << m.e0;
    for (int e : m.e) os << "," << e;
    os << ")";
    return os.str();
}

std::string gamma_to_string(const GammaElt& g) {
    if (g.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [mono, coef] : g) {
        if (!first) os << " + ";
        os << coef << " * " << gamma_mono_to_string(mono);
        first = false;
    }
    return os.str();
}

}  // namespace destab
