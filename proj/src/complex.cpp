#include "destab/complex.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

namespace destab {

namespace {

long long powll(int base, int e)
{
    long long r = 1;
    for (int i = 0; i < e; ++i)
        r *= base;
    return r;
}

/* the degree below which level s is provably zero, from the window bottom */
long long level_floor(int p, int s, int lo)
{
    return 1 + powll(p, s) * (static_cast<long long>(lo) + s - 1);
}

/* e with phi_degree(p, e) == n, if any (at most one exists) */
std::optional<int> phi_preimage(int p, long long n)
{
    if (n % 2 != 0)
        return std::nullopt;
    if (n % p == 0 && (n / p) % 2 == 0)
        return static_cast<int>(n / p);
    if ((n - 2) % p == 0) {
        long long e = (n - 2) / p + 1;
        if (e % 2 != 0)
            return static_cast<int>(e);
    }
    return std::nullopt;
}

/* differential on stored coordinates: ambient expansion, evaluation map on
 * the invariant factor, pullback at rank s-1; partial values are memoized
 * per Gamma monomial */
struct DiffCtx {
    RsContext& src;
    RsContext& dst;
    std::map<GammaMono, GammaElt> memo;

    DiffCtx(RsContext& s, RsContext& d) : src(s), dst(d) {}

    const GammaElt& partial_of(const GammaMono& g)
    {
        auto it = memo.find(g);
        if (it != memo.end())
            return it->second;
        return memo.emplace(g, partial_s(src.p(), src.rank(), GammaElt{{g, 1}})).first->second;
    }

    RsElt apply(const RsElt& e)
    {
        const int p = src.p();
        AmbientElt img;
        for (const auto& [key, c] : e) {
            AmbientElt a = src.to_ambient(key);
            for (const auto& [ak, ca] : a) {
                if (ak.eflag != 0)
                    throw destab_error("parity: differential input is not in the plus part");
                const GammaElt& dg = partial_of(ak.g);
                if (dg.empty())
                    continue;
                long long base = static_cast<long long>(c) * ca;
                for (const auto& [g2, c2] : dg) {
                    int v = norm_mod(base * c2, p);
                    if (v != 0)
                        ambient_add_scaled(p, img,
                                           AmbientElt{{AmbientKey{0, g2, ak.mdeg - 1, ak.midx}, v}},
                                           1);
                }
            }
        }
        try {
            return dst.from_ambient(std::move(img));
        } catch (const destab_error& err) {
            throw destab_error(std::string("differential leaves R_{s-1}: ") + err.what());
        }
    }
};

std::string rs_elt_to_string(const RsElt& e, const ModuleWindow& n)
{
    if (e.empty())
        return "0";
    std::string out;
    for (const auto& [key, c] : e) {
        if (!out.empty())
            out += " + ";
        out += std::to_string(c) + "*(" + rs_key_to_string(key, n) + ")";
    }
    return out;
}

Vec mat_vec(const Mat& m, const Vec& x, int p)
{
    Vec y(m.nrows, 0);
    for (int r = 0; r < m.nrows; ++r) {
        long long acc = 0;
        for (int c = 0; c < m.ncols; ++c)
            acc += static_cast<long long>(m.at(r, c)) * x[c];
        y[r] = norm_mod(acc, p);
    }
    return y;
}

/* position of a stored key inside the level-s basis at complex degree d */
int stored_row(ComplexWindow& c, int s, int d, const RsKey& key)
{
    if (s == 0) {
        if (!(key.k == KsMono{}))
            return -1;
        return key.midx;
    }
    const auto& keys = c.rs[s]->basis(d - 1, RsSign::plus);
    auto it = std::find(keys.begin(), keys.end(), key);
    return it == keys.end() ? -1 : static_cast<int>(it - keys.begin());
}

} // namespace

/* ------------------------------------------------------------ the complex */

int ComplexWindow::dim(int s, int degree) const
{
    if (s < 0 || s > s_max)
        throw destab_error("index: level " + std::to_string(s));
    if (degree > valid_hi[s])
        throw destab_error("window exhausted: level " + std::to_string(s) + " above degree "
                           + std::to_string(valid_hi[s]));
    return basis[s].dim(degree);
}

int ComplexWindow::diff_valid_hi(int s) const
{
    if (s < 1 || s > s_max)
        throw destab_error("index: differential " + std::to_string(s));
    return std::min(valid_hi[s], valid_hi[s - 1]);
}

int ComplexWindow::source_connectivity() const
{
    for (const auto& [d, labels] : source.basis.labels)
        if (!labels.empty())
            return d;
    return INT_MAX;
}

ComplexWindow build_complex(SteenrodCtx& ctx, const ModuleWindow& m, int s_max, int deg_hi,
                            int deg_lo)
{
    if (s_max < 0)
        throw destab_error("index: negative homological length");
    ComplexWindow c;
    c.p = m.p;
    c.s_max = s_max;
    c.deg_lo = deg_lo;
    c.deg_hi = deg_hi;
    c.source = m;
    c.basis.resize(s_max + 1);
    c.diff.resize(s_max + 1);
    c.valid_hi.resize(s_max + 1);
    c.band_lo.resize(s_max + 1);
    c.rs.resize(s_max + 1);

    /* C_0 = M with its own labels; the rank-0 context only serves as the
     * pullback target of d_1 */
    c.rs[0] = std::make_shared<RsContext>(ctx, suspend(m, -1), 0);
    c.valid_hi[0] = std::min(deg_hi, m.hi);
    c.band_lo[0] = std::max(deg_lo, m.lo);
    for (int d = c.band_lo[0]; d <= c.valid_hi[0]; ++d)
        for (const std::string& l : m.basis.at(d))
            c.basis[0].push(d, l);

    for (int s = 1; s <= s_max; ++s) {
        c.rs[s] = std::make_shared<RsContext>(ctx, suspend(m, s - 1), s);
        c.valid_hi[s] = std::min(deg_hi, c.rs[s]->hi() + 1);
        c.band_lo[s] = std::max(deg_lo, c.rs[s]->lo() + 1);
        const ModuleWindow& n = c.rs[s]->underlying();
        for (int d = c.band_lo[s]; d <= c.valid_hi[s]; ++d)
            for (const RsKey& key : c.rs[s]->basis(d - 1, RsSign::plus)) {
                std::string label = rs_key_to_string(key, n);
                if (c.basis[s].index_of(d, label) >= 0)
                    label += "#" + std::to_string(key.mdeg);
                c.basis[s].push(d, label);
            }
    }

    for (int s = 1; s <= s_max; ++s) {
        c.diff[s].p = c.p;
        c.diff[s].rows = c.basis[s - 1];
        c.diff[s].cols = c.basis[s];
        DiffCtx dc(*c.rs[s], *c.rs[s - 1]);
        int top = c.diff_valid_hi(s);
        for (int d = c.band_lo[s]; d <= top; ++d) {
            const auto& keys = c.rs[s]->basis(d - 1, RsSign::plus);
            for (size_t j = 0; j < keys.size(); ++j) {
                RsElt img = dc.apply(RsElt{{keys[j], 1}});
                for (const auto& [okey, v] : img) {
                    int row = stored_row(c, s - 1, d, okey);
                    if (row < 0)
                        throw destab_error("differential leaves R_{s-1}: image key not in the "
                                           "plus basis in degree "
                                           + std::to_string(d));
                    c.diff[s].add(d, row, static_cast<int>(j), v);
                }
            }
        }
    }
    return c;
}

RsElt complex_d(ComplexWindow& c, int s, const RsElt& e)
{
    if (s < 1 || s > c.s_max)
        throw destab_error("index: differential " + std::to_string(s));
    DiffCtx dc(*c.rs[s], *c.rs[s - 1]);
    return dc.apply(e);
}

CheckReport check_complex(const ComplexWindow& c)
{
    CheckReport rep;
    rep.name = "d-squared";
    for (int s = 2; s <= c.s_max; ++s) {
        int top = std::min(c.diff_valid_hi(s), c.diff_valid_hi(s - 1));
        for (int d = c.band_lo[s]; d <= top; ++d) {
            Mat a = c.diff[s].block(d);
            Mat b = c.diff[s - 1].block(d);
            ++rep.checks;
            for (int r = 0; r < b.nrows; ++r)
                for (int col = 0; col < a.ncols; ++col) {
                    long long acc = 0;
                    for (int k = 0; k < b.ncols; ++k)
                        acc += static_cast<long long>(b.at(r, k)) * a.at(k, col);
                    if (norm_mod(acc, c.p) != 0) {
                        rep.fail("d-squared nonzero", s, d,
                                 "entry (" + std::to_string(r) + ", " + std::to_string(col)
                                     + ") = " + std::to_string(norm_mod(acc, c.p)));
                        goto next_degree;
                    }
                }
        next_degree:;
        }
    }
    return rep;
}

/* -------------------------------------------------------------- homology */

int ComplexHomology::dim(int degree) const
{
    if (degree < lo)
        return 0; /* the level vanishes below its band */
    if (degree > hi)
        throw destab_error("window exhausted: homology at level " + std::to_string(s)
                           + " above degree " + std::to_string(hi));
    auto it = at.find(degree);
    return it == at.end() ? 0 : it->second.dim;
}

ComplexHomology homology(ComplexWindow& c, int s)
{
    if (s < 0 || s > c.s_max)
        throw destab_error("index: level " + std::to_string(s));
    ComplexHomology h;
    h.s = s;
    h.lo = c.band_lo[s];
    h.hi = c.valid_hi[s];
    if (s >= 1)
        h.hi = std::min(h.hi, c.valid_hi[s - 1]);
    /* below this the incoming level is provably zero even when not built */
    long long in_floor = level_floor(c.p, s + 1, c.source.lo);
    for (int d = h.lo; d <= h.hi; ++d) {
        int n = c.basis[s].dim(d);
        Mat din(n, 0);
        if (s < c.s_max && d <= c.diff_valid_hi(s + 1))
            din = c.diff[s + 1].block(d);
        else if (d >= in_floor)
            h.kernel_only = true;
        Mat dout = s >= 1 ? c.diff[s].block(d) : Mat(0, n);
        h.at[d] = homology_at(din, dout, c.p);
    }
    return h;
}

std::string homology_tsv(const std::vector<ComplexHomology>& rows)
{
    std::ostringstream out;
    out << "s\tdegree\tdim\n";
    for (const ComplexHomology& h : rows)
        for (int d = h.lo; d <= h.hi; ++d)
            out << h.s << "\t" << d << "\t" << h.dim(d) << "\n";
    return out.str();
}

std::string dims_tsv(const ComplexWindow& c)
{
    std::ostringstream out;
    out << "s\tdegree\tdim\n";
    for (int s = 0; s <= c.s_max; ++s)
        for (int d = c.band_lo[s]; d <= c.valid_hi[s]; ++d)
            out << s << "\t" << d << "\t" << c.basis[s].dim(d) << "\n";
    return out.str();
}

/* --------------------------------------------- short exact sequence checks */

CheckReport verify_ses(SteenrodCtx& ctx, const ModuleWindow& m, int s_max, int deg_hi)
{
    CheckReport rep;
    rep.name = "ses";
    const int p = m.p;
    ModuleWindow sm = suspend(m, 1);
    ComplexWindow cm = build_complex(ctx, m, s_max, deg_hi);
    ComplexWindow cs = build_complex(ctx, sm, s_max, deg_hi + 1);

    /* (1) degreewise dimension identity
     *   dim C_s(M)_D = dim C_s(SM)_{D+1} + dim Phi C_{s-1}(SM)_{D+1} */
    for (int s = 0; s <= s_max; ++s) {
        int top = std::min(cm.valid_hi[s], cs.valid_hi[s] - 1);
        for (int d = cm.band_lo[s]; d <= top; ++d) {
            auto e = phi_preimage(p, d + 1);
            int rhs = cs.basis[s].dim(d + 1);
            if (s >= 1 && e) {
                if (*e > cs.valid_hi[s - 1])
                    break;
                rhs += cs.basis[s - 1].dim(*e);
            }
            ++rep.checks;
            int lhs = cm.basis[s].dim(d);
            if (lhs != rhs)
                rep.fail("ses dimension identity", s, d,
                         std::to_string(lhs) + " != " + std::to_string(rhs));
        }
    }

    /* (2) the projection is onto the twisted part and its kernel has the
     *     dimension of the suspension part */
    for (int s = 1; s <= s_max; ++s) {
        int top = std::min(cm.valid_hi[s], cs.valid_hi[s] - 1);
        for (int d = cm.band_lo[s]; d <= top; ++d) {
            const auto& keys = cm.rs[s]->basis(d - 1, RsSign::plus);
            int cols = static_cast<int>(keys.size());
            auto e = phi_preimage(p, d + 1);
            int q = 0;
            if (e) {
                if (*e > cs.valid_hi[s - 1])
                    break;
                q = cs.basis[s - 1].dim(*e);
            }
            Mat rmat(q, cols);
            bool bad = false;
            for (int j = 0; j < cols && !bad; ++j) {
                RsElt r = cm.rs[s]->rho(RsElt{{keys[j], 1}});
                for (const auto& [okey, v] : r) {
                    int row = e ? stored_row(cs, s - 1, *e, okey) : -1;
                    if (row < 0) {
                        rep.fail("ses projection image outside the twisted part", s, d,
                                 rs_key_to_string(keys[j], cm.rs[s]->underlying()));
                        bad = true;
                        break;
                    }
                    rmat.at(row, j) = v;
                }
            }
            if (bad)
                continue;
            int rank = row_reduce(rmat, p).rank;
            ++rep.checks;
            if (rank != q)
                rep.fail("ses projection not surjective", s, d,
                         "rank " + std::to_string(rank) + " of " + std::to_string(q));
            ++rep.checks;
            if (cols - rank != cs.basis[s].dim(d + 1))
                rep.fail("ses projection kernel differs from the suspension part", s, d,
                         std::to_string(cols - rank) + " != "
                             + std::to_string(cs.basis[s].dim(d + 1)));
        }
    }

    /* (3) the projection is a chain map: rho d = (Phi d') rho */
    for (int s = 2; s <= s_max; ++s) {
        int top = std::min({cm.diff_valid_hi(s), cs.valid_hi[s] - 1});
        for (int d = cm.band_lo[s]; d <= top; ++d) {
            const auto& keys = cm.rs[s]->basis(d - 1, RsSign::plus);
            for (const RsKey& key : keys) {
                RsElt lhs = cm.rs[s - 1]->rho(complex_d(cm, s, RsElt{{key, 1}}));
                RsElt rhs = complex_d(cs, s - 1, cm.rs[s]->rho(RsElt{{key, 1}}));
                ++rep.checks;
                if (!(lhs == rhs))
                    rep.fail("ses projection does not commute with the differential", s, d,
                             rs_key_to_string(key, cm.rs[s]->underlying()));
            }
        }
    }

    /* (4) connecting map at position 1: lift along the projection, push
     *     through d_1, compare with the natural map Phi(SM) -> SM in the
     *     destabilized quotient */
    if (s_max >= 1) {
        SparseMatFp lam = lambda_map(sm);
        int top = std::min({cm.valid_hi[1], cm.valid_hi[0], cs.valid_hi[0] - 1});
        for (int d = cm.band_lo[1]; d <= top; ++d) {
            auto e1 = phi_preimage(p, d + 1);
            if (!e1)
                continue;
            int e = *e1;
            int q = sm.dim(e);
            if (q == 0)
                continue;
            const auto& keys = cm.rs[1]->basis(d - 1, RsSign::plus);
            int cols = static_cast<int>(keys.size());
            Mat rmat(q, cols);
            for (int j = 0; j < cols; ++j) {
                RsElt r = cm.rs[1]->rho(RsElt{{keys[j], 1}});
                for (const auto& [okey, v] : r) {
                    if (!(okey.k == KsMono{}) || okey.mdeg != e - 1)
                        throw destab_error("parity: rank-one projection image misplaced");
                    rmat.at(okey.midx, j) = v;
                }
            }
            Solver lift(rmat, p);
            Mat d1 = cm.diff[1].block(d);
            Mat lamblk = lam.block(d + 1);
            Solver image(cs.diff[1].block(d + 1), p);
            for (int i = 0; i < q; ++i) {
                Vec z(q, 0);
                z[i] = 1;
                auto x = lift.solve(z);
                ++rep.checks;
                if (!x) {
                    rep.fail("connecting: class has no lift", 1, d, sm.basis.at(e)[i]);
                    continue;
                }
                Vec dx = mat_vec(d1, *x, p);
                Vec ly = mat_vec(lamblk, z, p);
                Vec delta(dx.size());
                for (size_t r = 0; r < dx.size(); ++r)
                    delta[r] = sub_mod(dx[r], ly[r], p);
                if (!image.solve(delta))
                    rep.fail("connecting map differs from the natural Phi-map", 1, d,
                             sm.basis.at(e)[i]);
            }
        }
    }
    return rep;
}

/* ------------------------------------------------------ Dickson linearity */

CheckReport verify_dickson_linearity(SteenrodCtx& ctx, const ModuleWindow& m, int s, int t,
                                     int w, int deg_hi)
{
    CheckReport rep;
    rep.name = "dickson-linearity";
    if (s < 1)
        throw destab_error("index: level " + std::to_string(s));
    if (t < 0 || w < 0)
        throw destab_error("index: negative twist parameters");
    const int p = m.p;
    long long pw = powll(p, w);
    if (pw < (t + 1) / 2)
        throw destab_error("twist too small: p^w < floor((t+1)/2)");

    RsContext src(ctx, suspend(m, -t), s);
    RsContext dst(ctx, suspend(m, -(t + 1)), s - 1);
    DiffCtx dc(src, dst);

    for (int j = 0; j < s; ++j) {
        /* q = Q_{s,j}^{p^w} on the source; phi_s(q) = Q_{s-1,j-1}^{p^{w+1}}
         * on the target (zero for j = 0) */
        KsMono q;
        q.b.assign(s - 1, 0);
        if (j == 0)
            q.a = 2 * static_cast<int>(pw);
        else
            q.b[j - 1] = static_cast<int>(pw);
        int qdeg = ks_degree(p, q);
        KsMono phiq;
        phiq.b.assign(s - 2 >= 0 ? s - 2 : 0, 0);
        if (j == 1)
            phiq.a = 2 * static_cast<int>(pw) * p;
        else if (j >= 2)
            phiq.b[j - 2] = static_cast<int>(pw) * p;

        for (int d = src.lo(); d <= src.hi() && d + qdeg <= deg_hi; ++d) {
            for (const RsKey& key : src.basis(d, RsSign::plus)) {
                RsKey qe = key;
                {
                    KsElt prod = ks_multiply(p, KsElt{{key.k, 1}}, KsElt{{q, 1}});
                    if (prod.size() != 1 || prod.begin()->second != 1)
                        throw destab_error("parity: Dickson multiplication is not monomial");
                    qe.k = prod.begin()->first;
                }
                RsElt lhs = dc.apply(RsElt{{qe, 1}});
                RsElt rhs;
                if (j >= 1) {
                    for (const auto& [okey, v] : dc.apply(RsElt{{key, 1}})) {
                        RsKey shifted = okey;
                        KsElt prod = ks_multiply(p, KsElt{{okey.k, 1}}, KsElt{{phiq, 1}});
                        if (prod.size() != 1 || prod.begin()->second != 1)
                            throw destab_error("parity: Dickson multiplication is not monomial");
                        shifted.k = prod.begin()->first;
                        rs_add_scaled(p, rhs, RsElt{{shifted, 1}}, v);
                    }
                }
                ++rep.checks;
                if (!(lhs == rhs))
                    rep.fail("Dickson semilinearity fails", s, d + qdeg,
                             "j = " + std::to_string(j) + ", e = "
                                 + rs_key_to_string(key, src.underlying()) + ", d(qe) = "
                                 + rs_elt_to_string(lhs, dst.underlying()));
            }
        }
    }
    return rep;
}

/* ------------------------------------------------------------ connectivity */

CheckReport connectivity_check(ComplexWindow& c)
{
    CheckReport rep;
    rep.name = "connectivity";
    int conn = c.source_connectivity();
    if (conn == INT_MAX)
        return rep; /* zero module: nothing to bound */
    for (int s = 0; s <= c.s_max; ++s) {
        long long bound = level_floor(c.p, s, conn);
        for (int d = c.band_lo[s]; d <= c.valid_hi[s] && d < bound; ++d) {
            ++rep.checks;
            if (c.basis[s].dim(d) != 0)
                rep.fail("chain level below the connectivity bound", s, d,
                         "dim " + std::to_string(c.basis[s].dim(d)));
        }
        ComplexHomology h = homology(c, s);
        if (h.kernel_only)
            continue; /* upper bounds only; the chain-level check covers these */
        for (int d = h.lo; d <= h.hi && d < bound; ++d) {
            ++rep.checks;
            if (h.dim(d) != 0)
                rep.fail("homology below the connectivity bound", s, d,
                         "dim " + std::to_string(h.dim(d)));
        }
    }
    return rep;
}

/* ------------------------------------------------- kernel at the top level */

CheckReport kernel_characterization(SteenrodCtx& ctx, const ModuleWindow& m, int s, int deg_hi)
{
    CheckReport rep;
    rep.name = "kernel-characterization";
    if (s < 1)
        throw destab_error("index: level " + std::to_string(s));
    ComplexWindow c = build_complex(ctx, suspend(m, -s), s + 1, deg_hi);

    /* incoming differential vanishes */
    for (int d = c.band_lo[s + 1]; d <= c.diff_valid_hi(s + 1); ++d) {
        Mat b = c.diff[s + 1].block(d);
        ++rep.checks;
        for (int r = 0; r < b.nrows; ++r)
            for (int col = 0; col < b.ncols; ++col)
                if (b.at(r, col) != 0) {
                    rep.fail("incoming differential nonzero over a desuspended unstable module",
                             s + 1, d,
                             "entry (" + std::to_string(r) + ", " + std::to_string(col) + ")");
                    r = b.nrows;
                    break;
                }
    }

    /* homology at position s equals the kernel of the outgoing differential */
    ComplexHomology h = homology(c, s);
    for (int d = h.lo; d <= h.hi; ++d) {
        Mat dout = c.diff[s].block(d);
        int kd = dout.ncols - row_reduce(dout, c.p).rank;
        ++rep.checks;
        if (h.dim(d) != kd)
            rep.fail("homology differs from the kernel", s, d,
                     std::to_string(h.dim(d)) + " != " + std::to_string(kd));
    }

    /* the kernel contains a copy of R_s M degreewise */
    RsContext rcm(ctx, m, s);
    int top = std::min({h.hi, rcm.hi(), deg_hi});
    for (int d = std::max(c.band_lo[s], rcm.lo()); d <= top; ++d) {
        int sub = rcm.dim(d, RsSign::plus);
        ++rep.checks;
        if (h.dim(d) < sub)
            rep.fail("kernel smaller than the embedded functor value", s, d,
                     std::to_string(h.dim(d)) + " < " + std::to_string(sub));
    }
    return rep;
}

} // namespace destab
