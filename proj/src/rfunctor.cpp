#include "destab/rfunctor.hpp"

#include <algorithm>
#include <bit>
#include <climits>
#include <tuple>

namespace destab {

namespace {

int fdiv(int a, int b)
{
    /* floor division, b > 0 */
    int q = a / b, r = a % b;
    return (r != 0 && r < 0) ? q - 1 : q;
}

int pmod2(int a) { return ((a % 2) + 2) % 2; }

int sign_pow(int n, int p) { return pmod2(n) == 0 ? 1 : p - 1; }

long long ipow(int b, int e)
{
    long long r = 1;
    for (int i = 0; i < e; ++i)
        r *= b;
    return r;
}

/* k e_s^{mdeg} as e_s^{eflag} * Gamma monomial (eflag in {0,1}) */
std::pair<int, GammaMono> merged_gamma(const KsMono& k, int mdeg)
{
    int nI = std::popcount(k.mmask);
    int am = k.a + mdeg;
    int ef = pmod2(nI + am);
    GammaMono g;
    g.rmask = k.mmask;
    g.e0 = (am - ef - nI) / 2; /* exact: numerator is even */
    g.e = k.b;
    return {ef, g};
}

/* inverse of merged_gamma; false when the coordinates are not in K_s */
bool unmerge_gamma(int ef, const GammaMono& g, int mdeg, KsMono& out)
{
    for (int bj : g.e)
        if (bj < 0)
            return false;
    int nI = std::popcount(g.rmask);
    int am = 2 * g.e0 + ef + nI;
    if (am - mdeg < 0)
        return false;
    out.mmask = g.rmask;
    out.a = am - mdeg;
    out.b = g.e;
    return true;
}

void map_add(int p, std::map<AmbientKey, int>& acc, const AmbientKey& key, long long c)
{
    int v = norm_mod(c, p);
    if (v == 0)
        return;
    auto [it, fresh] = acc.emplace(key, v);
    if (!fresh) {
        it->second = add_mod(it->second, v, p);
        if (it->second == 0)
            acc.erase(it);
    }
}

} // namespace

int PsiShift::apply(int p, int degree) const
{
    for (int i = 0; i < s; ++i)
        degree *= p;
    return degree;
}

int rs_degree(int p, int s, const RsKey& key)
{
    return ks_degree(p, key.k) + static_cast<int>(ipow(p, s)) * key.mdeg;
}

int rs_parity(const RsKey& key) { return pmod2(ks_parity(key.k) + key.mdeg); }

void rs_add_scaled(int p, RsElt& acc, const RsElt& x, int c)
{
    for (const auto& [key, v] : x) {
        auto [it, fresh] = acc.emplace(key, 0);
        it->second = norm_mod(static_cast<long long>(it->second)
                                  + static_cast<long long>(v) * c,
                              p);
        if (it->second == 0)
            acc.erase(it);
    }
}

int ambient_degree(int p, int s, const AmbientKey& key)
{
    int d = key.mdeg;
    if (s >= 1)
        d += key.eflag * (static_cast<int>(ipow(p, s)) - 1) + gamma_degree(p, key.g);
    return d;
}

void ambient_add_scaled(int p, AmbientElt& acc, const AmbientElt& x, int c)
{
    for (const auto& [key, v] : x)
        map_add(p, acc, key, static_cast<long long>(v) * c);
}

/* ------------------------------------------------- coaction, total powers */

std::vector<std::pair<MilnorMono, ModuleElt>> coaction(SteenrodCtx& ctx, const ModuleWindow& n,
                                                       const ModuleElt& x, int degree_budget)
{
    int room = n.hi - x.degree;
    if (degree_budget < 0)
        degree_budget = room;
    if (degree_budget > room)
        throw destab_error("window exceeded: coaction budget " + std::to_string(degree_budget)
                           + " above hi - |x| = " + std::to_string(room));
    std::vector<std::pair<MilnorMono, ModuleElt>> out;
    for (int db = 0; db <= degree_budget; ++db) {
        for (const MilnorMono& b : ctx.milnor_basis(db)) {
            ModuleElt y = act(ctx, n, b, x);
            bool nonzero = false;
            for (int v : y.v)
                if (v != 0)
                    nonzero = true;
            if (nonzero)
                out.emplace_back(b, y);
        }
    }
    return out;
}

AmbientElt s_total(SteenrodCtx& ctx, const ModuleWindow& n, int s, const ModuleElt& x,
                   int degree_budget)
{
    AmbientElt out;
    if (s == 0) {
        for (size_t i = 0; i < x.v.size(); ++i)
            if (x.v[i] != 0)
                out[AmbientKey{0, GammaMono{}, x.degree, static_cast<int>(i)}] =
                    norm_mod(x.v[i], ctx.p());
        return out;
    }
    for (const auto& [b, y] : coaction(ctx, n, x, degree_budget)) {
        GammaElt th = theta(ctx.p(), s, b);
        for (const auto& [g, c] : th)
            for (size_t i = 0; i < y.v.size(); ++i)
                if (y.v[i] != 0)
                    map_add(ctx.p(), out, AmbientKey{0, g, y.degree, static_cast<int>(i)},
                            static_cast<long long>(c) * y.v[i]);
    }
    return out;
}

AmbientElt st_total(SteenrodCtx& ctx, const ModuleWindow& n, int s, const ModuleElt& x,
                    int degree_budget)
{
    int p = ctx.p();
    if (s == 0)
        return s_total(ctx, n, 0, x, degree_budget);
    int d = x.degree;
    int ef = pmod2(d);
    int sigma = sign_pow(s * fdiv(d, 2), p);
    AmbientElt base = s_total(ctx, n, s, x, degree_budget);
    AmbientElt out;
    for (const auto& [key, c] : base) {
        AmbientKey k2 = key;
        k2.eflag = ef;
        k2.g.e0 += (d - ef) / 2;
        map_add(p, out, k2, static_cast<long long>(c) * sigma);
    }
    return out;
}

/* --------------------------------------------------------------- context */

RsContext::RsContext(SteenrodCtx& ctx, ModuleWindow n, int s)
    : sctx_(ctx), n_(std::move(n)), p_(ctx.p()), s_(s), ps_(ipow(ctx.p(), s))
{
    if (s_ < 0)
        throw destab_error("RsContext: negative rank");
    if (n_.p != p_)
        throw destab_error("RsContext: prime mismatch");
}

void RsContext::check_rank_positive(const char* where) const
{
    if (s_ == 0)
        throw destab_error(std::string(where) + ": rank 0");
}

int RsContext::lo() const { return static_cast<int>(ps_) * n_.lo; }
int RsContext::hi() const { return static_cast<int>(ps_) * n_.hi + static_cast<int>(ps_) - 1; }

const std::vector<RsKey>& RsContext::basis(int degree, RsSign sign)
{
    auto cache_key = std::make_pair(degree, static_cast<int>(sign));
    auto it = basis_cache_.find(cache_key);
    if (it != basis_cache_.end())
        return it->second;

    std::vector<RsKey> keys;
    if (s_ == 0) {
        if (sign != RsSign::minus && degree >= n_.lo && degree <= n_.hi)
            for (int i = 0; i < n_.dim(degree); ++i)
                keys.push_back(RsKey{KsMono{}, degree, i});
    } else {
        int dmax = std::min(n_.hi, fdiv(degree, static_cast<int>(ps_)));
        for (int dm = n_.lo; dm <= dmax; ++dm) {
            if (n_.dim(dm) == 0)
                continue;
            int kd = degree - static_cast<int>(ps_) * dm;
            int parity = -1;
            if (sign == RsSign::plus)
                parity = pmod2(dm);
            else if (sign == RsSign::minus)
                parity = 1 - pmod2(dm);
            for (const KsMono& k : ks_monomials(p_, s_, kd, parity))
                for (int i = 0; i < n_.dim(dm); ++i)
                    keys.push_back(RsKey{k, dm, i});
        }
    }
    return basis_cache_.emplace(cache_key, std::move(keys)).first->second;
}

int RsContext::dim(int degree, RsSign sign)
{
    return static_cast<int>(basis(degree, sign).size());
}

const GammaElt& RsContext::theta_of(const MilnorMono& b)
{
    auto it = theta_cache_.find(b);
    if (it != theta_cache_.end())
        return it->second;
    return theta_cache_.emplace(b, theta(p_, s_, b)).first->second;
}

const std::vector<std::pair<MilnorMono, ModuleElt>>& RsContext::coaction_of(int mdeg, int midx)
{
    auto key = std::make_pair(mdeg, midx);
    auto it = coaction_cache_.find(key);
    if (it != coaction_cache_.end())
        return it->second;
    auto terms = coaction(sctx_, n_, n_.basis_elt(mdeg, midx));
    return coaction_cache_.emplace(key, std::move(terms)).first->second;
}

AmbientElt RsContext::to_ambient(const RsKey& key)
{
    auto it = ambient_cache_.find(key);
    if (it != ambient_cache_.end())
        return it->second;

    AmbientElt out;
    if (s_ == 0) {
        out[AmbientKey{0, GammaMono{}, key.mdeg, key.midx}] = 1;
    } else {
        int sigma = sign_pow(s_ * fdiv(key.mdeg, 2), p_);
        auto [ef, gk] = merged_gamma(key.k, key.mdeg);
        GammaElt gk_elt{{gk, 1}};
        for (const auto& [b, y] : coaction_of(key.mdeg, key.midx)) {
            GammaElt prod = gamma_multiply(p_, gk_elt, theta_of(b));
            for (const auto& [g, c] : prod)
                for (size_t i = 0; i < y.v.size(); ++i)
                    if (y.v[i] != 0)
                        map_add(p_, out, AmbientKey{ef, g, y.degree, static_cast<int>(i)},
                                static_cast<long long>(c) * sigma * y.v[i]);
        }
    }
    ambient_cache_.emplace(key, out);
    return out;
}

AmbientElt RsContext::to_ambient(const RsElt& e)
{
    AmbientElt out;
    for (const auto& [key, c] : e)
        ambient_add_scaled(p_, out, to_ambient(key), c);
    return out;
}

RsElt RsContext::from_ambient(AmbientElt a)
{
    RsElt out;
    while (!a.empty()) {
        int dm = INT_MAX;
        for (const auto& [key, c] : a)
            dm = std::min(dm, key.mdeg);
        std::vector<std::pair<AmbientKey, int>> slice;
        for (const auto& [key, c] : a)
            if (key.mdeg == dm)
                slice.emplace_back(key, c);
        int sigma = sign_pow(s_ * fdiv(dm, 2), p_);
        for (const auto& [key, c] : slice) {
            RsKey rk;
            rk.mdeg = key.mdeg;
            rk.midx = key.midx;
            if (s_ == 0) {
                if (key.eflag != 0 || key.g != GammaMono{})
                    throw destab_error("stability violation: rank-0 leftover");
                rk.k = KsMono{};
            } else if (!unmerge_gamma(key.eflag, key.g, dm, rk.k)) {
                throw destab_error("stability violation: leading term "
                                   + gamma_mono_to_string(key.g) + " at module degree "
                                   + std::to_string(dm) + " is outside K_s St_s");
            }
            int coeff = mul_mod(c, sigma, p_);
            rs_add_scaled(p_, out, RsElt{{rk, 1}}, coeff);
            ambient_add_scaled(p_, a, to_ambient(rk), neg_mod(coeff, p_));
        }
        /* the processed slice must be gone now */
        for (const auto& [key, c] : slice)
            if (a.count(key))
                throw destab_error("stability violation: leading slice did not cancel");
    }
    return out;
}

const GammaElt& RsContext::e_power(int k)
{
    check_rank_positive("e_power");
    if (e_power_table_.empty())
        e_power_table_.push_back(GammaElt{{gamma_unit(s_), 1}});
    /* from P^j(e^2) = P^j(Q_{s,0}) and the Cartan rule:
     * 2 E_j = Q_{s,0}^{-1} P^j(Q_{s,0}) - sum_{0<i<j} E_i E_{j-i} */
    int inv2 = inv_mod(2, p_);
    GammaElt q0inv{{gamma_Q0(s_, -1), 1}};
    while (static_cast<int>(e_power_table_.size()) <= k) {
        int j = static_cast<int>(e_power_table_.size());
        GammaElt pq = gamma_ctx().ppower(j, GammaElt{{gamma_Q0(s_, 1), 1}});
        GammaElt acc = gamma_multiply(p_, q0inv, pq);
        for (int i = 1; i < j; ++i)
            gamma_add_scaled(p_, acc,
                             gamma_multiply(p_, e_power_table_[i], e_power_table_[j - i]),
                             p_ - 1);
        e_power_table_.push_back(gamma_scale(p_, inv2, acc));
    }
    return e_power_table_[k];
}

GammaActionCtx& RsContext::gamma_ctx()
{
    check_rank_positive("gamma_ctx");
    if (!gctx_)
        gctx_ = std::make_unique<GammaActionCtx>(p_, s_);
    return *gctx_;
}

AmbientElt RsContext::ambient_act(int op, const AmbientElt& a)
{
    AmbientElt out;
    for (const auto& [key, c] : a) {
        ModuleElt x = n_.basis_elt(key.mdeg, key.midx);
        if (s_ == 0) {
            int od = n_.op_degree(op);
            if (key.mdeg + od <= n_.hi) {
                ModuleElt y = act_letter(n_, op, x);
                for (size_t i = 0; i < y.v.size(); ++i)
                    if (y.v[i] != 0)
                        map_add(p_, out, AmbientKey{0, GammaMono{}, y.degree, static_cast<int>(i)},
                                static_cast<long long>(c) * y.v[i]);
            }
            continue;
        }
        GammaElt gelt{{key.g, 1}};
        if (op == 0) {
            /* beta(e^ef g (x) m) = e^ef beta(g) (x) m
             *                      + (-1)^{|g|_Koszul} e^ef g (x) beta(m) */
            for (const auto& [g2, c2] : gamma_ctx().beta(gelt))
                map_add(p_, out, AmbientKey{key.eflag, g2, key.mdeg, key.midx},
                        static_cast<long long>(c) * c2);
            if (key.mdeg + 1 <= n_.hi) {
                ModuleElt y = act_letter(n_, 0, x);
                int sg = gamma_is_odd(key.g) ? p_ - 1 : 1;
                for (size_t i = 0; i < y.v.size(); ++i)
                    if (y.v[i] != 0)
                        map_add(p_, out, AmbientKey{key.eflag, key.g, y.degree, static_cast<int>(i)},
                                static_cast<long long>(c) * sg * y.v[i]);
            }
        } else {
            int amax = key.eflag ? op : 0;
            for (int aa = 0; aa <= amax; ++aa) {
                for (int bb = 0; aa + bb <= op; ++bb) {
                    int cc = op - aa - bb;
                    ModuleElt y;
                    if (cc == 0) {
                        y = x;
                    } else {
                        if (key.mdeg + 2 * cc * (p_ - 1) > n_.hi)
                            continue; /* above the window: truncated away */
                        y = act_letter(n_, cc, x);
                    }
                    GammaElt gpart = gamma_ctx().ppower(bb, gelt);
                    if (aa > 0)
                        gpart = gamma_multiply(p_, e_power(aa), gpart);
                    for (const auto& [g2, c2] : gpart)
                        for (size_t i = 0; i < y.v.size(); ++i)
                            if (y.v[i] != 0)
                                map_add(p_, out,
                                        AmbientKey{key.eflag, g2, y.degree, static_cast<int>(i)},
                                        static_cast<long long>(c) * c2 * y.v[i]);
                }
            }
        }
    }
    return out;
}

RsElt RsContext::act(int op, const RsElt& e) { return act(std::vector<int>{op}, e); }

/* Results are exact for keys whose module degree fits the window; content
 * that would sit above the module window is truncated away, matching the
 * window's exact-range contract. */
RsElt RsContext::act(const std::vector<int>& letters, const RsElt& e)
{
    if (e.empty())
        return {};
    AmbientElt a = to_ambient(e);
    for (auto it = letters.rbegin(); it != letters.rend(); ++it)
        a = ambient_act(*it, a);
    return from_ambient(std::move(a));
}

RsElt RsContext::act(const MilnorMono& op, const RsElt& e)
{
    if (e.empty())
        return {};
    AmbientElt a0 = to_ambient(e);
    AmbientElt acc;
    WordSum ws = sctx_.milnor_to_admissible(MilnorSum{{op, 1}});
    for (const auto& [w, c] : ws) {
        AmbientElt a = a0;
        for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it)
            a = ambient_act(*it, a);
        ambient_add_scaled(p_, acc, a, c);
    }
    return from_ambient(std::move(acc));
}

/* ------------------------------------------------------------------ rho */

std::map<std::pair<KsMono, RsKey>, int> RsContext::embed_level1(const RsElt& e)
{
    check_rank_positive("embed_level1");
    std::map<std::pair<KsMono, RsKey>, int> coords;
    if (e.empty())
        return coords;
    int dtot = rs_degree(p_, s_, e.begin()->first);
    for (const auto& [key, c] : e) {
        if (rs_parity(key) != 0)
            throw destab_error("parity: level-1 rewrite needs a plus-part element");
        if (rs_degree(p_, s_, key) != dtot)
            throw destab_error("embed_level1: input not degree-homogeneous");
    }

    if (s_ == 1) {
        for (const auto& [key, c] : e)
            coords[std::make_pair(key.k, RsKey{KsMono{}, key.mdeg, key.midx})] = c;
        return coords;
    }

    if (!lower_)
        lower_ = std::make_unique<RsContext>(sctx_, n_, s_ - 1);
    int psl = static_cast<int>(ps_) / p_; /* p^{s-1} */

    {
        if (fdiv(dtot, static_cast<int>(ps_)) > n_.hi)
            throw destab_error("window exceeded: level-1 rewrite at degree "
                               + std::to_string(dtot));
        const RsElt& part = e;
        int kappa_max = fdiv(dtot, p_);
        int floor_g1 = dtot - kappa_max;

        /* T : Gamma_1 (x) Gamma_{s-1} (x) N, keyed for prefix scans */
        using TKey = std::tuple<GammaMono, int, int, GammaMono>; /* (g', dm, idx, g1) */
        std::map<TKey, int> t;
        auto t_add = [&](const GammaMono& gp, int dm, int idx, const GammaMono& g1,
                         long long c) {
            if (gamma_degree(p_, g1) < floor_g1)
                return;
            int v = norm_mod(c, p_);
            if (v == 0)
                return;
            TKey tk{gp, dm, idx, g1};
            auto [it, fresh] = t.emplace(tk, v);
            if (!fresh) {
                it->second = add_mod(it->second, v, p_);
                if (it->second == 0)
                    t.erase(it);
            }
        };

        /* transport along the twisted coproduct: after the plain split the
         * total power also hits the lower-rank factor, multiplying theta
         * values into the rank-one slot */
        GammaActionCtx gact(p_, s_ - 1);
        for (const auto& [akey, c] : to_ambient(part)) {
            if (akey.eflag != 0)
                throw destab_error("parity: rho ambient has an e-factor");
            for (const auto& [pr, cp] : psi_coproduct(p_, 1, s_ - 1, akey.g)) {
                long long base = static_cast<long long>(c) * cp;
                int g1deg = gamma_degree(p_, pr.first);
                for (int ef = 0; ef <= 1; ++ef) {
                    for (int r = 0;; ++r) {
                        if (g1deg - ef - 2 * r * (p_ - 1) < floor_g1)
                            break;
                        if (ef == 0 && r == 0) {
                            t_add(pr.second, akey.mdeg, akey.midx, pr.first, base);
                            continue;
                        }
                        GammaMono wq;
                        wq.rmask = ef ? 1u : 0u;
                        wq.e0 = -r - ef;
                        GammaElt gfac =
                            gamma_multiply(p_, GammaElt{{pr.first, 1}}, GammaElt{{wq, 1}});
                        if (gfac.empty())
                            continue;
                        MilnorMono b;
                        if (ef)
                            b.emask = {0};
                        if (r > 0)
                            b.r = {r};
                        GammaElt y;
                        WordSum ws = sctx_.milnor_to_admissible(MilnorSum{{b, 1}});
                        for (const auto& [word, cw] : ws) {
                            GammaElt z{{pr.second, 1}};
                            for (auto it2 = word.letters.rbegin();
                                 it2 != word.letters.rend(); ++it2)
                                z = gact.act_letter(*it2, z);
                            gamma_add_scaled(p_, y, z, cw);
                        }
                        long long tw = base * sign_pow(ef + r, p_);
                        for (const auto& [g1b, cg] : gfac)
                            for (const auto& [gpb, cy] : y)
                                t_add(gpb, akey.mdeg, akey.midx, g1b,
                                      tw * cg * cy);
                    }
                }
            }
        }

        GammaMono g1_sentinel;
        g1_sentinel.e0 = INT_MIN;

        for (int d = psl * n_.lo; d <= kappa_max; ++d) {
            int sd = sign_pow(fdiv(d, 2), p_);
            for (const RsKey& w : lower_->basis(d, RsSign::plus)) {
                auto [efw, gw] = merged_gamma(w.k, w.mdeg);
                if (efw != 0)
                    throw destab_error("parity: minus-part leading key in rho sweep");
                /* collect the level-1 coefficients sitting on w's leading key */
                std::vector<std::pair<GammaMono, int>> matches;
                for (auto it = t.lower_bound(TKey{gw, w.mdeg, w.midx, g1_sentinel});
                     it != t.end(); ++it) {
                    const auto& [tgp, tdm, tidx, tg1] = it->first;
                    if (tgp != gw || tdm != w.mdeg || tidx != w.midx)
                        break;
                    matches.emplace_back(tg1, it->second);
                }
                if (matches.empty())
                    continue;
                int sw = sign_pow((s_ - 1) * fdiv(w.mdeg, 2), p_);
                AmbientElt xw = lower_->to_ambient(w);
                for (const auto& [g1, cm] : matches) {
                    KsMono k1;
                    if (!unmerge_gamma(0, g1, d, k1))
                        throw destab_error("stability violation: rho coordinate "
                                           + gamma_mono_to_string(g1)
                                           + " is outside K_1 St_1");
                    if (pmod2(ks_parity(k1)) != pmod2(d))
                        throw destab_error("parity: rho coordinate in the minus part");
                    int coeff = mul_mod(mul_mod(cm, sw, p_), sd, p_);
                    int& slot = coords[std::make_pair(k1, w)];
                    slot = add_mod(slot, coeff, p_);

                    /* subtract coeff * (the full expansion of k1 St_1(w)) */
                    int g1deg = gamma_degree(p_, g1);
                    for (int ef = 0; ef <= 1; ++ef) {
                        for (int r = 0;; ++r) {
                            if (g1deg - ef - 2 * r * (p_ - 1) < floor_g1)
                                break;
                            GammaMono wq;
                            wq.rmask = ef ? 1u : 0u;
                            wq.e0 = -r - ef;
                            GammaElt gfac =
                                gamma_multiply(p_, GammaElt{{g1, 1}}, GammaElt{{wq, 1}});
                            if (gfac.empty())
                                continue;
                            MilnorMono b;
                            if (ef)
                                b.emask = {0};
                            if (r > 0)
                                b.r = {r};
                            AmbientElt y;
                            if (b.emask.empty() && b.r.empty()) {
                                y = xw;
                            } else {
                                WordSum ws = sctx_.milnor_to_admissible(MilnorSum{{b, 1}});
                                for (const auto& [word, cw] : ws) {
                                    AmbientElt z = xw;
                                    for (auto it2 = word.letters.rbegin();
                                         it2 != word.letters.rend(); ++it2)
                                        z = lower_->ambient_act(*it2, z);
                                    ambient_add_scaled(p_, y, z, cw);
                                }
                            }
                            long long outer = static_cast<long long>(coeff)
                                              * sign_pow(fdiv(d, 2) + ef + r, p_);
                            for (const auto& [g1b, cg] : gfac)
                                for (const auto& [ykey, cy] : y) {
                                    if (ykey.eflag != 0)
                                        throw destab_error(
                                            "parity: minus-part term in rho expansion");
                                    t_add(ykey.g, ykey.mdeg, ykey.midx, g1b,
                                          -outer * cg * cy);
                                }
                        }
                    }
                }
            }
        }
        if (!t.empty())
            throw destab_error("stability violation: level-1 rewrite left a residual");
    }
    for (auto it = coords.begin(); it != coords.end();)
        it = it->second == 0 ? coords.erase(it) : std::next(it);
    return coords;
}

RsElt RsContext::rho(const RsElt& e)
{
    check_rank_positive("rho");
    for (const auto& [key, c] : e)
        if (rs_parity(key) != 0)
            throw destab_error("parity: rho needs a plus-part element");

    if (s_ == 1) {
        /* cokernel coordinates: St_1(m) for even m, Mtilde_{1,0} St_1(m) for
         * odd m, each sent to -m; everything else is suspension image */
        RsElt out;
        for (const auto& [key, c] : e) {
            if (key.k.a != 0)
                continue;
            bool even = pmod2(key.mdeg) == 0;
            if ((key.k.mmask == 0 && even) || (key.k.mmask == 1 && !even))
                rs_add_scaled(p_, out, RsElt{{RsKey{KsMono{}, key.mdeg, key.midx}, 1}},
                              mul_mod(c, p_ - 1, p_));
        }
        return out;
    }

    /* group by total degree, rewrite each group in R_1(R_{s-1}) coordinates,
     * and keep the two cokernel shapes of the outer rank-one factor */
    std::map<int, RsElt> groups;
    for (const auto& [key, c] : e)
        groups[rs_degree(p_, s_, key)][key] = c;
    RsElt out;
    for (const auto& [dtot, part] : groups) {
        for (const auto& [ck, c] : embed_level1(part)) {
            const auto& [k1, w] = ck;
            if (k1.a != 0)
                continue;
            int d = rs_degree(p_, s_ - 1, w);
            bool even = pmod2(d) == 0;
            if ((k1.mmask == 0 && even) || (k1.mmask == 1 && !even))
                rs_add_scaled(p_, out, RsElt{{w, 1}}, mul_mod(c, p_ - 1, p_));
        }
    }
    return out;
}

/* ----------------------------------------------------------- materialize */

ModuleWindow RsContext::materialize(int win_lo, int win_hi, RsSign sign)
{
    if (win_lo < lo() || win_hi > hi())
        throw destab_error("window exceeded: materialize outside ["
                           + std::to_string(lo()) + ", " + std::to_string(hi()) + "]");
    ModuleWindow w;
    w.p = p_;
    w.lo = win_lo;
    w.hi = win_hi;
    std::map<RsKey, std::pair<int, int>> position;
    for (int d = win_lo; d <= win_hi; ++d)
        for (const RsKey& key : basis(d, sign)) {
            position[key] = {d, w.dim(d)};
            std::string label = rs_key_to_string(key, n_);
            if (w.basis.index_of(d, label) >= 0)
                label += "#" + std::to_string(key.mdeg);
            w.basis.push(d, label);
        }
    int span = win_hi - win_lo;
    std::vector<int> ops;
    ops.push_back(0);
    for (int k = 1; 2 * k * (p_ - 1) <= span; ++k)
        ops.push_back(k);
    for (int op : ops) {
        int od = op == 0 ? 1 : 2 * op * (p_ - 1);
        for (int d = win_lo; d + od <= win_hi; ++d) {
            const auto& src = basis(d, sign);
            if (src.empty() || w.dim(d + od) == 0)
                continue;
            Mat block(w.dim(d + od), static_cast<int>(src.size()));
            bool nonzero = false;
            for (size_t j = 0; j < src.size(); ++j) {
                RsElt img = act(op, RsElt{{src[j], 1}});
                for (const auto& [okey, c] : img) {
                    auto it = position.find(okey);
                    if (it == position.end())
                        throw destab_error("materialize: action left the requested part");
                    block.at(it->second.second, static_cast<int>(j)) = c;
                    nonzero = true;
                }
            }
            if (nonzero)
                w.set_action_block(op, d, block);
        }
    }
    return w;
}

/* -------------------------------------------------------- rank-0 bridge */

RsElt rs_from_module(const ModuleElt& x)
{
    RsElt out;
    for (size_t i = 0; i < x.v.size(); ++i)
        if (x.v[i] != 0)
            out[RsKey{KsMono{}, x.degree, static_cast<int>(i)}] = x.v[i];
    return out;
}

ModuleElt rs_to_module(const ModuleWindow& n, const RsElt& e, int degree)
{
    ModuleElt out = n.zero(degree);
    for (const auto& [key, c] : e) {
        if (key.k != KsMono{} || key.mdeg != degree)
            throw destab_error("rs_to_module: not a rank-0 element of degree "
                               + std::to_string(degree));
        out.v[key.midx] = add_mod(out.v[key.midx], c, n.p);
    }
    return out;
}

std::string rs_key_to_string(const RsKey& key, const ModuleWindow& n)
{
    std::string s;
    bool unit = true;
    if (key.k.mmask != 0) {
        s += "M{";
        bool first = true;
        for (int i = 0; i < 32; ++i)
            if (key.k.mmask & (1u << i)) {
                if (!first)
                    s += ",";
                s += std::to_string(i);
                first = false;
            }
        s += "}";
        unit = false;
    }
    if (key.k.a != 0) {
        if (!s.empty())
            s += " ";
        s += "e^" + std::to_string(key.k.a);
        unit = false;
    }
    bool anyb = false;
    for (int bj : key.k.b)
        if (bj != 0)
            anyb = true;
    if (anyb) {
        if (!s.empty())
            s += " ";
        s += "Q^(";
        for (size_t j = 0; j < key.k.b.size(); ++j) {
            if (j)
                s += ",";
            s += std::to_string(key.k.b[j]);
        }
        s += ")";
        unit = false;
    }
    if (unit)
        s = "1";
    return s + "*" + n.basis.at(key.mdeg)[key.midx];
}

} // namespace destab
