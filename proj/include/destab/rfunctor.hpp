#pragma once

/* The functors R_s on module windows.
 *
 * R~_s N is the free K_s-module on St_s(N) inside Gamma_s (x) N.  An element
 * is stored as a combination of pairs (k, m) with k a K_s monomial and m a
 * module basis element, meaning k * St_s(m); the parity split
 *   R_s N  : ks_parity(k) == |m| mod 2      (the "plus" part)
 *   R_s^-N : ks_parity(k) != |m| mod 2      (the "minus" part)
 * is preserved by the Steenrod action.  Stored degree is |k| + p^s |m|.
 *
 * The ambient expansion of (k, m) is
 *   (-1)^{s floor(|m|/2)} sum_B  k e_s^{|m|} theta_s(B*) (x) (B m)
 * over the Milnor basis B, truncated to module degrees <= N.hi (window
 * semantics: higher module degrees are unknown).  The K-part k e_s^{|m|} is
 * written as e_s^{eflag} * (Gamma_s monomial) with eflag in {0,1}; plus-part
 * elements always have eflag 0.  Since theta_s(B*) = 1 exactly when B = 1,
 * the expansion of (k, m) has a unique term of lowest module degree, so
 * expansions are triangular over module degree and from_ambient can recover
 * stored coordinates by a leading-term sweep ("stability violation" when the
 * input is not in the image).
 *
 * Steenrod operations act on the ambient side by the Cartan rule, using the
 * ground-truth Gamma_s action; P^k(e_s) = e_s * E_k with E_k in Gamma_s
 * solved from P^k(e_s^2) = P^k(Q_{s,0}).  Action results are exact on every
 * key whose module degree fits the window; content above is truncated.
 *
 * rho maps k St_s(m) to the cokernel of Sigma^{-1} R_s(Sigma N) -> R_s N,
 * identified with Sigma^{-2} Phi Sigma (R_{s-1} N): for s = 1 the stored
 * coordinates with k in {1, Mtilde_{1,0}} survive (each with a minus sign),
 * and for s >= 2 the element is first rewritten in R_1(R_{s-1}N) coordinates
 * through psi_{1,s-1} and a two-level leading-term sweep. */

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "destab/invariants.hpp"
#include "destab/module_io.hpp"

namespace destab {

/* Degrees read through the iterated Frobenius twist Psi^s. */
struct PsiShift {
    int s = 0;
    int apply(int p, int degree) const;
};

/* ---- stored coordinates: k * St_s(m) ---- */

struct RsKey {
    KsMono k;
    int mdeg = 0; /* module degree of m */
    int midx = 0; /* index in the module basis of that degree */

    auto operator<=>(const RsKey&) const = default;
};

using RsElt = std::map<RsKey, int>;

int rs_degree(int p, int s, const RsKey& key);
/* 0 for the plus part (ks_parity(k) == |m| mod 2), 1 for the minus part */
int rs_parity(const RsKey& key);

void rs_add_scaled(int p, RsElt& acc, const RsElt& x, int c);

/* ---- ambient elements of e_s^eflag Gamma_s (x) N ---- */

struct AmbientKey {
    int eflag = 0; /* 0 or 1: extra exterior-free factor e_s */
    GammaMono g;
    int mdeg = 0;
    int midx = 0;

    auto operator<=>(const AmbientKey&) const = default;
};

using AmbientElt = std::map<AmbientKey, int>;

int ambient_degree(int p, int s, const AmbientKey& key);
void ambient_add_scaled(int p, AmbientElt& acc, const AmbientElt& x, int c);

/* ---- coaction and total powers ---- */

/* psi_N(x) = sum_B B* (x) (B x) over the Milnor basis, returned as the pairs
 * (B, B x) with B x != 0, ordered by degree then basis position.  The default
 * budget -1 means N.hi - |x| (every computable term); larger budgets throw
 * "window exceeded". */
std::vector<std::pair<MilnorMono, ModuleElt>> coaction(SteenrodCtx& ctx, const ModuleWindow& n,
                                                       const ModuleElt& x, int degree_budget = -1);

/* S_s(x) = (theta_s (x) N) psi_N(x); always lands in Gamma_s (x) N (eflag 0) */
AmbientElt s_total(SteenrodCtx& ctx, const ModuleWindow& n, int s, const ModuleElt& x,
                   int degree_budget = -1);

/* St_s(x) = (-1)^{s floor(|x|/2)} e_s^{|x|} S_s(x); eflag = |x| mod 2 */
AmbientElt st_total(SteenrodCtx& ctx, const ModuleWindow& n, int s, const ModuleElt& x,
                    int degree_budget = -1);

/* ---- the functor contexts ---- */

enum class RsSign { plus, minus, full };

class RsContext {
public:
    /* s >= 0; s = 0 is the identity functor (stored keys have the unit
     * K-monomial and coincide with module basis elements). */
    RsContext(SteenrodCtx& ctx, ModuleWindow n, int s);

    int p() const { return p_; }
    int rank() const { return s_; }
    const ModuleWindow& underlying() const { return n_; }
    SteenrodCtx& steenrod() const { return sctx_; }

    /* degree window on which stored coordinates are complete:
     * [p^s * N.lo, p^s * N.hi + p^s - 1] */
    int lo() const;
    int hi() const;

    const std::vector<RsKey>& basis(int degree, RsSign sign);
    int dim(int degree, RsSign sign);

    AmbientElt to_ambient(const RsKey& key);
    AmbientElt to_ambient(const RsElt& e);
    /* leading-term sweep; throws "stability violation" when a is not the
     * truncated expansion of stored coordinates */
    RsElt from_ambient(AmbientElt a);

    /* Cartan action on the ambient side; op 0 = beta, op k >= 1 = P^k.
     * Module-side terms above N.hi are dropped (window truncation). */
    AmbientElt ambient_act(int op, const AmbientElt& a);

    /* action through the ambient embedding; result keys whose module degree
     * fits the window are exact, content above it is truncated away */
    RsElt act(int op, const RsElt& e);
    RsElt act(const std::vector<int>& letters, const RsElt& e);
    RsElt act(const MilnorMono& op, const RsElt& e);

    /* coordinates of e inside R_1(R_{s-1} N): pairs (k_1, w) with k_1 a
     * K_1 monomial and w a rank-(s-1) stored key, meaning k_1 St_1(w).
     * Input must be degree-homogeneous and in the plus part; throws
     * "stability violation" when the rewrite does not close.  s = 1 returns
     * the element itself paired with rank-0 keys. */
    std::map<std::pair<KsMono, RsKey>, int> embed_level1(const RsElt& e);

    /* coordinates of the image in Sigma^{-2} Phi Sigma (R_{s-1} N): the
     * returned RsElt is the rank-(s-1) element X with rho(e) = S^{-2}Phi(SX);
     * a stored key of degree D contributes at target degree
     * phi_degree(D+1) - 2.  Input must lie in the plus part. */
    RsElt rho(const RsElt& e);

    /* explicit window module on [lo, hi] with the induced action; labels are
     * "<K-monomial>*<module label>" */
    ModuleWindow materialize(int lo, int hi, RsSign sign);

    /* P^k(e_s) = e_s * e_power(k) */
    const GammaElt& e_power(int k);

    GammaActionCtx& gamma_ctx();
    const GammaElt& theta_of(const MilnorMono& b);
    const std::vector<std::pair<MilnorMono, ModuleElt>>& coaction_of(int mdeg, int midx);

private:
    void check_rank_positive(const char* where) const;

    SteenrodCtx& sctx_;
    ModuleWindow n_;
    int p_;
    int s_;
    long long ps_; /* p^s */

    std::map<std::pair<int, int>, std::vector<RsKey>> basis_cache_;
    std::map<RsKey, AmbientElt> ambient_cache_;
    std::map<MilnorMono, GammaElt> theta_cache_;
    std::map<std::pair<int, int>, std::vector<std::pair<MilnorMono, ModuleElt>>> coaction_cache_;
    std::vector<GammaElt> e_power_table_;
    std::unique_ptr<GammaActionCtx> gctx_;
    std::unique_ptr<RsContext> lower_; /* rank s-1 over the same module (rho) */
};

/* ---- rank-0 bridge ---- */

RsElt rs_from_module(const ModuleElt& x);
ModuleElt rs_to_module(const ModuleWindow& n, const RsElt& e, int degree);

std::string rs_key_to_string(const RsKey& key, const ModuleWindow& n);

} // namespace destab
