#pragma once

/* Invariant-theory kernel.
 *
 * Arithmetic in H*(BV_s) = Lambda(u_1..u_s) (x) F_p[v_1..v_s] with its
 * Steenrod action, the Dickson and Mui generators, the localized invariant
 * algebras Gamma_s = Lambda(R_{s,i}) (x) F_p[Q_{s,0}^{+-1}, Q_{s,1..s-1}]
 * together with their coproducts psi_{s,t}, the evaluation maps partial_1 and
 * partial_s, the restriction map phi_s, and the polynomial subalgebras
 * K_s = Lambda(Mtilde_{s,i}) (x) F_p[e_s, Q_{s,1..s-1}].
 *
 * Conventions fixed here (and relied on by the rest of the library):
 *   - exterior masks are stored in ascending index order; products reorder
 *     with the explicit Koszul sign;
 *   - L_s is the determinant with rows v, v^p, ..., v^{p^{s-1}} (ascending
 *     powers) and columns v_1..v_s; this fixes the sign of e_s = L_s^{(p-1)/2};
 *   - the total power st1 follows the normalization st1(x) =
 *     sum_{l,eps} (-1)^{l+eps} e_1^{delta+2l} w^eps (x) beta^eps P^{k-l}(x)
 *     for |x| = 2k+delta (some sources rescale by mu(q) = (h!)^q(-1)^{hq(q-1)/2},
 *     h=(p-1)/2; that normalization is not used anywhere in this library).
 */

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "destab/fp.hpp"
#include "destab/steenrod.hpp"

namespace destab {

/* ---- H*(BV_s): exterior mask over u_1..u_s, exponents of v_1..v_s ---- */

struct BVMono {
    unsigned umask = 0;        // bit i => factor u_{i+1}
    std::vector<int> vexp;     // exponents of v_1..v_s (size = rank)

    auto operator<=>(const BVMono&) const = default;
};

using BVElt = std::map<BVMono, int>;

int bv_rank(const BVMono& m);
int bv_degree(const BVMono& m);

void bv_add_scaled(int p, BVElt& acc, const BVElt& x, int c);
BVElt bv_scale(int p, int c, const BVElt& x);
BVElt bv_multiply(int p, const BVElt& a, const BVElt& b);
BVElt bv_power(int p, const BVElt& a, int n);

/* linear substitution u_i -> sum_j g[i][j] u_{j+1}, v_i -> sum_j g[i][j] v_{j+1}
 * for g an s x s matrix mod p (the natural GL_s action when g is invertible) */
BVElt bv_substitute(int p, const BVElt& x, const std::vector<std::vector<int>>& g);

/* ground-truth Steenrod action: beta is the derivation with beta(u_i) = v_i,
 * beta(v_i) = 0; ppower is P^k via the Cartan rule on generators
 * (P(u_i) = u_i, P(v_i) = v_i + v_i^p) */
BVElt bv_beta(int p, const BVElt& x);
BVElt bv_ppower(int p, int k, const BVElt& x);

/* total power H*(BV_s) -> H*(BV_{s+1}); the new pair (u,v) occupies slot 1
 * and existing variables shift up by one */
BVElt bv_st1(int p, const BVElt& x);

/* generators of GL_s(F_p) as substitution matrices: adjacent transpositions,
 * the transvection v_1 -> v_1 + v_2 (for s >= 2), and the diagonal
 * diag(r, 1, .., 1) with r a primitive root mod p */
std::vector<std::vector<std::vector<int>>> gl_generators(int p, int s);

/* ---- Dickson and Mui generators (concrete classes in H*(BV_s)) ---- */

/* largest rank for which the concrete constructions are enabled */
int invariant_rank_cap(int p);

/* coefficient construction from f_s(X) = prod_{v in V_s^*} (X - v); the
 * ground-truth oracle, enumerating all p^s linear forms */
BVElt dickson_product(int p, int s, int i);

/* Q_{s,i} for 0 <= i <= s (Q_{s,s} = 1); product construction for s <= 2,
 * total-power recursion for larger ranks */
BVElt dickson(int p, int s, int i);

BVElt mui_L(int p, int s);              // Vandermonde determinant, deg 2(p^s-1)/(p-1)
BVElt mui_M(int p, int s, int i);       // u-row determinant with v^{p^i} row omitted
BVElt mui_e(int p, int s);              // e_s = L_s^{(p-1)/2}, deg p^s - 1
BVElt mui_Mtilde(int p, int s, int i);  // Mtilde_{s,i} = M_{s,i} L_s^{(p-3)/2}
BVElt mui_R(int p, int s, int i);       // R_{s,i} = Mtilde_{s,i} e_s, deg 2(p^s-p^i)-1

/* ---- Gamma_s = Lambda(R_{s,i}) (x) F_p[Q_{s,0}^{+-1}, Q_{s,1..s-1}] ---- */

struct GammaMono {
    unsigned rmask = 0;        // bit i => exterior factor R_{s,i}, 0 <= i < s
    int e0 = 0;                // exponent of Q_{s,0} (may be negative)
    std::vector<int> e;        // exponents of Q_{s,1}..Q_{s,s-1} (size = rank-1)

    auto operator<=>(const GammaMono&) const = default;
};

using GammaElt = std::map<GammaMono, int>;

int gamma_rank(const GammaMono& m);
int gamma_degree(int p, const GammaMono& m);
bool gamma_is_odd(const GammaMono& m);   // Koszul parity (# exterior factors)

GammaMono gamma_unit(int s);
GammaMono gamma_Q0(int s, int n);        // Q_{s,0}^n
GammaMono gamma_Q(int s, int j);         // Q_{s,j}, 1 <= j <= s-1
GammaMono gamma_R(int s, int i);         // R_{s,i}, 0 <= i < s
GammaMono gamma_w();                     // w = R_{1,0} Q_{1,0}^{-1} in Gamma_1

void gamma_add_scaled(int p, GammaElt& acc, const GammaElt& x, int c);
GammaElt gamma_scale(int p, int c, const GammaElt& x);
GammaElt gamma_multiply(int p, const GammaElt& a, const GammaElt& b);
GammaElt gamma_power(int p, const GammaElt& a, int n);  // n < 0 needs an invertible monomial

/* monomials of fixed degree in the polynomial part (e0 >= 0 allowed masks) */
std::vector<GammaMono> gamma_poly_monomials(int p, int s, int degree);

/* concrete realization (requires e0 >= 0 and rank within cap) */
BVElt gamma_to_bv(int p, const GammaElt& g);

/* re-expression of a GL_s-invariant element of H*(BV_s) in Gamma-monomials
 * (polynomial part); throws "not invariant" when no expression exists */
GammaElt bv_to_gamma(int p, int s, const BVElt& x);

/* ---- theta_s : dual-algebra monomials -> Gamma_s ----
 * xi_i -> (-1)^i Q_{s,i}/Q_{s,0},  tau_j -> (-1)^{j+1} R_{s,j}/Q_{s,0},
 * extended as an algebra map; Q_{s,i} = 0 for i > s, Q_{s,s} = 1,
 * R_{s,j} = 0 for j >= s. */
GammaElt theta(int p, int s, const MilnorMono& m);
GammaElt theta(int p, int s, const MilnorSum& m);

/* ---- coproducts psi_{s,t} : Gamma_{s+t} -> Gamma_s (x) Gamma_t ---- */

using GammaPair = std::pair<GammaMono, GammaMono>;
using GammaPairElt = std::map<GammaPair, int>;

void gamma_pair_add_scaled(int p, GammaPairElt& acc, const GammaPairElt& x, int c);
GammaPairElt gamma_pair_multiply(int p, const GammaPairElt& a, const GammaPairElt& b);

GammaPairElt psi_coproduct(int p, int s, int t, const GammaMono& g);
GammaPairElt psi_coproduct(int p, int s, int t, const GammaElt& g);

/* ---- evaluation maps ---- */

/* coefficient of w = R_{1,0} Q_{1,0}^{-1} (degree -1) */
int partial_1(const GammaElt& g);

/* how the evaluation is passed across the left tensor factor */
enum class koszul_mode { graded, plain };

/* partial_s = (id (x) partial_1) o psi_{s-1,1} : Gamma_s -> Gamma_{s-1},
 * lowering degree by 1; graded mode applies the sign (-1)^{|gamma'|} when the
 * evaluation passes the left factor (plain mode is a test foil only) */
GammaElt partial_s(int p, int s, const GammaElt& g,
                   koszul_mode mode = koszul_mode::graded);

/* ---- restriction phi_s : F_p[Q_{s,*}] -> F_p[Q_{s-1,*}] ----
 * Q_{s,0} -> 0, Q_{s,j} -> Q_{s-1,j-1}^p; input must lie in the polynomial
 * Dickson part (no R factors, e0 >= 0), else "phi_s domain" */
GammaElt phi_s_map(int p, int s, const GammaElt& q);

/* ---- K_s = Lambda(Mtilde_{s,i}) (x) F_p[e_s, Q_{s,1..s-1}] ---- */

struct KsMono {
    unsigned mmask = 0;        // bit i => exterior factor Mtilde_{s,i}
    int a = 0;                 // exponent of e_s (>= 0 inside K_s proper;
                               //   intermediate values may be any integer)
    std::vector<int> b;        // exponents of Q_{s,1}..Q_{s,s-1} (size = rank-1)

    auto operator<=>(const KsMono&) const = default;
};

using KsElt = std::map<KsMono, int>;

int ks_rank(const KsMono& m);
int ks_degree(int p, const KsMono& m);
/* eigenvalue parity of the determinant character: (|mmask| + a) mod 2
 * (distinct from the Koszul parity, which is |mmask| mod 2 since |e_s| is even) */
int ks_parity(const KsMono& m);

KsMono ks_unit(int s);

void ks_add_scaled(int p, KsElt& acc, const KsElt& x, int c);
KsElt ks_multiply(int p, const KsElt& a, const KsElt& b);

/* Mtilde_I e^a <-> R_I Q_{s,0}^{(a-|I|)/2}: absorption carries no sign;
 * ks_to_gamma throws "parity" when a - |I| is odd */
KsElt gamma_to_ks(const GammaElt& g);
GammaElt ks_to_gamma(const KsElt& k);

/* K_s monomials of fixed degree; parity in {0,1} filters by ks_parity,
 * parity = -1 accepts all */
std::vector<KsMono> ks_monomials(int p, int s, int degree, int parity);

/* concrete realization (requires a >= 0 and rank within cap) */
BVElt ks_to_bv(int p, const KsElt& k);

/* ---- Steenrod action on Gamma_s ----
 * Cartan-multiplicative extension of the polynomial action; negative powers
 * of Q_{s,0} are handled by inverting the total power series
 * P(Q)P(Q^{-1}) = 1 truncated at the requested degree. Generator tables are
 * computed lazily from the ground-truth action in H*(BV_s). */
class GammaActionCtx {
public:
    GammaActionCtx(int p, int s, int deg_cap = 600);

    int p() const { return p_; }
    int rank() const { return s_; }
    int deg_cap() const { return cap_; }

    GammaElt beta(const GammaElt& g) const;
    GammaElt ppower(int k, const GammaElt& g) const;
    /* op = 0 is beta, op = i >= 1 is P^i */
    GammaElt act_letter(int op, const GammaElt& g) const;

private:
    GammaElt beta_mono(const GammaMono& g) const;
    GammaElt ppower_mono(int k, const GammaMono& g) const;
    const GammaElt& gen_ppower(int which, int k) const;   // P^k on a generator
    const GammaElt& gen_beta(int which) const;            // beta on a generator
    const GammaElt& q0_power(int n, int k) const;         // P^k(Q_{s,0}^n), n in Z
    const GammaElt& qj_power(int j, int n, int k) const;  // P^k(Q_{s,j}^n), n >= 0

    int p_;
    int s_;
    int cap_;
    /* generator index: j in 0..s-1 => Q_{s,j}; s+i => R_{s,i} */
    mutable std::map<std::pair<int, int>, GammaElt> gen_p_;
    mutable std::map<int, GammaElt> gen_beta_;
    mutable std::map<std::pair<std::pair<int, int>, int>, GammaElt> pow_p_;
};

/* ---- text format (CLI output) ---- */

std::string bv_mono_to_string(const BVMono& m);
std::string bv_to_string(const BVElt& x);
std::string gamma_mono_to_string(const GammaMono& m);
std::string gamma_to_string(const GammaElt& g);

}  // namespace destab
