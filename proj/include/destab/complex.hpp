#pragma once

/* The destabilization complex.
 *
 * For a module window M the chain
 *
 *   ... -> C_2 -> C_1 -> C_0 = M,      C_s = Sigma R_s Sigma^{s-1} M,
 *
 * has a degree-preserving differential d_s : C_s -> C_{s-1} computed on the
 * invariant coefficients: expand a stored key through the ambient embedding
 * Gamma_s (x) N, apply the evaluation map partial_s to the Gamma factor, and
 * pull the result back to stored rank-(s-1) coordinates.  H_0 is the
 * destabilized module and the higher homology gives the derived functors of
 * destabilization.
 *
 * Degree bookkeeping: a complex degree D at level s corresponds to a stored
 * R_s degree D - 1 over suspend(M, s-1); the differential preserves D.
 */

#include <climits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "destab/fpla.hpp"
#include "destab/invariants.hpp"
#include "destab/rfunctor.hpp"
#include "destab/steenrod.hpp"

namespace destab {

/* ---- verification reports ---- */

struct CheckFailure {
    std::string reason;
    int s = -1;
    int degree = 0;
    std::string witness;
};

struct CheckReport {
    std::string name;
    long long checks = 0;
    std::vector<CheckFailure> failures;

    bool pass() const { return failures.empty(); }
    void fail(const std::string& reason, int s, int degree, const std::string& witness)
    {
        failures.push_back(CheckFailure{reason, s, degree, witness});
    }
};

/* ---- the complex ---- */

struct ComplexWindow {
    int p = 3;
    int s_max = 0;
    int deg_lo = INT_MIN; /* requested floor; INT_MIN means the natural bottom */
    int deg_hi = -1;
    ModuleWindow source; /* C_0 */

    /* per level 0..s_max, graded by complex degree */
    std::vector<GradedBasis> basis;
    /* diff[s] : C_s -> C_{s-1} for s >= 1 (diff[0] stays empty), assembled on
     * degrees where both level bases are complete */
    std::vector<SparseMatFp> diff;
    /* top complex degree of complete knowledge per level */
    std::vector<int> valid_hi;
    /* below this degree the level is provably zero */
    std::vector<int> band_lo;
    /* rs[0] has rank 0 over suspend(source, -1); rs[s] has rank s over
     * suspend(source, s-1) */
    std::vector<std::shared_ptr<RsContext>> rs;

    int dim(int s, int degree) const;
    /* top degree on which diff[s] is assembled */
    int diff_valid_hi(int s) const;
    /* lowest degree with a nonzero class in the source, INT_MAX when empty */
    int source_connectivity() const;
};

/* Build every level and differential; degrees above deg_hi are not requested
 * and levels are silently capped at their own exactness limit. */
ComplexWindow build_complex(SteenrodCtx& ctx, const ModuleWindow& m, int s_max, int deg_hi,
                            int deg_lo = INT_MIN);

/* Differential on a single level-s element (stored keys over
 * suspend(source, s-1)); the result is a rank-(s-1) element over
 * suspend(source, s-2).  Throws "differential leaves R_{s-1}" when the
 * pullback to stored coordinates fails. */
RsElt complex_d(ComplexWindow& c, int s, const RsElt& e);

/* Entrywise d_{s-1} d_s = 0 on every degree where all three levels are
 * complete. */
CheckReport check_complex(const ComplexWindow& c);

/* ---- homology ---- */

struct ComplexHomology {
    int s = 0;
    /* true when the incoming differential was not available on part of the
     * range: the reported dimensions are upper bounds (cycles only) */
    bool kernel_only = false;
    int lo = 0, hi = -1; /* degree range of valid answers */
    std::map<int, HomologyAt> at;

    /* 0 below lo (the level vanishes there); throws "window exhausted"
     * above hi */
    int dim(int degree) const;
};

ComplexHomology homology(ComplexWindow& c, int s);

/* ---- reports and structural checks ---- */

/* Rows "s<TAB>degree<TAB>dim" with explicit zero rows inside each validity
 * window, preceded by the header line. */
std::string homology_tsv(const std::vector<ComplexHomology>& rows);
std::string dims_tsv(const ComplexWindow& c);

/* The short exact sequence of complexes
 *   0 -> Sigma^{-1} C(Sigma M) -> C(M) -> Sigma^{-1} Phi C(Sigma M)[-1] -> 0:
 * degreewise dimension identity, surjectivity and kernel rank of the
 * projection, compatibility of the projection with the differentials, and at
 * homological position 1 the connecting map against the natural map
 * Phi(Sigma M) -> Sigma M. */
CheckReport verify_ses(SteenrodCtx& ctx, const ModuleWindow& m, int s_max, int deg_hi);

/* Semilinearity of d_s : R_s(S^{-t} M) -> R_{s-1}(S^{-(t+1)} M) over the
 * Dickson algebra: d(Q_{s,j}^{p^w} e) = phi_s(Q_{s,j})^{p^w} d(e) for every
 * basis element e with both sides inside the window.  M must be unstable and
 * p^w >= floor((t+1)/2), else "twist too small". */
CheckReport verify_dickson_linearity(SteenrodCtx& ctx, const ModuleWindow& m, int s, int t,
                                     int w, int deg_hi);

/* Chain-level and homology vanishing below 1 + p^s(|M| + s - 1). */
CheckReport connectivity_check(ComplexWindow& c);

/* For unstable M the homology of C(S^{-s} M) at position s is exactly the
 * kernel of d_s (zero incoming differential), and it contains a copy of
 * R_s M degreewise. */
CheckReport kernel_characterization(SteenrodCtx& ctx, const ModuleWindow& m, int s, int deg_hi);

} // namespace destab
