#pragma once

/* The odd-primary Steenrod algebra, degreewise.
 *
 * Words in beta and the P^i are encoded as letter vectors: letter 0 is beta,
 * letter i >= 1 is P^i (P^0 is the unit and is never stored).  An
 * AdmissibleWord is such a vector satisfying the admissibility inequalities;
 * adem_reduce rewrites an arbitrary word into the admissible basis.  The
 * Milnor basis (exterior mask of tau indices, exponent vector of the xi's)
 * gives an independent product via the matrix/multinomial formula, and
 * change_of_basis connects the two in every degree.
 *
 * Modules are carried on finite degree windows [lo, hi]: degrees below lo
 * are genuinely zero, degrees above hi are unknown, and every operation
 * reports the largest window on which its output is exact. */

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "destab/fpla.hpp"

namespace destab {

/* ---------------------------------------------------------------- words */

struct AdmissibleWord {
    std::vector<int> letters; /* 0 = beta, i >= 1 = P^i */

    auto operator<=>(const AdmissibleWord&) const = default;
};

int word_degree(int p, const std::vector<int>& letters);
int word_excess(int p, const std::vector<int>& letters);
bool word_is_admissible(int p, const std::vector<int>& letters);
std::string word_to_string(const std::vector<int>& letters);

using WordSum = std::map<AdmissibleWord, int>;

void add_scaled(WordSum& dst, const WordSum& src, int c, int p);

/* Rewrite an arbitrary word as a linear combination of admissible words. */
WordSum adem_reduce(int p, const std::vector<int>& letters);

/* ---------------------------------------------------------- Milnor basis */

struct MilnorMono {
    std::vector<int> emask; /* ascending tau indices (Q_j part) */
    std::vector<int> r;     /* r[i] = exponent of xi_{i+1}, no trailing zeros */

    auto operator<=>(const MilnorMono&) const = default;
};

int milnor_degree(int p, const MilnorMono& m);

using MilnorSum = std::map<MilnorMono, int>;

void add_scaled(MilnorSum& dst, const MilnorSum& src, int c, int p);

MilnorSum milnor_multiply(int p, const MilnorMono& a, const MilnorMono& b);
MilnorSum milnor_multiply(int p, const MilnorSum& a, const MilnorSum& b);

/* Milnor expansion of a word: fold of milnor_multiply over the letters. */
MilnorSum word_to_milnor(int p, const std::vector<int>& letters);

/* ------------------------------------------------------------- contexts */

struct BasisTables {
    std::vector<AdmissibleWord> adm;
    std::vector<MilnorMono> mil;
    Mat mil_from_adm; /* column j = Milnor coordinates of adm[j] */
    Mat adm_from_mil; /* inverse */
};

/* Shared caches for one prime: admissible/Milnor bases per degree, memoized
 * Adem reduction, change-of-basis tables. */
class SteenrodCtx {
public:
    explicit SteenrodCtx(int p);

    int p() const { return p_; }
    const std::vector<AdmissibleWord>& admissible_basis(int degree);
    const std::vector<MilnorMono>& milnor_basis(int degree);
    const BasisTables& change_of_basis(int degree);
    WordSum adem_reduce(const std::vector<int>& letters);
    WordSum milnor_to_admissible(const MilnorSum& s);
    MilnorSum admissible_to_milnor(const AdmissibleWord& w);

private:
    void grow_words(int degree);

    int p_;
    int words_hi_ = -1;
    std::map<int, std::vector<AdmissibleWord>> words_by_degree_;
    std::map<int, std::vector<MilnorMono>> milnor_by_degree_;
    std::map<int, BasisTables> tables_;
    std::map<std::vector<int>, WordSum> adem_cache_;
};

/* -------------------------------------------------------------- modules */

struct ModuleElt {
    int degree = 0;
    Vec v; /* coordinates in the basis of that degree */
};

/* A module over the algebra known exactly on the degree window [lo, hi]:
 * zero below lo, unknown above hi.  Action tables are per-letter blocks
 * keyed by (op, source degree) with op 0 = beta and op i >= 1 = P^i;
 * blocks whose target degree exceeds hi are omitted by window semantics,
 * and all-zero blocks are never stored. */
struct ModuleWindow {
    int p = 3;
    int lo = 0, hi = -1;
    GradedBasis basis;
    std::map<std::pair<int, int>, Mat> action;
    int suspension_offset = 0;

    int dim(int d) const { return basis.dim(d); }
    int op_degree(int op) const { return op == 0 ? 1 : 2 * op * (p - 1); }
    Mat action_block(int op, int d) const;
    void set_action_block(int op, int d, const Mat& m);
    ModuleElt zero(int degree) const { return ModuleElt{degree, Vec(dim(degree), 0)}; }
    ModuleElt basis_elt(int degree, int index) const;
    bool operator==(const ModuleWindow&) const = default;
};

/* Single-letter action; throws "window exceeded" when the target degree
 * is above hi (the caller must widen the window). */
ModuleElt act_letter(const ModuleWindow& m, int op, const ModuleElt& x);
/* Admissible word, applied letterwise right to left. */
ModuleElt act(const ModuleWindow& m, const AdmissibleWord& w, const ModuleElt& x);
/* Arbitrary word: adem_reduce first, then table lookups. */
ModuleElt act(SteenrodCtx& ctx, const ModuleWindow& m, const std::vector<int>& letters,
              const ModuleElt& x);
/* Milnor basis element, converted through change_of_basis. */
ModuleElt act(SteenrodCtx& ctx, const ModuleWindow& m, const MilnorMono& op,
              const ModuleElt& x);

ModuleWindow suspend(const ModuleWindow& m, int t);

enum class TruncSide { below, above };
/* below keeps degrees < c (a quotient), above keeps degrees >= c (a
 * submodule); actions are restricted accordingly. */
ModuleWindow truncate(const ModuleWindow& m, int c, TruncSide side);

/* Degree doubling-and-twisting functor: basis element x of degree d goes to
 * Phi(x) of degree p*d (d even) or p*(d-1)+2 (d odd); P^i acts through
 * P^{i/p} (p | i, d even) or beta P^{(i-1)/p} (p | i-1, d odd), beta by 0. */
int phi_degree(int p, int d);
ModuleWindow frobenius(const ModuleWindow& m);

/* The natural map Phi M -> M, Phi(x) -> beta^eps P^i x with |x| = 2i+eps.
 * Columns are the Phi M basis restricted to source degrees d with
 * phi_degree(d) <= hi; the explicit-cap overload throws "window exceeded"
 * when the requested sources cannot be evaluated. */
SparseMatFp lambda_map(const ModuleWindow& m);
SparseMatFp lambda_map(const ModuleWindow& m, int src_degree_cap);

/* Quotient by the span of all beta^eps P^i x with eps + 2i > |x| (including
 * identity on negative degrees); the result carries the induced action on a
 * complement basis labelled by surviving basis labels. */
ModuleWindow destabilize(const ModuleWindow& m);

/* ---------------------------------------------------------- free modules */

struct FreeModuleWindow {
    std::vector<std::pair<std::string, int>> generators; /* (name, degree) */
    int lo = 0, hi = -1;

    /* basis = admissible word x generator, labels "<word>*<name>" */
    ModuleWindow materialize(SteenrodCtx& ctx) const;
};

} // namespace destab
