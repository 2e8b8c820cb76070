#include "destab/steenrod.hpp"

#include <algorithm>

namespace destab {

namespace {

long long ipow(long long b, int e)
{
    long long r = 1;
    while (e-- > 0)
        r *= b;
    return r;
}

} // namespace

/* ------------------------------------------------------------------ words */

int word_degree(int p, const std::vector<int>& letters)
{
    int d = 0;
    for (int l : letters)
        d += l == 0 ? 1 : 2 * l * (p - 1);
    return d;
}

int word_excess(int p, const std::vector<int>& letters)
{
    /* e(beta^e0 P^s1 ...) = e0 + 2 s1 - |tail after P^s1| */
    size_t i = 0;
    int eps0 = 0;
    if (i < letters.size() && letters[i] == 0) {
        eps0 = 1;
        ++i;
    }
    if (i == letters.size())
        return eps0;
    int s1 = letters[i];
    int tail = 0;
    for (size_t j = i + 1; j < letters.size(); ++j)
        tail += letters[j] == 0 ? 1 : 2 * letters[j] * (p - 1);
    return eps0 + 2 * s1 - tail;
}

bool word_is_admissible(int p, const std::vector<int>& letters)
{
    for (size_t i = 0; i < letters.size(); ++i) {
        if (letters[i] == 0) {
            if (i + 1 < letters.size() && letters[i + 1] == 0)
                return false; /* beta^2 */
            continue;
        }
        /* compare with the next P, with an optional beta between */
        size_t j = i + 1;
        int eps = 0;
        if (j < letters.size() && letters[j] == 0) {
            eps = 1;
            ++j;
        }
        if (j < letters.size())
            if (letters[i] < p * letters[j] + eps)
                return false;
    }
    return true;
}

std::string word_to_string(const std::vector<int>& letters)
{
    if (letters.empty())
        return "1";
    std::string s;
    for (int l : letters)
        s += l == 0 ? "b" : "P" + std::to_string(l);
    return s;
}

void add_scaled(WordSum& dst, const WordSum& src, int c, int p)
{
    for (const auto& [w, v] : src) {
        int nv = add_mod(dst.count(w) ? dst[w] : 0, mul_mod(v, c, p), p);
        if (nv == 0)
            dst.erase(w);
        else
            dst[w] = nv;
    }
}

namespace {

/* Adem rewriting: find the leftmost inadmissible adjacent pair and expand.
 * Recursion bottoms out on admissible words; cache optional. */
WordSum adem_core(int p, const std::vector<int>& letters,
                  std::map<std::vector<int>, WordSum>* cache)
{
    /* kill beta^2 */
    for (size_t i = 0; i + 1 < letters.size(); ++i)
        if (letters[i] == 0 && letters[i + 1] == 0)
            return {};

    if (cache) {
        auto it = cache->find(letters);
        if (it != cache->end())
            return it->second;
    }

    /* locate leftmost violation */
    size_t vi = letters.size();
    bool with_beta = false;
    for (size_t i = 0; i < letters.size(); ++i) {
        if (letters[i] == 0)
            continue;
        size_t j = i + 1;
        int eps = 0;
        if (j < letters.size() && letters[j] == 0) {
            eps = 1;
            ++j;
        }
        if (j < letters.size() && letters[i] < p * letters[j] + eps) {
            vi = i;
            with_beta = eps == 1;
            break;
        }
    }

    WordSum out;
    if (vi == letters.size()) {
        out[AdmissibleWord{letters}] = 1;
        if (cache)
            (*cache)[letters] = out;
        return out;
    }

    int a = letters[vi];
    int b = letters[vi + (with_beta ? 2 : 1)];
    std::vector<int> prefix(letters.begin(), letters.begin() + static_cast<long>(vi));
    std::vector<int> suffix(letters.begin() + static_cast<long>(vi) + (with_beta ? 3 : 2),
                            letters.end());

    auto emit = [&](std::vector<int> mid, int coeff) {
        if (coeff == 0)
            return;
        std::vector<int> w = prefix;
        w.insert(w.end(), mid.begin(), mid.end());
        w.insert(w.end(), suffix.begin(), suffix.end());
        add_scaled(out, adem_core(p, w, cache), coeff, p);
    };

    if (!with_beta) {
        /* P^a P^b, a < pb */
        for (int t = 0; t <= a / p; ++t) {
            int c = binom_mod(static_cast<long long>(p - 1) * (b - t) - 1, a - p * t, p);
            if (t % 2 != a % 2)
                c = neg_mod(c, p);
            std::vector<int> mid{a + b - t};
            if (t > 0)
                mid.push_back(t);
            emit(mid, c);
        }
    } else {
        /* P^a beta P^b, a <= pb */
        for (int t = 0; t <= a / p; ++t) {
            int c = binom_mod(static_cast<long long>(p - 1) * (b - t), a - p * t, p);
            if (t % 2 != a % 2)
                c = neg_mod(c, p);
            std::vector<int> mid{0, a + b - t};
            if (t > 0)
                mid.push_back(t);
            emit(mid, c);
        }
        for (int t = 0; t <= (a - 1) / p; ++t) {
            int c = binom_mod(static_cast<long long>(p - 1) * (b - t) - 1, a - p * t - 1, p);
            if (t % 2 == a % 2)
                c = neg_mod(c, p); /* overall minus sign */
            std::vector<int> mid{a + b - t, 0};
            if (t > 0)
                mid.push_back(t);
            emit(mid, c);
        }
    }
    if (cache)
        (*cache)[letters] = out;
    return out;
}

} // namespace

WordSum adem_reduce(int p, const std::vector<int>& letters)
{
    return adem_core(p, letters, nullptr);
}

/* ----------------------------------------------------------- Milnor basis */

int milnor_degree(int p, const MilnorMono& m)
{
    long long d = 0;
    for (int j : m.emask)
        d += 2 * ipow(p, j) - 1;
    for (size_t i = 0; i < m.r.size(); ++i)
        d += static_cast<long long>(m.r[i]) * 2 * (ipow(p, static_cast<int>(i) + 1) - 1);
    return static_cast<int>(d);
}

void add_scaled(MilnorSum& dst, const MilnorSum& src, int c, int p)
{
    for (const auto& [m, v] : src) {
        int nv = add_mod(dst.count(m) ? dst[m] : 0, mul_mod(v, c, p), p);
        if (nv == 0)
            dst.erase(m);
        else
            dst[m] = nv;
    }
}

namespace {

void trim(std::vector<int>& r)
{
    while (!r.empty() && r.back() == 0)
        r.pop_back();
}

/* product of the xi-parts P(R) * P(S) by the matrix/multinomial formula */
std::map<std::vector<int>, int> p_part_product(int p, const std::vector<int>& R,
                                               const std::vector<int>& S)
{
    std::map<std::vector<int>, int> out;
    int nr = static_cast<int>(R.size());
    int ns = static_cast<int>(S.size());

    /* choose x_{ij} for i,j >= 1 (row i eats p^j * x_{ij} from r_i, column j
     * eats x_{ij} from s_j); leftovers become x_{i0} and x_{0j} */
    std::vector<std::vector<int>> x(static_cast<size_t>(nr) + 1,
                                    std::vector<int>(static_cast<size_t>(ns) + 1, 0));
    std::vector<int> rem_r(R), rem_s(S);

    auto finish = [&]() {
        /* t_n = sum over i+j = n, coefficient = product of multinomials */
        int coeff = 1;
        std::vector<int> T(static_cast<size_t>(nr + ns), 0);
        for (int n = 1; n <= nr + ns && coeff != 0; ++n) {
            std::vector<long long> parts;
            long long tn = 0;
            for (int i = 0; i <= n; ++i) {
                int j = n - i;
                if (i > nr || j > ns || j < 0)
                    continue;
                int v = i == 0 ? rem_s[static_cast<size_t>(j) - 1]
                               : (j == 0 ? rem_r[static_cast<size_t>(i) - 1]
                                         : x[static_cast<size_t>(i)][static_cast<size_t>(j)]);
                if (v > 0)
                    parts.push_back(v);
                tn += v;
            }
            T[static_cast<size_t>(n) - 1] = static_cast<int>(tn);
            coeff = mul_mod(coeff, multinomial_mod(parts, p), p);
        }
        if (coeff == 0)
            return;
        trim(T);
        auto [it, fresh] = out.try_emplace(T, 0);
        it->second = add_mod(it->second, coeff, p);
        if (it->second == 0)
            out.erase(it);
    };

    /* depth-first over the cells (i, j), i, j >= 1 */
    std::vector<std::pair<int, int>> cells;
    for (int i = 1; i <= nr; ++i)
        for (int j = 1; j <= ns; ++j)
            cells.emplace_back(i, j);

    auto rec = [&](auto&& self, size_t c) -> void {
        if (c == cells.size()) {
            finish();
            return;
        }
        auto [i, j] = cells[c];
        long long pj = ipow(p, j);
        int maxv = static_cast<int>(std::min<long long>(rem_r[static_cast<size_t>(i) - 1] / pj,
                                                        rem_s[static_cast<size_t>(j) - 1]));
        for (int v = 0; v <= maxv; ++v) {
            x[static_cast<size_t>(i)][static_cast<size_t>(j)] = v;
            rem_r[static_cast<size_t>(i) - 1] -= static_cast<int>(pj) * v;
            rem_s[static_cast<size_t>(j) - 1] -= v;
            self(self, c + 1);
            rem_r[static_cast<size_t>(i) - 1] += static_cast<int>(pj) * v;
            rem_s[static_cast<size_t>(j) - 1] += v;
        }
        x[static_cast<size_t>(i)][static_cast<size_t>(j)] = 0;
    };
    rec(rec, 0);
    return out;
}

} // namespace

MilnorSum milnor_multiply(int p, const MilnorMono& a, const MilnorMono& b)
{
    /* move each Q_f of b leftward through P(R_a):
     * P(R) Q_f = sum_{i>=0} Q_{f+i} P(R - p^f e_i), then merge into the mask */
    struct State {
        std::vector<int> emask;
        std::vector<int> r;
        int coeff;
    };
    std::vector<State> states{State{a.emask, a.r, 1}};
    for (int f : b.emask) {
        std::vector<State> next;
        for (const State& st : states) {
            long long pf = ipow(p, f);
            for (size_t i = 0; i <= st.r.size(); ++i) {
                std::vector<int> r2 = st.r;
                if (i > 0) {
                    if (r2[i - 1] < pf)
                        continue;
                    r2[i - 1] -= static_cast<int>(pf);
                    trim(r2);
                }
                int k = f + static_cast<int>(i);
                if (std::find(st.emask.begin(), st.emask.end(), k) != st.emask.end())
                    continue; /* exterior square */
                int swaps = static_cast<int>(
                    std::count_if(st.emask.begin(), st.emask.end(), [&](int e) { return e > k; }));
                std::vector<int> e2 = st.emask;
                e2.insert(std::upper_bound(e2.begin(), e2.end(), k), k);
                int c = swaps % 2 == 0 ? st.coeff : neg_mod(st.coeff, p);
                next.push_back(State{std::move(e2), std::move(r2), c});
            }
        }
        states = std::move(next);
    }

    MilnorSum out;
    for (const State& st : states) {
        for (const auto& [T, c] : p_part_product(p, st.r, b.r)) {
            MilnorMono m{st.emask, T};
            int nv = add_mod(out.count(m) ? out[m] : 0, mul_mod(c, st.coeff, p), p);
            if (nv == 0)
                out.erase(m);
            else
                out[m] = nv;
        }
    }
    return out;
}

MilnorSum milnor_multiply(int p, const MilnorSum& a, const MilnorSum& b)
{
    MilnorSum out;
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b)
            add_scaled(out, milnor_multiply(p, ma, mb), mul_mod(ca, cb, p), p);
    return out;
}

MilnorSum word_to_milnor(int p, const std::vector<int>& letters)
{
    MilnorSum acc;
    acc[MilnorMono{}] = 1;
    for (int l : letters) {
        MilnorSum letter;
        if (l == 0)
            letter[MilnorMono{{0}, {}}] = 1;
        else
            letter[MilnorMono{{}, {l}}] = 1;
        acc = milnor_multiply(p, acc, letter);
    }
    return acc;
}

/* --------------------------------------------------------------- contexts */

SteenrodCtx::SteenrodCtx(int p) : p_(p)
{
    if (!is_odd_prime(p))
        throw destab_error("SteenrodCtx: prime must be odd, got " + std::to_string(p));
}

void SteenrodCtx::grow_words(int degree)
{
    if (degree <= words_hi_)
        return;
    /* regenerate from scratch by left extension: every admissible word of
     * positive degree is obtained uniquely by prepending a letter to an
     * admissible word (leading beta, or P^s with s >= p*s_next + eps_next) */
    words_by_degree_.clear();
    words_by_degree_[0].push_back(AdmissibleWord{});
    for (int d = 1; d <= degree; ++d) {
        std::vector<AdmissibleWord>& bucket = words_by_degree_[d];
        /* prepend beta to degree d-1 words with no leading beta */
        for (const AdmissibleWord& w : words_by_degree_[d - 1]) {
            if (!w.letters.empty() && w.letters[0] == 0)
                continue;
            std::vector<int> nl{0};
            nl.insert(nl.end(), w.letters.begin(), w.letters.end());
            bucket.push_back(AdmissibleWord{std::move(nl)});
        }
        /* prepend P^s to degree d - 2s(p-1) words */
        for (int s = 1; 2 * s * (p_ - 1) <= d; ++s) {
            int rest = d - 2 * s * (p_ - 1);
            auto it = words_by_degree_.find(rest);
            if (it == words_by_degree_.end())
                continue;
            for (const AdmissibleWord& w : it->second) {
                int eps = 0;
                size_t j = 0;
                if (!w.letters.empty() && w.letters[0] == 0) {
                    eps = 1;
                    j = 1;
                }
                int snext = j < w.letters.size() ? w.letters[j] : 0;
                if (s < p_ * snext + eps)
                    continue;
                std::vector<int> nl{s};
                nl.insert(nl.end(), w.letters.begin(), w.letters.end());
                bucket.push_back(AdmissibleWord{std::move(nl)});
            }
        }
        std::sort(bucket.begin(), bucket.end());
    }
    words_hi_ = degree;
}

const std::vector<AdmissibleWord>& SteenrodCtx::admissible_basis(int degree)
{
    static const std::vector<AdmissibleWord> empty;
    if (degree < 0)
        return empty;
    grow_words(degree);
    return words_by_degree_[degree];
}

const std::vector<MilnorMono>& SteenrodCtx::milnor_basis(int degree)
{
    static const std::vector<MilnorMono> empty;
    if (degree < 0)
        return empty;
    auto it = milnor_by_degree_.find(degree);
    if (it != milnor_by_degree_.end())
        return it->second;

    std::vector<MilnorMono> out;
    /* enumerate exterior masks whose degree does not exceed `degree`, then
     * split the remainder over the xi exponents */
    int jmax = -1;
    while (2 * ipow(p_, jmax + 1) - 1 <= degree)
        ++jmax;

    std::vector<int> mask;
    std::vector<int> r;
    auto rec_r = [&](auto&& self, int rem, int i) -> void {
        if (rem == 0) {
            std::vector<int> rr = r;
            trim(rr);
            out.push_back(MilnorMono{mask, rr});
            return;
        }
        long long w = 2 * (ipow(p_, i + 1) - 1);
        if (w > rem)
            return;
        for (int e = 0; e <= rem / static_cast<int>(w); ++e) {
            r.push_back(e);
            self(self, rem - e * static_cast<int>(w), i + 1);
            r.pop_back();
        }
    };
    auto rec_mask = [&](auto&& self, int j, int rem) -> void {
        if (j > jmax) {
            rec_r(rec_r, rem, 0);
            return;
        }
        self(self, j + 1, rem);
        long long w = 2 * ipow(p_, j) - 1;
        if (w <= rem) {
            mask.push_back(j);
            self(self, j + 1, rem - static_cast<int>(w));
            mask.pop_back();
        }
    };
    rec_mask(rec_mask, 0, degree);
    std::sort(out.begin(), out.end());
    return milnor_by_degree_[degree] = std::move(out);
}

const BasisTables& SteenrodCtx::change_of_basis(int degree)
{
    auto it = tables_.find(degree);
    if (it != tables_.end())
        return it->second;

    BasisTables t;
    t.adm = admissible_basis(degree);
    t.mil = milnor_basis(degree);
    int n = static_cast<int>(t.adm.size());
    if (static_cast<int>(t.mil.size()) != n)
        throw destab_error("basis mismatch: admissible/Milnor dimensions differ in degree "
                           + std::to_string(degree));

    t.mil_from_adm = Mat(n, n);
    for (int c = 0; c < n; ++c) {
        MilnorSum s = word_to_milnor(p_, t.adm[static_cast<size_t>(c)].letters);
        for (const auto& [m, v] : s) {
            auto pos = std::lower_bound(t.mil.begin(), t.mil.end(), m);
            if (pos == t.mil.end() || !(*pos == m))
                throw destab_error("basis mismatch: Milnor monomial missing in degree "
                                   + std::to_string(degree));
            t.mil_from_adm.at(static_cast<int>(pos - t.mil.begin()), c) = v;
        }
    }

    Solver solver(t.mil_from_adm, p_);
    if (solver.rank() != n)
        throw destab_error("basis mismatch: change of basis singular in degree "
                           + std::to_string(degree));
    t.adm_from_mil = Mat(n, n);
    for (int c = 0; c < n; ++c) {
        Vec e(static_cast<size_t>(n), 0);
        e[static_cast<size_t>(c)] = 1;
        Vec x = *solver.solve(e);
        for (int r = 0; r < n; ++r)
            t.adm_from_mil.at(r, c) = x[static_cast<size_t>(r)];
    }
    return tables_[degree] = std::move(t);
}

WordSum SteenrodCtx::adem_reduce(const std::vector<int>& letters)
{
    return adem_core(p_, letters, &adem_cache_);
}

WordSum SteenrodCtx::milnor_to_admissible(const MilnorSum& s)
{
    WordSum out;
    for (const auto& [m, c] : s) {
        int d = milnor_degree(p_, m);
        const BasisTables& t = change_of_basis(d);
        auto pos = std::lower_bound(t.mil.begin(), t.mil.end(), m);
        if (pos == t.mil.end() || !(*pos == m))
            throw destab_error("basis mismatch: unknown Milnor monomial");
        int col = static_cast<int>(pos - t.mil.begin());
        for (int r = 0; r < t.adm_from_mil.nrows; ++r) {
            int v = mul_mod(t.adm_from_mil.at(r, col), c, p_);
            if (v == 0)
                continue;
            const AdmissibleWord& w = t.adm[static_cast<size_t>(r)];
            int nv = add_mod(out.count(w) ? out[w] : 0, v, p_);
            if (nv == 0)
                out.erase(w);
            else
                out[w] = nv;
        }
    }
    return out;
}

MilnorSum SteenrodCtx::admissible_to_milnor(const AdmissibleWord& w)
{
    return word_to_milnor(p_, w.letters);
}

/* ----------------------------------------------------------------- modules */

Mat ModuleWindow::action_block(int op, int d) const
{
    auto it = action.find({op, d});
    if (it != action.end())
        return it->second;
    return Mat(dim(d + op_degree(op)), dim(d));
}

void ModuleWindow::set_action_block(int op, int d, const Mat& m)
{
    int target = d + op_degree(op);
    if (m.nrows != dim(target) || m.ncols != dim(d))
        throw destab_error("ModuleWindow: action block shape mismatch");
    bool zero = std::all_of(m.a.begin(), m.a.end(), [](int v) { return v == 0; });
    if (zero)
        action.erase({op, d});
    else
        action[{op, d}] = m;
}

ModuleElt ModuleWindow::basis_elt(int degree, int index) const
{
    ModuleElt e = zero(degree);
    e.v.at(static_cast<size_t>(index)) = 1;
    return e;
}

ModuleElt act_letter(const ModuleWindow& m, int op, const ModuleElt& x)
{
    int target = x.degree + m.op_degree(op);
    if (target > m.hi)
        throw destab_error("window exceeded: action lands in degree " + std::to_string(target)
                           + " above window top " + std::to_string(m.hi));
    Mat block = m.action_block(op, x.degree);
    ModuleElt y = m.zero(target);
    for (int r = 0; r < block.nrows; ++r) {
        long long acc = 0;
        for (int c = 0; c < block.ncols; ++c)
            acc += static_cast<long long>(block.at(r, c)) * x.v[static_cast<size_t>(c)];
        y.v[static_cast<size_t>(r)] = norm_mod(acc, m.p);
    }
    return y;
}

ModuleElt act(const ModuleWindow& m, const AdmissibleWord& w, const ModuleElt& x)
{
    ModuleElt cur = x;
    for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it)
        cur = act_letter(m, *it, cur);
    return cur;
}

ModuleElt act(SteenrodCtx& ctx, const ModuleWindow& m, const std::vector<int>& letters,
              const ModuleElt& x)
{
    int target = x.degree + word_degree(m.p, letters);
    if (target > m.hi)
        throw destab_error("window exceeded: action lands in degree " + std::to_string(target)
                           + " above window top " + std::to_string(m.hi));
    ModuleElt y = m.zero(target);
    for (const auto& [w, c] : ctx.adem_reduce(letters)) {
        ModuleElt part = act(m, w, x);
        for (size_t i = 0; i < y.v.size(); ++i)
            y.v[i] = add_mod(y.v[i], mul_mod(part.v[i], c, m.p), m.p);
    }
    return y;
}

ModuleElt act(SteenrodCtx& ctx, const ModuleWindow& m, const MilnorMono& op, const ModuleElt& x)
{
    int target = x.degree + milnor_degree(m.p, op);
    if (target > m.hi)
        throw destab_error("window exceeded: action lands in degree " + std::to_string(target)
                           + " above window top " + std::to_string(m.hi));
    MilnorSum s;
    s[op] = 1;
    ModuleElt y = m.zero(target);
    for (const auto& [w, c] : ctx.milnor_to_admissible(s)) {
        ModuleElt part = act(m, w, x);
        for (size_t i = 0; i < y.v.size(); ++i)
            y.v[i] = add_mod(y.v[i], mul_mod(part.v[i], c, m.p), m.p);
    }
    return y;
}

ModuleWindow suspend(const ModuleWindow& m, int t)
{
    ModuleWindow out;
    out.p = m.p;
    out.lo = m.lo + t;
    out.hi = m.hi + t;
    out.suspension_offset = m.suspension_offset + t;
    for (const auto& [d, labels] : m.basis.labels)
        for (const std::string& l : labels)
            out.basis.push(d + t, l);
    for (const auto& [key, block] : m.action)
        out.action[{key.first, key.second + t}] = block;
    return out;
}

ModuleWindow truncate(const ModuleWindow& m, int c, TruncSide side)
{
    ModuleWindow out;
    out.p = m.p;
    out.suspension_offset = m.suspension_offset;
    if (side == TruncSide::below) {
        out.lo = m.lo;
        out.hi = m.hi;
        for (const auto& [d, labels] : m.basis.labels)
            if (d < c)
                for (const std::string& l : labels)
                    out.basis.push(d, l);
        for (const auto& [key, block] : m.action) {
            int target = key.second + m.op_degree(key.first);
            if (key.second < c && target < c)
                out.action[key] = block;
        }
    } else {
        out.lo = std::max(m.lo, c);
        out.hi = m.hi;
        for (const auto& [d, labels] : m.basis.labels)
            if (d >= c)
                for (const std::string& l : labels)
                    out.basis.push(d, l);
        for (const auto& [key, block] : m.action)
            if (key.second >= c)
                out.action[key] = block;
    }
    return out;
}

int phi_degree(int p, int d)
{
    return d % 2 == 0 ? p * d : p * (d - 1) + 2;
}

ModuleWindow frobenius(const ModuleWindow& m)
{
    int p = m.p;
    ModuleWindow out;
    out.p = p;
    out.lo = phi_degree(p, m.lo - 1) + 1;
    out.hi = phi_degree(p, m.hi + 1) - 1;
    out.suspension_offset = 0;
    for (const auto& [d, labels] : m.basis.labels)
        for (const std::string& l : labels)
            out.basis.push(phi_degree(p, d), "Phi(" + l + ")");

    for (const auto& [d, labels] : m.basis.labels) {
        int src = phi_degree(p, d);
        for (int i = 1; src + 2 * i * (p - 1) <= out.hi; ++i) {
            Mat block;
            if (d % 2 == 0) {
                if (i % p != 0)
                    continue;
                block = m.action_block(i / p, d);
            } else {
                if (i % p != 1)
                    continue;
                int j = (i - 1) / p;
                /* beta P^j: P^0 is the identity */
                Mat pj = j == 0 ? Mat() : m.action_block(j, d);
                int mid = d + 2 * j * (p - 1);
                Mat bm = m.action_block(0, mid);
                if (j == 0) {
                    block = bm;
                } else {
                    block = Mat(bm.nrows, pj.ncols);
                    for (int r = 0; r < bm.nrows; ++r)
                        for (int c = 0; c < pj.ncols; ++c) {
                            long long acc = 0;
                            for (int k = 0; k < bm.ncols; ++k)
                                acc += static_cast<long long>(bm.at(r, k)) * pj.at(k, c);
                            block.at(r, c) = norm_mod(acc, p);
                        }
                }
            }
            out.set_action_block(i, src, block);
        }
    }
    return out;
}

SparseMatFp lambda_map(const ModuleWindow& m)
{
    int cap = m.hi;
    while (cap >= m.lo && phi_degree(m.p, cap) > m.hi)
        --cap;
    return lambda_map(m, cap);
}

SparseMatFp lambda_map(const ModuleWindow& m, int src_degree_cap)
{
    SparseMatFp out;
    out.p = m.p;
    out.rows = m.basis;
    for (const auto& [d, labels] : m.basis.labels) {
        if (d > src_degree_cap)
            continue;
        if (phi_degree(m.p, d) > m.hi)
            throw destab_error("window exceeded: lambda target degree "
                               + std::to_string(phi_degree(m.p, d)) + " above window top "
                               + std::to_string(m.hi));
        for (const std::string& l : labels)
            out.cols.push(phi_degree(m.p, d), "Phi(" + l + ")");
        if (d < 0)
            continue; /* no beta^eps P^i with 2i + eps < 0: the map is zero */
        int i = d / 2, eps = d % 2;
        for (size_t c = 0; c < labels.size(); ++c) {
            ModuleElt x = m.basis_elt(d, static_cast<int>(c));
            ModuleElt y = i == 0 ? x : act_letter(m, i, x);
            if (eps == 1)
                y = act_letter(m, 0, y);
            for (size_t r = 0; r < y.v.size(); ++r)
                if (y.v[r] != 0)
                    out.add(phi_degree(m.p, d), static_cast<int>(r), static_cast<int>(c), y.v[r]);
        }
    }
    return out;
}

ModuleWindow destabilize(const ModuleWindow& m)
{
    int p = m.p;
    /* spanning vectors of the unstable-excess submodule, per degree */
    std::map<int, std::vector<Vec>> span;
    for (const auto& [d, labels] : m.basis.labels) {
        for (size_t c = 0; c < labels.size(); ++c) {
            ModuleElt x = m.basis_elt(d, static_cast<int>(c));
            for (int eps = 0; eps <= 1; ++eps) {
                for (int i = 0;; ++i) {
                    int target = d + 2 * i * (p - 1) + eps;
                    if (target > m.hi)
                        break;
                    if (eps + 2 * i <= d)
                        continue;
                    ModuleElt y = i == 0 ? x : act_letter(m, i, x);
                    if (eps == 1)
                        y = act_letter(m, 0, y);
                    if (!std::all_of(y.v.begin(), y.v.end(), [](int v) { return v == 0; }))
                        span[target].push_back(y.v);
                }
            }
        }
    }

    ModuleWindow out;
    out.p = p;
    out.lo = m.lo;
    out.hi = m.hi;
    out.suspension_offset = m.suspension_offset;

    /* per degree: complement indices and a projection solver */
    std::map<int, std::vector<int>> keep; /* surviving basis indices */
    std::map<int, Solver> proj;           /* solves against [B | E_keep] */
    std::map<int, int> brank;
    for (const auto& [d, labels] : m.basis.labels) {
        int n = static_cast<int>(labels.size());
        std::vector<Vec> bvecs;
        if (auto it = span.find(d); it != span.end()) {
            Mat s(n, static_cast<int>(it->second.size()));
            for (int c = 0; c < s.ncols; ++c)
                for (int r = 0; r < n; ++r)
                    s.at(r, c) = it->second[static_cast<size_t>(c)][static_cast<size_t>(r)];
            bvecs = row_reduce(s, p).image_basis;
        }
        int nb = static_cast<int>(bvecs.size());
        /* complement: pivots of [B | I] landing in the identity part */
        Mat ext(n, nb + n);
        for (int c = 0; c < nb; ++c)
            for (int r = 0; r < n; ++r)
                ext.at(r, c) = bvecs[static_cast<size_t>(c)][static_cast<size_t>(r)];
        for (int r = 0; r < n; ++r)
            ext.at(r, nb + r) = 1;
        std::vector<int> comp;
        for (int c : row_reduce(ext, p).pivot_cols)
            if (c >= nb)
                comp.push_back(c - nb);
        keep[d] = comp;
        brank[d] = nb;
        Mat sq(n, nb + static_cast<int>(comp.size()));
        for (int c = 0; c < nb; ++c)
            for (int r = 0; r < n; ++r)
                sq.at(r, c) = bvecs[static_cast<size_t>(c)][static_cast<size_t>(r)];
        for (size_t c = 0; c < comp.size(); ++c)
            sq.at(comp[c], nb + static_cast<int>(c)) = 1;
        proj.emplace(d, Solver(sq, p));
        for (int j : comp)
            out.basis.push(d, labels[static_cast<size_t>(j)]);
    }

    auto project = [&](const ModuleElt& y) -> Vec {
        auto it = keep.find(y.degree);
        if (it == keep.end())
            return {};
        auto sol = proj.at(y.degree).solve(y.v);
        if (!sol)
            throw destab_error("destabilize: projection failed (internal)");
        Vec q(it->second.size());
        for (size_t i = 0; i < it->second.size(); ++i)
            q[i] = (*sol)[static_cast<size_t>(brank.at(y.degree)) + i];
        return q;
    };

    for (const auto& [d, comp] : keep) {
        int ncols = static_cast<int>(comp.size());
        if (ncols == 0)
            continue;
        for (int op = 0; op == 0 || d + out.op_degree(op) <= m.hi; ++op) {
            int target = d + out.op_degree(op);
            if (target > m.hi || out.dim(target) == 0)
                continue;
            Mat block(out.dim(target), ncols);
            for (int c = 0; c < ncols; ++c) {
                ModuleElt x = m.basis_elt(d, comp[static_cast<size_t>(c)]);
                ModuleElt y = act_letter(m, op, x);
                Vec q = project(y);
                for (size_t r = 0; r < q.size(); ++r)
                    block.at(static_cast<int>(r), c) = q[r];
            }
            out.set_action_block(op, d, block);
        }
    }
    return out;
}

/* -------------------------------------------------------------- free mods */

ModuleWindow FreeModuleWindow::materialize(SteenrodCtx& ctx) const
{
    int p = ctx.p();
    for (const auto& [name, t] : generators)
        if (t < lo)
            throw destab_error("free module: generator '" + name + "' in degree "
                               + std::to_string(t) + " below window bottom "
                               + std::to_string(lo));
    ModuleWindow out;
    out.p = p;
    out.lo = lo;
    out.hi = hi;

    /* basis: admissible word x generator, grouped by total degree */
    std::map<int, std::vector<std::pair<AdmissibleWord, size_t>>> by_degree;
    for (int d = lo; d <= hi; ++d) {
        for (size_t g = 0; g < generators.size(); ++g) {
            int wd = d - generators[g].second;
            for (const AdmissibleWord& w : ctx.admissible_basis(wd))
                by_degree[d].emplace_back(w, g);
        }
        for (const auto& [w, g] : by_degree[d])
            out.basis.push(d, word_to_string(w.letters) + "*" + generators[g].first);
    }

    auto index_in = [&](int d, const AdmissibleWord& w, size_t g) -> int {
        const auto& v = by_degree[d];
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i].second == g && v[i].first == w)
                return static_cast<int>(i);
        throw destab_error("free module: basis lookup failed (internal)");
    };

    for (const auto& [d, elts] : by_degree) {
        for (int op = 0;; ++op) {
            int target = d + out.op_degree(op);
            if (op > 0 && target > hi)
                break;
            if (target > hi)
                continue;
            Mat block(out.dim(target), static_cast<int>(elts.size()));
            bool nonzero = false;
            for (size_t c = 0; c < elts.size(); ++c) {
                std::vector<int> letters{op};
                letters.insert(letters.end(), elts[c].first.letters.begin(),
                               elts[c].first.letters.end());
                for (const auto& [w, coeff] : ctx.adem_reduce(letters)) {
                    int r = index_in(target, w, elts[c].second);
                    block.at(r, static_cast<int>(c)) =
                        add_mod(block.at(r, static_cast<int>(c)), coeff, p);
                    nonzero = true;
                }
            }
            if (nonzero)
                out.set_action_block(op, d, block);
        }
    }
    return out;
}

} // namespace destab
