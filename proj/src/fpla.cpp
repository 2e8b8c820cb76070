#include "destab/fpla.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

namespace destab {

namespace {

/* In-place Gauss-Jordan to reduced row echelon form.  Pivot choice is
 * deterministic: columns are scanned left to right and the first row (in row
 * order) with a nonzero entry below the current pivot row becomes the pivot.
 * Returns the pivot columns. */
std::vector<int> echelonize(Mat& m, int p)
{
    std::vector<int> pivot_cols;
    int pr = 0;
    for (int c = 0; c < m.ncols && pr < m.nrows; ++c) {
        int sel = -1;
        for (int r = pr; r < m.nrows; ++r)
            if (m.at(r, c) != 0) {
                sel = r;
                break;
            }
        if (sel < 0)
            continue;
        if (sel != pr)
            for (int j = 0; j < m.ncols; ++j)
                std::swap(m.at(sel, j), m.at(pr, j));
        int inv = inv_mod(m.at(pr, c), p);
        for (int j = 0; j < m.ncols; ++j)
            m.at(pr, j) = mul_mod(m.at(pr, j), inv, p);
        for (int r = 0; r < m.nrows; ++r) {
            if (r == pr)
                continue;
            int f = m.at(r, c);
            if (f == 0)
                continue;
            for (int j = 0; j < m.ncols; ++j)
                m.at(r, j) = sub_mod(m.at(r, j), mul_mod(f, m.at(pr, j), p), p);
        }
        pivot_cols.push_back(c);
        ++pr;
    }
    return pivot_cols;
}

Mat multiply(const Mat& a, const Mat& b, int p)
{
    if (a.ncols != b.nrows)
        throw destab_error("matrix shape mismatch in multiply");
    Mat c(a.nrows, b.ncols);
    for (int i = 0; i < a.nrows; ++i)
        for (int k = 0; k < a.ncols; ++k) {
            int v = a.at(i, k);
            if (v == 0)
                continue;
            for (int j = 0; j < b.ncols; ++j)
                c.at(i, j) = add_mod(c.at(i, j), mul_mod(v, b.at(k, j), p), p);
        }
    return c;
}

} // namespace

RowReduceResult row_reduce(const Mat& m, int p)
{
    Mat reduced = m;
    for (int& v : reduced.a)
        v = norm_mod(v, p);
    Mat work = reduced;
    std::vector<int> pivots = echelonize(work, p);
    RowReduceResult res;
    res.rank = static_cast<int>(pivots.size());
    res.pivot_cols = pivots;

    /* kernel: one vector per free column, in column order */
    std::set<int> pivot_set(pivots.begin(), pivots.end());
    for (int c = 0; c < m.ncols; ++c) {
        if (pivot_set.count(c))
            continue;
        Vec k(m.ncols, 0);
        k[c] = 1;
        for (size_t i = 0; i < pivots.size(); ++i)
            k[pivots[i]] = neg_mod(work.at(static_cast<int>(i), c), p);
        res.kernel_basis.push_back(std::move(k));
    }

    /* image: original (normalized) columns at the pivot positions */
    for (int c : pivots) {
        Vec v(reduced.nrows);
        for (int r = 0; r < reduced.nrows; ++r)
            v[r] = reduced.at(r, c);
        res.image_basis.push_back(std::move(v));
    }
    return res;
}

std::map<int, RowReduceResult> row_reduce(const SparseMatFp& m)
{
    std::map<int, RowReduceResult> out;
    std::set<int> degrees;
    for (const auto& [d, v] : m.rows.labels)
        degrees.insert(d);
    for (const auto& [d, v] : m.cols.labels)
        degrees.insert(d);
    for (int d : degrees)
        out[d] = row_reduce(m.block(d), m.p);
    return out;
}

HomologyAt homology_at(const Mat& d_in, const Mat& d_out, int p)
{
    if (d_in.nrows != d_out.ncols)
        throw destab_error("homology_at: middle dimensions disagree");
    Mat comp = multiply(d_out, d_in, p);
    for (int r = 0; r < comp.nrows; ++r)
        for (int c = 0; c < comp.ncols; ++c)
            if (comp.at(r, c) != 0)
                throw not_a_complex(0, r, c, comp.at(r, c));

    RowReduceResult rin = row_reduce(d_in, p);
    RowReduceResult rout = row_reduce(d_out, p);

    HomologyAt h;
    h.dim = static_cast<int>(rout.kernel_basis.size()) - rin.rank;

    /* representatives: stack image columns then kernel columns; the kernel
     * columns introducing new pivots give a complement of the image */
    int n = d_in.nrows;
    int ni = static_cast<int>(rin.image_basis.size());
    int nk = static_cast<int>(rout.kernel_basis.size());
    Mat stacked(n, ni + nk);
    for (int j = 0; j < ni; ++j)
        for (int r = 0; r < n; ++r)
            stacked.at(r, j) = rin.image_basis[j][r];
    for (int j = 0; j < nk; ++j)
        for (int r = 0; r < n; ++r)
            stacked.at(r, ni + j) = rout.kernel_basis[j][r];
    Mat work = stacked;
    std::vector<int> pivots = echelonize(work, p);
    for (int c : pivots)
        if (c >= ni)
            h.representatives.push_back(rout.kernel_basis[c - ni]);
    if (static_cast<int>(h.representatives.size()) != h.dim)
        throw destab_error("homology_at: internal rank accounting error");
    return h;
}

std::map<int, HomologyAt> homology_at(const SparseMatFp& d_in, const SparseMatFp& d_out)
{
    if (d_in.p != d_out.p)
        throw destab_error("prime mismatch");
    if (!(d_in.rows == d_out.cols))
        throw destab_error("homology_at: middle bases disagree");
    std::map<int, HomologyAt> out;
    std::set<int> degrees;
    for (const auto& [d, v] : d_in.rows.labels)
        degrees.insert(d);
    for (int d : degrees) {
        try {
            out[d] = homology_at(d_in.block(d), d_out.block(d), d_in.p);
        } catch (const not_a_complex& e) {
            throw not_a_complex(d, e.row, e.col, e.value);
        }
    }
    return out;
}

Solver::Solver(Mat m, int p) : p_(p), nrows_(m.nrows), ncols_(m.ncols)
{
    /* augment with the identity to track the row transformation */
    Mat aug(m.nrows, m.ncols + m.nrows);
    for (int r = 0; r < m.nrows; ++r) {
        for (int c = 0; c < m.ncols; ++c)
            aug.at(r, c) = m.at(r, c);
        aug.at(r, m.ncols + r) = 1;
    }
    /* echelonize only over the first ncols columns */
    int pr = 0;
    for (int c = 0; c < m.ncols && pr < m.nrows; ++c) {
        int sel = -1;
        for (int r = pr; r < m.nrows; ++r)
            if (aug.at(r, c) != 0) {
                sel = r;
                break;
            }
        if (sel < 0)
            continue;
        if (sel != pr)
            for (int j = 0; j < aug.ncols; ++j)
                std::swap(aug.at(sel, j), aug.at(pr, j));
        int inv = inv_mod(aug.at(pr, c), p_);
        for (int j = 0; j < aug.ncols; ++j)
            aug.at(pr, j) = mul_mod(aug.at(pr, j), inv, p_);
        for (int r = 0; r < m.nrows; ++r) {
            if (r == pr)
                continue;
            int f = aug.at(r, c);
            if (f == 0)
                continue;
            for (int j = 0; j < aug.ncols; ++j)
                aug.at(r, j) = sub_mod(aug.at(r, j), mul_mod(f, aug.at(pr, j), p_), p_);
        }
        pivot_cols_.push_back(c);
        ++pr;
    }
    rank_ = pr;
    rref_ = Mat(m.nrows, m.ncols);
    transform_ = Mat(m.nrows, m.nrows);
    for (int r = 0; r < m.nrows; ++r) {
        for (int c = 0; c < m.ncols; ++c)
            rref_.at(r, c) = aug.at(r, c);
        for (int c = 0; c < m.nrows; ++c)
            transform_.at(r, c) = aug.at(r, m.ncols + c);
    }
}

std::optional<Vec> Solver::solve(const Vec& b) const
{
    if (static_cast<int>(b.size()) != nrows_)
        throw destab_error("Solver::solve: length mismatch");
    Vec c(nrows_, 0);
    for (int r = 0; r < nrows_; ++r) {
        long long acc = 0;
        for (int k = 0; k < nrows_; ++k)
            acc += static_cast<long long>(transform_.at(r, k)) * b[k];
        c[r] = norm_mod(acc, p_);
    }
    for (int r = rank_; r < nrows_; ++r)
        if (c[r] != 0)
            return std::nullopt;
    Vec x(ncols_, 0);
    for (int i = 0; i < rank_; ++i)
        x[pivot_cols_[i]] = c[i];
    /* verify consistency on non-pivot structure: rref rows may involve free
     * columns, but with free variables set to zero the pivot assignment is
     * exact; inconsistency only arises through the zero rows checked above */
    return x;
}

std::string dump_matrix(const SparseMatFp& m, int s)
{
    std::vector<std::array<long long, 5>> lines;
    for (const auto& [deg, es] : m.entries)
        for (const Entry& e : es)
            if (e.value != 0)
                lines.push_back({deg, s, e.row, e.col, e.value});
    std::sort(lines.begin(), lines.end());
    std::ostringstream os;
    for (const auto& l : lines)
        os << l[0] << ' ' << l[1] << ' ' << l[2] << ' ' << l[3] << ' ' << l[4] << '\n';
    return os.str();
}

} // namespace destab
