#pragma once

/* Exact graded linear algebra over F_p.
 *
 * All maps in this project preserve the internal degree, so a graded matrix
 * is a family of independent blocks, one per degree.  The sparse container
 * SparseMatFp carries the graded bases of both sides plus per-degree entry
 * lists; the computational core is a deterministic dense Gauss-Jordan
 * elimination (first nonzero in column order is the pivot), which keeps
 * kernel/image/representative bases reproducible across runs. */

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "destab/fp.hpp"

namespace destab {

struct GradedBasis {
    /* degree -> ordered list of labels, unique within a degree */
    std::map<int, std::vector<std::string>> labels;

    int dim(int degree) const
    {
        auto it = labels.find(degree);
        return it == labels.end() ? 0 : static_cast<int>(it->second.size());
    }
    const std::vector<std::string>& at(int degree) const
    {
        static const std::vector<std::string> empty;
        auto it = labels.find(degree);
        return it == labels.end() ? empty : it->second;
    }
    int index_of(int degree, const std::string& label) const
    {
        const auto& v = at(degree);
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i] == label)
                return static_cast<int>(i);
        return -1;
    }
    void push(int degree, const std::string& label)
    {
        if (index_of(degree, label) >= 0)
            throw destab_error("GradedBasis: duplicate label '" + label + "' in degree "
                               + std::to_string(degree));
        labels[degree].push_back(label);
    }
    int total_dim() const
    {
        int n = 0;
        for (const auto& [d, v] : labels)
            n += static_cast<int>(v.size());
        return n;
    }
    bool operator==(const GradedBasis&) const = default;
};

/* Dense matrix over F_p, row-major; maps F_p^ncols -> F_p^nrows. */
struct Mat {
    int nrows = 0, ncols = 0;
    std::vector<int> a;

    Mat() = default;
    Mat(int r, int c) : nrows(r), ncols(c), a(static_cast<size_t>(r) * c, 0) {}
    int& at(int r, int c) { return a[static_cast<size_t>(r) * ncols + c]; }
    int at(int r, int c) const { return a[static_cast<size_t>(r) * ncols + c]; }
    static Mat from_rows(const std::vector<std::vector<int>>& rows)
    {
        Mat m(static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows[0].size()));
        for (int r = 0; r < m.nrows; ++r)
            for (int c = 0; c < m.ncols; ++c)
                m.at(r, c) = rows[r][c];
        return m;
    }
    bool operator==(const Mat&) const = default;
};

using Vec = std::vector<int>;

struct Entry {
    int row = 0, col = 0, value = 0;
};

struct SparseMatFp {
    int p = 3;
    GradedBasis rows, cols;
    std::map<int, std::vector<Entry>> entries; /* degree -> block entries */

    /* Accumulating insert; entries reduced mod p, zeros dropped on densify. */
    void add(int degree, int row, int col, long long value)
    {
        int v = norm_mod(value, p);
        if (v == 0)
            return;
        for (auto& e : entries[degree]) {
            if (e.row == row && e.col == col) {
                e.value = add_mod(e.value, v, p);
                return;
            }
        }
        entries[degree].push_back(Entry{row, col, v});
    }
    Mat block(int degree) const
    {
        Mat m(rows.dim(degree), cols.dim(degree));
        auto it = entries.find(degree);
        if (it != entries.end())
            for (const Entry& e : it->second) {
                if (e.row >= m.nrows || e.col >= m.ncols || e.row < 0 || e.col < 0)
                    throw destab_error("SparseMatFp: entry outside block in degree "
                                       + std::to_string(degree));
                m.at(e.row, e.col) = add_mod(m.at(e.row, e.col), e.value, p);
            }
        return m;
    }
};

struct RowReduceResult {
    int rank = 0;
    std::vector<int> pivot_cols;   /* columns enlarging the span, in order */
    std::vector<Vec> kernel_basis; /* vectors of length ncols, m * k = 0 */
    std::vector<Vec> image_basis;  /* independent vectors of length nrows */
};

struct HomologyAt {
    int dim = 0;
    std::vector<Vec> representatives; /* cycles spanning a complement of the image */
};

struct not_a_complex : destab_error {
    int degree, row, col, value;
    not_a_complex(int degree_, int row_, int col_, int value_)
        : destab_error("not a complex: composite has entry " + std::to_string(value_)
                       + " at (row " + std::to_string(row_) + ", col " + std::to_string(col_)
                       + ") in degree " + std::to_string(degree_)),
          degree(degree_), row(row_), col(col_), value(value_)
    {
    }
};

RowReduceResult row_reduce(const Mat& m, int p);
std::map<int, RowReduceResult> row_reduce(const SparseMatFp& m);

/* Homology at the middle of d_in : A -> B, d_out : B -> C.  Checks
 * d_out * d_in = 0 first and throws not_a_complex with a witness entry. */
HomologyAt homology_at(const Mat& d_in, const Mat& d_out, int p);
std::map<int, HomologyAt> homology_at(const SparseMatFp& d_in, const SparseMatFp& d_out);

/* Repeated exact solves against a fixed coefficient matrix (columns are the
 * candidate vectors).  solve() returns coefficients with free variables set
 * to zero, or nullopt when the system is inconsistent. */
class Solver {
public:
    Solver() = default;
    Solver(Mat m, int p);
    std::optional<Vec> solve(const Vec& b) const;
    int rank() const { return rank_; }

private:
    int p_ = 3;
    int nrows_ = 0, ncols_ = 0;
    Mat rref_;
    Mat transform_; /* rref_ = transform_ * original */
    std::vector<int> pivot_cols_;
    int rank_ = 0;
};

/* Matrix dump format: one entry per line "deg s row col value",
 * lexicographically sorted (numeric fields in ascending order). */
std::string dump_matrix(const SparseMatFp& m, int s);

} // namespace destab
