#include "destab/module_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace destab {

namespace {

struct parse_state {
    int lineno = 0;
    [[noreturn]] void fail(const std::string& what) const
    {
        throw destab_error("parse error at line " + std::to_string(lineno) + ": " + what);
    }
};

std::string strip(const std::string& s)
{
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/* `c*name` or `name`; returns (coeff, name) */
std::pair<long long, std::string> parse_term(const parse_state& st, const std::string& term)
{
    size_t star = term.find('*');
    if (star == std::string::npos) {
        if (term.empty())
            st.fail("empty term in linear combination");
        return {1, term};
    }
    try {
        size_t used = 0;
        long long c = std::stoll(term.substr(0, star), &used);
        if (used != star)
            st.fail("bad coefficient '" + term.substr(0, star) + "'");
        std::string name = strip(term.substr(star + 1));
        if (name.empty())
            st.fail("missing name after '*'");
        return {c, name};
    } catch (const std::invalid_argument&) {
        st.fail("bad coefficient in term '" + term + "'");
    } catch (const std::out_of_range&) {
        st.fail("coefficient out of range in term '" + term + "'");
    }
}

std::vector<std::pair<long long, std::string>> parse_lincomb(const parse_state& st,
                                                             const std::string& rhs)
{
    std::string body = strip(rhs);
    if (body == "0")
        return {};
    std::vector<std::pair<long long, std::string>> terms;
    size_t pos = 0;
    while (pos < body.size()) {
        size_t plus = body.find('+', pos);
        std::string term = strip(plus == std::string::npos ? body.substr(pos)
                                                           : body.substr(pos, plus - pos));
        if (term.empty())
            st.fail("empty term in linear combination");
        terms.push_back(parse_term(st, term));
        pos = plus == std::string::npos ? body.size() : plus + 1;
    }
    return terms;
}

} // namespace

ModuleWindow parse_module(const std::string& text)
{
    ModuleWindow m;
    bool have_prime = false, have_window = false;
    int suspend_by = 0;
    std::map<std::string, int> degree_of;

    struct pending_action {
        int lineno;
        int op;
        std::string src;
        std::vector<std::pair<long long, std::string>> rhs;
    };
    std::vector<pending_action> actions;

    parse_state st;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++st.lineno;
        std::string line = raw;
        if (size_t hash = line.find('#'); hash != std::string::npos)
            line = line.substr(0, hash);
        line = strip(line);
        if (line.empty())
            continue;

        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "prime:") {
            if (!(ls >> m.p) || !is_odd_prime(m.p))
                st.fail("expected an odd prime");
            have_prime = true;
        } else if (head == "window:") {
            if (!(ls >> m.lo >> m.hi))
                st.fail("expected `window: <lo> <hi>`");
            have_window = true;
        } else if (head == "generator:") {
            std::string name;
            int d;
            if (!(ls >> name >> d))
                st.fail("expected `generator: <name> <degree>`");
            if (degree_of.count(name))
                st.fail("duplicate generator '" + name + "'");
            degree_of[name] = d;
        } else if (head == "suspend:") {
            int t;
            if (!(ls >> t))
                st.fail("expected `suspend: <t>`");
            suspend_by += t;
        } else if (head == "beta" || head == "P") {
            pending_action a;
            a.lineno = st.lineno;
            if (head == "beta") {
                a.op = 0;
            } else {
                if (!(ls >> a.op) || a.op < 1)
                    st.fail("expected `P <i> <name> = <lincomb>` with i >= 1");
            }
            std::string eq;
            if (!(ls >> a.src >> eq) || eq != "=")
                st.fail("expected `<name> = <lincomb>`");
            std::string rhs;
            std::getline(ls, rhs);
            a.rhs = parse_lincomb(st, rhs);
            actions.push_back(std::move(a));
        } else {
            st.fail("unrecognized directive '" + head + "'");
        }
    }

    st.lineno = 0;
    if (!have_prime)
        st.fail("missing `prime:` line");
    if (!have_window)
        st.fail("missing `window:` line");

    /* basis in declaration order within each degree */
    std::istringstream in2(text);
    std::vector<std::pair<std::string, int>> order;
    {
        std::string raw2;
        while (std::getline(in2, raw2)) {
            std::string line = raw2;
            if (size_t hash = line.find('#'); hash != std::string::npos)
                line = line.substr(0, hash);
            line = strip(line);
            std::istringstream ls(line);
            std::string head, name;
            int d;
            if (ls >> head && head == "generator:" && ls >> name >> d)
                order.emplace_back(name, d);
        }
    }
    for (const auto& [name, d] : order) {
        if (d < m.lo || d > m.hi)
            throw destab_error("parse error: generator '" + name + "' in degree "
                               + std::to_string(d) + " outside window");
        m.basis.push(d, name);
    }

    /* assemble action blocks */
    std::map<std::pair<int, int>, Mat> blocks;
    for (const pending_action& a : actions) {
        parse_state at;
        at.lineno = a.lineno;
        auto it = degree_of.find(a.src);
        if (it == degree_of.end())
            at.fail("unknown generator '" + a.src + "'");
        int d = it->second;
        int target = d + (a.op == 0 ? 1 : 2 * a.op * (m.p - 1));
        if (target > m.hi) {
            if (!a.rhs.empty())
                at.fail("action lands in degree " + std::to_string(target)
                        + " above the window top");
            continue;
        }
        auto key = std::make_pair(a.op, d);
        if (!blocks.count(key))
            blocks[key] = Mat(m.dim(target), m.dim(d));
        Mat& block = blocks[key];
        int col = m.basis.index_of(d, a.src);
        for (const auto& [c, name] : a.rhs) {
            auto jt = degree_of.find(name);
            if (jt == degree_of.end())
                at.fail("unknown generator '" + name + "' on the right-hand side");
            if (jt->second != target)
                at.fail("'" + name + "' has degree " + std::to_string(jt->second)
                        + ", expected " + std::to_string(target));
            int row = m.basis.index_of(target, name);
            block.at(row, col) = add_mod(block.at(row, col), norm_mod(c, m.p), m.p);
        }
    }
    for (const auto& [key, block] : blocks)
        m.set_action_block(key.first, key.second, block);

    return suspend_by == 0 ? m : suspend(m, suspend_by);
}

std::string dump_module(const ModuleWindow& m)
{
    std::ostringstream out;
    out << "prime: " << m.p << "\n";
    out << "window: " << m.lo << " " << m.hi << "\n";
    for (const auto& [d, labels] : m.basis.labels)
        for (const std::string& l : labels)
            out << "generator: " << l << " " << d << "\n";
    for (const auto& [key, block] : m.action) {
        auto [op, d] = key;
        int target = d + m.op_degree(op);
        for (int c = 0; c < block.ncols; ++c) {
            std::ostringstream rhs;
            bool first = true;
            for (int r = 0; r < block.nrows; ++r) {
                if (block.at(r, c) == 0)
                    continue;
                if (!first)
                    rhs << " + ";
                rhs << block.at(r, c) << "*" << m.basis.at(target)[static_cast<size_t>(r)];
                first = false;
            }
            if (first)
                continue;
            if (op == 0)
                out << "beta ";
            else
                out << "P " << op << " ";
            out << m.basis.at(d)[static_cast<size_t>(c)] << " = " << rhs.str() << "\n";
        }
    }
    return out.str();
}

ModuleWindow builtin_sphere(int p, int t, int hi)
{
    ModuleWindow m;
    m.p = p;
    m.lo = t;
    m.hi = std::max(t, hi);
    m.basis.push(t, "x");
    return m;
}

ModuleWindow builtin_bv1(int p, int n)
{
    /* Lambda(u) tensor F_p[v], |u| = 1, |v| = 2, beta u = v,
     * P^k(v^j) = C(j,k) v^{j+k(p-1)}, P^k(u v^j) = C(j,k) u v^{j+k(p-1)},
     * beta(u v^j) = v^{j+1} */
    ModuleWindow m;
    m.p = p;
    m.lo = 0;
    m.hi = n;
    auto vlabel = [](int j) { return j == 0 ? std::string("1") : "v" + std::to_string(j); };
    auto ulabel = [](int j) { return j == 0 ? std::string("u") : "uv" + std::to_string(j); };
    for (int d = 0; d <= n; ++d)
        m.basis.push(d, d % 2 == 0 ? vlabel(d / 2) : ulabel((d - 1) / 2));

    for (int d = 0; d <= n; ++d) {
        /* beta */
        if (d + 1 <= n && d % 2 == 1) {
            Mat b(1, 1);
            b.at(0, 0) = 1; /* beta(u v^j) = v^{j+1} */
            m.set_action_block(0, d, b);
        }
        /* P^k */
        int j = d % 2 == 0 ? d / 2 : (d - 1) / 2;
        for (int k = 1; d + 2 * k * (p - 1) <= n; ++k) {
            Mat blk(1, 1);
            blk.at(0, 0) = binom_mod(j, k, p);
            m.set_action_block(k, d, blk);
        }
    }
    return m;
}

ModuleWindow load_module(SteenrodCtx& ctx, const std::string& spec, int deg_hint)
{
    auto builtin_arg = [&](const std::string& name) -> std::pair<bool, int> {
        if (spec.size() > name.size() + 2 && spec.compare(0, name.size() + 1, name + "(") == 0
            && spec.back() == ')') {
            std::string inner = spec.substr(name.size() + 1, spec.size() - name.size() - 2);
            try {
                size_t used = 0;
                int v = std::stoi(inner, &used);
                if (used == inner.size())
                    return {true, v};
            } catch (...) {
            }
            throw destab_error("bad argument in module spec '" + spec + "'");
        }
        return {false, 0};
    };

    if (auto [ok, t] = builtin_arg("sphere"); ok)
        return builtin_sphere(ctx.p(), t, deg_hint);
    if (auto [ok, n] = builtin_arg("free"); ok)
        return FreeModuleWindow{{{"g", n}}, n, std::max(n, deg_hint)}.materialize(ctx);
    if (auto [ok, n] = builtin_arg("bv1"); ok) {
        if (n < 0)
            throw destab_error("bad argument in module spec '" + spec + "'");
        return builtin_bv1(ctx.p(), n);
    }

    std::ifstream f(spec);
    if (!f)
        throw destab_error("cannot open module file '" + spec + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    ModuleWindow m = parse_module(buf.str());
    if (m.p != ctx.p())
        throw destab_error("prime mismatch: module file declares p = " + std::to_string(m.p)
                           + ", requested p = " + std::to_string(ctx.p()));
    return m;
}

std::vector<std::string> module_relation_violations(SteenrodCtx& ctx, const ModuleWindow& m)
{
    std::vector<std::string> out;
    int p = m.p;
    int imax = (m.hi - m.lo) / (2 * (p - 1));
    for (const auto& [d, labels] : m.basis.labels) {
        for (int l2 = 0; l2 <= imax; ++l2) {
            int mid = d + m.op_degree(l2);
            if (mid > m.hi)
                continue;
            for (int l1 = 0; l1 <= imax; ++l1) {
                int top = mid + m.op_degree(l1);
                if (top > m.hi)
                    continue;
                for (size_t c = 0; c < labels.size(); ++c) {
                    ModuleElt x = m.basis_elt(d, static_cast<int>(c));
                    ModuleElt lhs = act_letter(m, l1, act_letter(m, l2, x));
                    ModuleElt rhs = act(ctx, m, {l1, l2}, x);
                    if (lhs.v != rhs.v)
                        out.push_back("relation failure on '" + labels[c] + "' (degree "
                                      + std::to_string(d) + "): letters " + std::to_string(l1)
                                      + "," + std::to_string(l2));
                }
            }
        }
    }
    return out;
}

} // namespace destab
