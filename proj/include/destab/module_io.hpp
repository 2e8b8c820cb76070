#pragma once

/* Loading and saving module windows.
 *
 * Text format (UTF-8, line oriented; '#' starts a comment):
 *   prime: <p>
 *   window: <lo> <hi>
 *   generator: <name> <degree>
 *   beta <name> = <lincomb>
 *   P <i> <name> = <lincomb>
 *   suspend: <t>
 * where <lincomb> is `c1*n1 + c2*n2 + ...` (bare names mean coefficient 1)
 * or `0`.  Unlisted actions are zero; actions landing above the window top
 * are rejected.  `suspend: t` applies a degree shift after loading.
 *
 * Built-in module specs accepted by load_module:
 *   sphere(t)  one class in degree t, trivial action
 *   free(n)    free module on one generator in degree n
 *   bv1(N)     the length-one exterior-times-polynomial algebra
 *              (one odd class u, one even class v, beta u = v), degrees <= N
 */

#include <string>
#include <vector>

#include "destab/steenrod.hpp"

namespace destab {

ModuleWindow parse_module(const std::string& text);
std::string dump_module(const ModuleWindow& m);

ModuleWindow builtin_sphere(int p, int t, int hi);
ModuleWindow builtin_bv1(int p, int n);

/* spec: builtin pattern or a path to a module file; deg_hint bounds the
 * window top for builtins that need one.  Throws "prime mismatch" when the
 * file declares a different prime. */
ModuleWindow load_module(SteenrodCtx& ctx, const std::string& spec, int deg_hint);

/* Certify the window action: every adjacent pair of letters satisfies the
 * rewriting relations on every basis element (beta^2 = 0 included).
 * Returns human-readable violation descriptions, empty when consistent. */
std::vector<std::string> module_relation_violations(SteenrodCtx& ctx, const ModuleWindow& m);

} // namespace destab
