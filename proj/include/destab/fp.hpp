#pragma once

/* Scalar arithmetic over F_p for an odd prime p.  Everything is kept in the
 * least nonnegative residue system.  Binomial coefficients are taken mod p by
 * Lucas' theorem; negative upper arguments are handled through the standard
 * reflection C(n, k) = (-1)^k C(k - n - 1, k) so that the generalized
 * binomial series coefficients come out right. */

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace destab {

class destab_error : public std::runtime_error {
public:
    explicit destab_error(const std::string& what) : std::runtime_error(what) {}
};

inline bool is_odd_prime(int p)
{
    if (p < 3 || p % 2 == 0)
        return false;
    for (int d = 3; d * d <= p; d += 2)
        if (p % d == 0)
            return false;
    return true;
}

inline int norm_mod(long long a, int p)
{
    long long r = a % p;
    return static_cast<int>(r < 0 ? r + p : r);
}

inline int add_mod(int a, int b, int p) { return norm_mod(static_cast<long long>(a) + b, p); }
inline int sub_mod(int a, int b, int p) { return norm_mod(static_cast<long long>(a) - b, p); }
inline int mul_mod(int a, int b, int p) { return norm_mod(static_cast<long long>(a) * b, p); }
inline int neg_mod(int a, int p) { return norm_mod(-static_cast<long long>(a), p); }

inline int pow_mod(int a, long long e, int p)
{
    if (e < 0)
        throw destab_error("pow_mod: negative exponent");
    long long base = norm_mod(a, p), acc = 1;
    while (e > 0) {
        if (e & 1)
            acc = acc * base % p;
        base = base * base % p;
        e >>= 1;
    }
    return static_cast<int>(acc);
}

inline int inv_mod(int a, int p)
{
    a = norm_mod(a, p);
    if (a == 0)
        throw destab_error("inv_mod: zero has no inverse");
    return pow_mod(a, p - 2, p);
}

/* C(n, k) mod p for 0 <= n, k < p by table-free direct computation. */
inline int binom_small(int n, int k, int p)
{
    if (k < 0 || k > n)
        return 0;
    long long num = 1, den = 1;
    for (int i = 0; i < k; ++i) {
        num = num * ((n - i) % p) % p;
        den = den * ((i + 1) % p) % p;
    }
    return mul_mod(static_cast<int>(num), inv_mod(static_cast<int>(den), p), p);
}

/* C(n, k) mod p for arbitrary integer n and k >= 0 (0 for k < 0). */
inline int binom_mod(long long n, long long k, int p)
{
    if (k < 0)
        return 0;
    if (k == 0)
        return 1;
    if (n < 0) {
        /* C(n,k) = (-1)^k C(k-n-1, k) */
        int sign = (k % 2 == 0) ? 1 : p - 1;
        return mul_mod(sign, binom_mod(k - n - 1, k, p), p);
    }
    if (k > n)
        return 0;
    /* Lucas */
    long long acc = 1;
    while (n > 0 || k > 0) {
        int nd = static_cast<int>(n % p), kd = static_cast<int>(k % p);
        acc = acc * binom_small(nd, kd, p) % p;
        if (acc == 0)
            return 0;
        n /= p;
        k /= p;
    }
    return static_cast<int>(acc);
}

/* (sum parts)! / prod(parts!) mod p, parts nonnegative. */
inline int multinomial_mod(const std::vector<long long>& parts, int p)
{
    long long total = 0;
    long long acc = 1;
    for (long long part : parts) {
        if (part < 0)
            return 0;
        total += part;
        acc = acc * binom_mod(total, part, p) % p;
        if (acc == 0)
            return 0;
    }
    return static_cast<int>(acc);
}

} // namespace destab
