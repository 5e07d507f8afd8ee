#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qake/bits.hpp"
#include "qake/rng.hpp"

namespace qake {

namespace detail {

// Arithmetic on unsigned integers modulo 2^w, little-endian u64 limbs.
// Hash inputs are key-sized (hundreds of bits), so no general bignum is
// needed: multiply, add and shift in the 2^w ring suffice.

inline std::size_t limb_count(int w) { return (static_cast<std::size_t>(w) + 63) / 64; }

inline void mask_top(std::vector<uint64_t>& v, int w) {
    const int rem = w % 64;
    if (rem != 0) v.back() &= (uint64_t{1} << rem) - 1;
}

inline std::vector<uint64_t> add_mod_pow2(const std::vector<uint64_t>& a,
                                          const std::vector<uint64_t>& b, int w) {
    const std::size_t n = limb_count(w);
    std::vector<uint64_t> r(n, 0);
    unsigned __int128 carry = 0;
    for (std::size_t i = 0; i < n; ++i) {
        unsigned __int128 s = carry;
        if (i < a.size()) s += a[i];
        if (i < b.size()) s += b[i];
        r[i] = static_cast<uint64_t>(s);
        carry = s >> 64;
    }
    mask_top(r, w);
    return r;
}

inline std::vector<uint64_t> mul_mod_pow2(const std::vector<uint64_t>& a,
                                          const std::vector<uint64_t>& b, int w) {
    const std::size_t n = limb_count(w);
    std::vector<uint64_t> r(n, 0);
    for (std::size_t i = 0; i < n && i < a.size(); ++i) {
        unsigned __int128 carry = 0;
        for (std::size_t j = 0; i + j < n; ++j) {
            unsigned __int128 cur = r[i + j] + carry;
            if (j < b.size()) cur += static_cast<unsigned __int128>(a[i]) * b[j];
            r[i + j] = static_cast<uint64_t>(cur);
            carry = cur >> 64;
        }
    }
    mask_top(r, w);
    return r;
}

inline std::vector<uint64_t> shift_right(const std::vector<uint64_t>& a, int k) {
    const std::size_t limb_shift = static_cast<std::size_t>(k) / 64;
    const int bit_shift = k % 64;
    std::vector<uint64_t> r(a.size(), 0);
    for (std::size_t i = 0; i + limb_shift < a.size(); ++i) {
        uint64_t v = a[i + limb_shift] >> bit_shift;
        if (bit_shift != 0 && i + limb_shift + 1 < a.size())
            v |= a[i + limb_shift + 1] << (64 - bit_shift);
        r[i] = v;
    }
    return r;
}

}  // namespace detail

/// Binary entropy h(eps) in bits, with h(0) = h(1) = 0.
inline double binary_entropy(double eps) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("binary_entropy: eps outside [0,1]");
    if (eps == 0.0 || eps == 1.0) return 0.0;
    return -eps * std::log2(eps) - (1.0 - eps) * std::log2(1.0 - eps);
}

/// Multiply-shift hash parameters: x -> ((a*x + b) mod 2^w) div 2^(w-out_len).
/// `a` is odd, `b` = i * 2^(w/2) for a sampled i. Values in limb form.
struct HashParams {
    int w = 0;        // input width in bits
    int out_len = 0;  // output width in bits
    std::vector<uint64_t> a;
    std::vector<uint64_t> b;
};

/// Samples a member of the 2-universal family. w must be even so that the
/// offset b = i * 2^(w/2) is well defined.
inline HashParams sample_hash(int w, int out_len, Rng& rng) {
    if (w < 2 || w % 2 != 0) throw std::invalid_argument("sample_hash: w must be even and >= 2");
    if (out_len < 1 || out_len >= w) throw std::invalid_argument("sample_hash: need 1 <= out_len < w");
    HashParams p;
    p.w = w;
    p.out_len = out_len;
    BitString a_bits = rng.bits(static_cast<std::size_t>(w));
    a_bits[static_cast<std::size_t>(w) - 1] = 1;  // force odd
    p.a = a_bits.to_limbs();
    // b's bit pattern is i (w/2 bits) followed by w/2 zeros
    BitString b_bits = rng.bits(static_cast<std::size_t>(w) / 2);
    b_bits.append(BitString(static_cast<std::size_t>(w) / 2));
    p.b = b_bits.to_limbs();
    return p;
}

inline BitString hash_eval(const HashParams& p, const BitString& x) {
    if (static_cast<int>(x.size()) != p.w) throw std::invalid_argument("hash_eval: width mismatch");
    auto acc = detail::mul_mod_pow2(p.a, x.to_limbs(), p.w);
    acc = detail::add_mod_pow2(acc, p.b, p.w);
    acc = detail::shift_right(acc, p.w - p.out_len);
    return BitString::from_limbs(acc, static_cast<std::size_t>(p.out_len));
}

inline int ceil_log2(uint64_t x) {
    int k = 0;
    while ((uint64_t{1} << k) < x) ++k;
    return k;
}

/// Sublinear slack instantiating the o(n) terms of the output-length
/// formulas. Constants chosen so desk-scale reconciliation succeeds.
inline int slack_ir(int n3) { return ceil_log2(static_cast<uint64_t>(n3) + 1) + 4; }
inline int slack_pa(int n3) { return ceil_log2(static_cast<uint64_t>(n3) + 1); }

/// Reconciliation hash width r' = ceil(n3*h(eps)) + slack, capped at n3.
inline int ir_output_len(int n3, double eps) {
    if (n3 < 1) throw std::invalid_argument("ir_output_len: n3 < 1");
    if (eps < 0.0 || eps >= 0.5) throw std::invalid_argument("ir_output_len: eps outside [0, 0.5)");
    const int r = static_cast<int>(std::ceil(static_cast<double>(n3) * binary_entropy(eps)));
    return std::min(n3, r + slack_ir(n3));
}

/// Amplified key width s' = n3 - ceil(3*n3*h(eps)) - slack; 0 signals that
/// no key is extractable.
inline int pa_output_len(int n3, double eps) {
    if (n3 < 1) throw std::invalid_argument("pa_output_len: n3 < 1");
    const int burn = static_cast<int>(std::ceil(3.0 * static_cast<double>(n3) * binary_entropy(eps)));
    return std::max(0, n3 - burn - slack_pa(n3));
}

struct Permutation {
    std::vector<uint32_t> map;  // out[i] = in[map[i]]; a bijection

    std::size_t size() const { return map.size(); }
};

inline Permutation sample_permutation(std::size_t n, Rng& rng) {
    Permutation p;
    p.map.resize(n);
    std::iota(p.map.begin(), p.map.end(), 0u);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(p.map[i - 1], p.map[j]);
    }
    return p;
}

inline BitString apply(const Permutation& p, const BitString& in) {
    if (p.size() != in.size()) throw std::invalid_argument("Permutation::apply: size mismatch");
    BitString out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[p.map[i]];
    return out;
}

/// Privacy-amplification parameters: permutation P followed by hash G.
struct PaParams {
    Permutation perm;
    HashParams hash;  // hash.w = n3 rounded up to even, hash.out_len = s'
};

namespace detail {

// Keys narrower than the hash width are zero-padded at the MSB end, which
// preserves the integer value. Protocol widths pad by at most two bits.
inline BitString eval_padded(const HashParams& p, const BitString& x) {
    if (static_cast<int>(x.size()) == p.w) return hash_eval(p, x);
    if (static_cast<int>(x.size()) > p.w || static_cast<int>(x.size()) + 2 < p.w)
        throw std::invalid_argument("eval_padded: width mismatch");
    BitString padded(static_cast<std::size_t>(p.w) - x.size());
    padded.append(x);
    return hash_eval(p, padded);
}

}  // namespace detail

inline int pad_even(int n) { return n % 2 == 0 ? n : n + 1; }

inline BitString privacy_amplify(const BitString& k, const PaParams& pa) {
    if (pa.perm.size() != k.size()) throw std::invalid_argument("privacy_amplify: perm size mismatch");
    return detail::eval_padded(pa.hash, apply(pa.perm, k));
}

/// Default error-pattern search bound: twice the expected error count at the
/// abort threshold, plus one.
inline int default_reconcile_weight(int n3) {
    return static_cast<int>(std::ceil(2.0 * 0.061 * static_cast<double>(n3))) + 1;
}

/// Corrects k_b against the disclosed hash value f_val by searching error
/// patterns of increasing Hamming weight (lexicographic within a weight).
/// Returns the first match, or nullopt when no pattern within max_weight
/// matches. An optional candidate budget bounds the search work.
inline std::optional<BitString> reconcile(const BitString& k_b, const HashParams& f,
                                          const BitString& f_val, int max_weight,
                                          uint64_t max_candidates = uint64_t{1} << 22) {
    const int n = static_cast<int>(k_b.size());
    if (f.w < n || f.w > n + 2) throw std::invalid_argument("reconcile: hash width mismatch");
    if (static_cast<int>(f_val.size()) != f.out_len)
        throw std::invalid_argument("reconcile: f_val width mismatch");

    uint64_t tried = 0;
    BitString candidate = k_b;
    if (detail::eval_padded(f, candidate) == f_val) return candidate;
    ++tried;

    std::vector<int> pos;
    for (int weight = 1; weight <= max_weight && weight <= n; ++weight) {
        pos.resize(static_cast<std::size_t>(weight));
        for (int i = 0; i < weight; ++i) pos[static_cast<std::size_t>(i)] = i;
        while (true) {
            candidate = k_b;
            for (int p : pos) candidate.flip(static_cast<std::size_t>(p));
            if (detail::eval_padded(f, candidate) == f_val) return candidate;
            if (++tried >= max_candidates) return std::nullopt;
            // advance to the next combination in lexicographic order
            int i = weight - 1;
            while (i >= 0 && pos[static_cast<std::size_t>(i)] == n - weight + i) --i;
            if (i < 0) break;
            ++pos[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < weight; ++j)
                pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return std::nullopt;
}

/// Distance-from-uniform bound 3 * 2^(-(n3 - r - s + 1)/2) on the amplified
/// key. Raw value; reports clamp to 1 where it exceeds it.
inline double security_delta(int n3, int r, int s) {
    if (n3 < 1) throw std::invalid_argument("security_delta: n3 < 1");
    const double exponent = -(static_cast<double>(n3 - r - s) + 1.0) / 2.0;
    return 3.0 * std::exp2(exponent);
}

/// Root of 1 - 3*h(eps) = 0 on (0, 0.5): the error rate at which the
/// amplified key length formula reaches zero. Bisection.
inline double solve_threshold() {
    double lo = 1e-12, hi = 0.5;
    while (hi - lo > 1e-9) {
        double mid = 0.5 * (lo + hi);
        if (1.0 - 3.0 * binary_entropy(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace qake
