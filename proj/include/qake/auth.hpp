#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "qake/bits.hpp"

namespace qake {

/// Two stand-ins for a real signature algorithm: `ideal` is unforgeable by
/// construction (a ledger of honestly signed messages decides verification),
/// `breakable` is a deterministic tag over a deliberately small keyspace so
/// an offline search can recover the signing key.
enum class SigScheme { ideal, breakable };

inline const char* to_string(SigScheme s) {
    return s == SigScheme::ideal ? "ideal" : "breakable";
}

namespace detail {

inline uint64_t fnv1a(const std::vector<uint8_t>& data, uint64_t seed = 0xcbf29ce484222325ULL) {
    uint64_t h = seed;
    for (uint8_t b : data) {
        h ^= b;
        h *= 0x00000100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a_str(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x00000100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Tag of the ideal scheme. Publicly computable; verification is gated by
/// the ledger, not by tag secrecy.
inline std::string ideal_tag(const std::string& verify_key, const std::vector<uint8_t>& msg) {
    uint64_t h = detail::fnv1a(msg, detail::fnv1a_str(verify_key));
    BitString t = BitString::from_uint64(splitmix64(h), 64);
    return t.to_hex();
}

/// Tag of the breakable scheme: a keyed mix of the message digest.
inline std::string breakable_tag(uint64_t signing_key, const std::vector<uint8_t>& msg) {
    uint64_t h = detail::fnv1a(msg);
    uint64_t t = splitmix64(signing_key ^ splitmix64(h ^ 0xa5a5a5a5a5a5a5a5ULL));
    return BitString::from_uint64(t, 64).to_hex();
}

/// Record of every message honestly signed under a verify key. Realizes the
/// unforgeability idealization: a signature that verifies without a ledger
/// entry is, by definition, an accepted forgery.
class SignatureLedger {
public:
    void record(const std::string& verify_key, const std::vector<uint8_t>& msg) {
        entries_.insert({verify_key, msg});
    }
    bool contains(const std::string& verify_key, const std::vector<uint8_t>& msg) const {
        return entries_.count({verify_key, msg}) > 0;
    }
    std::size_t size() const { return entries_.size(); }

private:
    std::set<std::pair<std::string, std::vector<uint8_t>>> entries_;
};

struct SignObservation {
    std::vector<uint8_t> msg;
    std::string tag;
};

/// Exhaustive key search over the breakable keyspace. Returns the smallest
/// signing key consistent with every observation, or nullopt if none is.
inline std::optional<uint64_t> brute_force_key(const std::vector<SignObservation>& observed,
                                               uint64_t keyspace) {
    if (observed.empty()) throw std::invalid_argument("brute_force_key: no observations");
    for (uint64_t key = 0; key < keyspace; ++key) {
        bool ok = true;
        for (const auto& obs : observed) {
            if (breakable_tag(key, obs.msg) != obs.tag) {
                ok = false;
                break;
            }
        }
        if (ok) return key;
    }
    return std::nullopt;
}

}  // namespace qake
