#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qake/auth.hpp"
#include "qake/bits.hpp"
#include "qake/rng.hpp"

namespace qake {

using PartyId = std::string;

/// Lookup failures (unknown party, unknown label, unknown session) are
/// distinct from protocol errors: they signal a bad query, not an attack.
struct lookup_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SessionId {
    PartyId owner;
    uint64_t local = 0;

    std::string to_string() const { return owner + "/" + std::to_string(local); }
    auto operator<=>(const SessionId&) const = default;
};

/// Lifecycle of a value pair: generated but not yet consumed, bound to one
/// session, or long-term.
enum class PairKind { unused, ephemeral, static_key };

/// What a pair is for. Mirrors the randomness classes a protocol run
/// consumes: long-term signing keys, per-session data and basis bits, and
/// the seeds for the reconciliation and amplification functions.
enum class ValueRole { static_key, data_bits, basis_bits, ir_randomness, pa_randomness };

inline const char* role_tag(ValueRole r) {
    switch (r) {
        case ValueRole::static_key: return "sig";
        case ValueRole::data_bits: return "data";
        case ValueRole::basis_bits: return "basis";
        case ValueRole::ir_randomness: return "ir";
        case ValueRole::pa_randomness: return "pa";
    }
    return "?";
}

/// A private value plus its public handle. Labels are minted at creation
/// and never derived from the private value.
struct ValuePair {
    std::string label;
    BitString private_value;
    ValueRole role = ValueRole::data_bits;
    PairKind kind = PairKind::unused;
    PartyId owner;
};

/// The tuple a completed session emits. `v` binds the session to the value
/// pairs that produced the key; `u` names the peer-authentication material.
struct SessionOutput {
    BitString sk;
    PartyId pid;
    std::vector<std::vector<std::string>> v;
    std::vector<std::vector<std::string>> u;

    bool operator==(const SessionOutput&) const = default;
};

/// True iff both peers computed the same key and the same binding vector.
inline bool check_correctness(const SessionOutput& a, const SessionOutput& b) {
    return a.sk == b.sk && a.v == b.v;
}

enum class QueryKind { reveal_next, partner_value, partner_session };

struct LogEntry {
    uint64_t ordinal = 0;
    QueryKind kind = QueryKind::reveal_next;
    std::string target;  // label, or sid string for partner_session
};

/// Time-ordered record of adversary queries plus session-completion marks.
/// Ordinals come from the world clock and are strictly increasing.
class PartneringLog {
public:
    void append(uint64_t ordinal, QueryKind kind, const std::string& target) {
        if (!entries_.empty() && ordinal <= entries_.back().ordinal)
            throw std::logic_error("PartneringLog: ordinals must increase");
        entries_.push_back({ordinal, kind, target});
    }
    void mark_completion(const SessionId& sid, uint64_t ordinal) {
        completion_marks_[sid.to_string()] = ordinal;
    }
    std::optional<uint64_t> completion_mark(const SessionId& sid) const {
        auto it = completion_marks_.find(sid.to_string());
        if (it == completion_marks_.end()) return std::nullopt;
        return it->second;
    }

    const std::vector<LogEntry>& entries() const { return entries_; }

    /// Ordinal of the first Partner query against a value label, if any.
    std::optional<uint64_t> first_partner(const std::string& label) const {
        for (const auto& e : entries_)
            if (e.kind == QueryKind::partner_value && e.target == label) return e.ordinal;
        return std::nullopt;
    }
    bool ever_partnered(const std::string& label) const { return first_partner(label).has_value(); }

    std::vector<std::string> partnered_sessions() const {
        std::vector<std::string> out;
        for (const auto& e : entries_)
            if (e.kind == QueryKind::partner_session) out.push_back(e.target);
        return out;
    }

private:
    std::vector<LogEntry> entries_;
    std::map<std::string, uint64_t> completion_marks_;
};

/// Registry row for a completed session; condition 2 of the freshness
/// definition matches sessions by public output vector.
struct CompletedSession {
    SessionId sid;
    PartyId owner;
    bool owner_honest = true;
    SessionOutput output;
    uint64_t completion_mark = 0;
};

class SessionRegistry {
public:
    void add(CompletedSession row) { rows_.push_back(std::move(row)); }
    const std::vector<CompletedSession>& rows() const { return rows_; }

    const CompletedSession* find(const std::string& sid_str) const {
        for (const auto& r : rows_)
            if (r.sid.to_string() == sid_str) return &r;
        return nullptr;
    }

private:
    std::vector<CompletedSession> rows_;
};

/// Freshness of a completed session against the query log:
///  1. every component of v retains at least one element never partnered
///     (decided at the end of the adversary's execution; the index-origin
///     ambiguity is resolved by checking all listed components),
///  2. no session with an equal public output vector, owned by an honest
///     party, had its key revealed via a session Partner query,
///  3. every component of u had, at completion time, at least one element
///     not yet partnered.
inline bool evaluate_freshness(const SessionOutput& output, const SessionId& sid,
                               const PartneringLog& log, const SessionRegistry& registry) {
    auto mark = log.completion_mark(sid);
    if (!mark) throw std::invalid_argument("evaluate_freshness: session has no completion mark");

    for (const auto& component : output.v) {
        bool has_unpartnered = false;
        for (const auto& label : component)
            if (!log.ever_partnered(label)) {
                has_unpartnered = true;
                break;
            }
        if (!has_unpartnered) return false;
    }

    for (const auto& sid_str : log.partnered_sessions()) {
        const CompletedSession* row = registry.find(sid_str);
        if (row && row->owner_honest && row->output.v == output.v) return false;
    }

    for (const auto& component : output.u) {
        bool has_unpartnered_at_completion = false;
        for (const auto& label : component) {
            auto first = log.first_partner(label);
            if (!first || *first > *mark) {
                has_unpartnered_at_completion = true;
                break;
            }
        }
        if (!has_unpartnered_at_completion) return false;
    }
    return true;
}

struct Party {
    PartyId id;
    bool honest = true;
    Rng r_source;  // classical randomness tape
    Rng q_device;  // measurement randomness
    std::map<std::string, ValuePair> pairs;
    std::map<ValueRole, std::deque<std::string>> unused;
    uint64_t next_local_sid = 0;
    uint64_t next_pair_index = 0;

    Party(PartyId pid, bool is_honest, Rng r, Rng q)
        : id(std::move(pid)), honest(is_honest), r_source(std::move(r)), q_device(std::move(q)) {}
};

struct WorldConfig {
    int n1 = 512;
    double abort_threshold = 0.061;
    SigScheme sig_scheme = SigScheme::ideal;
    uint64_t breakable_keyspace = uint64_t{1} << 16;
};

/// One simulation world: parties, the global event clock, the query log,
/// completed-session registry and the signature ledger. Single-threaded;
/// independent worlds may run in parallel.
class World {
public:
    World(WorldConfig cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {}

    const WorldConfig& config() const { return cfg_; }
    uint64_t seed() const { return seed_; }

    uint64_t next_ordinal() { return ++clock_; }
    uint64_t now() const { return clock_; }

    Party& register_party(const PartyId& id, bool honest) {
        if (parties_.count(id)) throw std::invalid_argument("register_party: duplicate id " + id);
        uint64_t idx = party_order_.size();
        parties_.emplace(id, Party(id, honest,
                                   Rng::derive(seed_, {idx, 0}),
                                   Rng::derive(seed_, {idx, 1})));
        party_order_.push_back(id);
        Party& p = parties_.at(id);
        const ValuePair& key = mint_pair(p, ValueRole::static_key);
        verify_keys_[id] = key.label;
        return p;
    }

    Party& party(const PartyId& id) {
        auto it = parties_.find(id);
        if (it == parties_.end()) throw lookup_error("unknown party: " + id);
        return it->second;
    }
    const Party& party(const PartyId& id) const {
        auto it = parties_.find(id);
        if (it == parties_.end()) throw lookup_error("unknown party: " + id);
        return it->second;
    }
    bool has_party(const PartyId& id) const { return parties_.count(id) > 0; }
    const std::vector<PartyId>& party_order() const { return party_order_; }

    /// Authenticated public-key directory: distributed by construction.
    const std::string& verify_key_of(const PartyId& id) const {
        auto it = verify_keys_.find(id);
        if (it == verify_keys_.end()) throw lookup_error("no verify key for " + id);
        return it->second;
    }

    /// Generates a fresh pair from the party's randomness source. Pairs of
    /// dishonest parties are partnered the moment they exist.
    ValuePair& mint_pair(Party& p, ValueRole role) {
        ValuePair vp;
        vp.label = p.id + ":" + role_tag(role) + ":" + std::to_string(p.next_pair_index++);
        vp.role = role;
        vp.owner = p.id;
        switch (role) {
            case ValueRole::static_key:
                vp.kind = PairKind::static_key;
                vp.private_value =
                    cfg_.sig_scheme == SigScheme::breakable
                        ? BitString::from_uint64(p.r_source.below(cfg_.breakable_keyspace), 64)
                        : BitString::from_uint64(p.r_source.next_u64(), 64);
                break;
            case ValueRole::data_bits:
            case ValueRole::basis_bits:
                vp.kind = PairKind::unused;
                vp.private_value = p.r_source.bits(static_cast<std::size_t>(cfg_.n1));
                break;
            case ValueRole::ir_randomness:
            case ValueRole::pa_randomness:
                vp.kind = PairKind::unused;
                vp.private_value = p.r_source.bits(64);
                break;
        }
        auto [it, ok] = p.pairs.emplace(vp.label, std::move(vp));
        if (!ok) throw std::logic_error("mint_pair: label collision");
        if (it->second.kind == PairKind::unused) p.unused[role].push_back(it->second.label);
        if (!p.honest) log_.append(next_ordinal(), QueryKind::partner_value, it->second.label);
        return it->second;
    }

    /// Registers a pair holding an externally produced value (e.g. a
    /// measurement outcome). Same bookkeeping as mint_pair.
    ValuePair& mint_pair_with_value(Party& p, ValueRole role, BitString value, PairKind kind) {
        ValuePair vp;
        vp.label = p.id + ":" + role_tag(role) + ":" + std::to_string(p.next_pair_index++);
        vp.role = role;
        vp.kind = kind;
        vp.owner = p.id;
        vp.private_value = std::move(value);
        auto [it, ok] = p.pairs.emplace(vp.label, std::move(vp));
        if (!ok) throw std::logic_error("mint_pair_with_value: label collision");
        if (it->second.kind == PairKind::unused) p.unused[role].push_back(it->second.label);
        if (!p.honest) log_.append(next_ordinal(), QueryKind::partner_value, it->second.label);
        return it->second;
    }

    /// Consumes the oldest unused pair of the role, or mints one. The pair
    /// becomes ephemeral, bound to the calling session.
    ValuePair& take_pair(Party& p, ValueRole role) {
        auto& queue = p.unused[role];
        std::string label;
        if (!queue.empty()) {
            label = queue.front();
            queue.pop_front();
        } else {
            label = mint_pair(p, role).label;
            queue.pop_back();
        }
        ValuePair& vp = p.pairs.at(label);
        vp.kind = PairKind::ephemeral;
        return vp;
    }

    // ---- adversary queries -------------------------------------------------

    /// RevealNext: generate a future value pair, keep it unused, return the
    /// public label. The adversary is not a partner to it.
    std::string reveal_next(const PartyId& pid, ValueRole role) {
        Party& p = party(pid);
        const ValuePair& vp = mint_pair(p, role);
        log_.append(next_ordinal(), QueryKind::reveal_next, vp.label);
        return vp.label;
    }

    /// Partner(label): reveal the private value behind a public label.
    BitString partner_value(const PartyId& pid, const std::string& label) {
        Party& p = party(pid);
        auto it = p.pairs.find(label);
        if (it == p.pairs.end()) throw lookup_error("partner: no pair with label " + label);
        log_.append(next_ordinal(), QueryKind::partner_value, label);
        return it->second.private_value;
    }

    /// Partner(sid): reveal the session key of a completed own session.
    BitString partner_session(const PartyId& pid, const SessionId& sid) {
        if (sid.owner != pid) throw lookup_error("partner: session not owned by " + pid);
        const CompletedSession* row = registry_.find(sid.to_string());
        if (!row) throw lookup_error("partner: no completed session " + sid.to_string());
        log_.append(next_ordinal(), QueryKind::partner_session, sid.to_string());
        return row->output.sk;
    }

    /// Finds the owner of a label across parties (labels are globally
    /// unique by construction).
    std::optional<PartyId> owner_of_label(const std::string& label) const {
        for (const auto& [id, p] : parties_)
            if (p.pairs.count(label)) return id;
        return std::nullopt;
    }

    bool is_partnered(const std::string& label) const { return log_.ever_partnered(label); }

    // ---- session completion ------------------------------------------------

    void record_completion(const SessionId& sid, const SessionOutput& out, uint64_t ordinal) {
        log_.mark_completion(sid, ordinal);
        registry_.add({sid, sid.owner, party(sid.owner).honest, out, ordinal});
    }

    bool fresh(const SessionId& sid) const {
        const CompletedSession* row = registry_.find(sid.to_string());
        if (!row) throw std::invalid_argument("fresh: session not completed");
        return evaluate_freshness(row->output, sid, log_, registry_);
    }

    const PartneringLog& log() const { return log_; }
    PartneringLog& log_mut() { return log_; }
    const SessionRegistry& registry() const { return registry_; }

    // ---- signing -----------------------------------------------------------

    /// Signs on behalf of `caller`. Callers must own the key or have
    /// partnered its verify label; anything else is a harness bug.
    std::string sign(const PartyId& caller, const std::string& verify_key,
                     const std::vector<uint8_t>& msg) {
        auto owner = owner_of_label(verify_key);
        if (!owner) throw lookup_error("sign: unknown verify key " + verify_key);
        if (*owner != caller && !log_.ever_partnered(verify_key))
            throw std::logic_error("sign: caller neither owns nor partners " + verify_key);
        ledger_.record(verify_key, msg);
        if (cfg_.sig_scheme == SigScheme::ideal) return ideal_tag(verify_key, msg);
        return breakable_tag(party(*owner).pairs.at(verify_key).private_value.to_uint64(), msg);
    }

    /// Verification as performed inside protocol processing. A signature
    /// that verifies without a ledger entry is an accepted forgery and is
    /// counted: with the ideal scheme this cannot happen unless the signing
    /// key was partnered.
    bool verify_protocol(const std::string& verify_key, const std::vector<uint8_t>& msg,
                         const std::string& tag) {
        ++verify_calls_;
        bool ok = false;
        if (cfg_.sig_scheme == SigScheme::ideal) {
            ok = ledger_.contains(verify_key, msg) && tag == ideal_tag(verify_key, msg);
        } else {
            auto owner = owner_of_label(verify_key);
            if (owner)
                ok = tag == breakable_tag(
                                party(*owner).pairs.at(verify_key).private_value.to_uint64(), msg);
        }
        if (ok && !ledger_.contains(verify_key, msg)) ++forged_accepted_;
        return ok;
    }

    const SignatureLedger& ledger() const { return ledger_; }
    uint64_t forged_accepted() const { return forged_accepted_; }
    uint64_t verify_calls() const { return verify_calls_; }

private:
    WorldConfig cfg_;
    uint64_t seed_;
    uint64_t clock_ = 0;
    std::map<PartyId, Party> parties_;
    std::vector<PartyId> party_order_;
    std::map<PartyId, std::string> verify_keys_;
    PartneringLog log_;
    SessionRegistry registry_;
    SignatureLedger ledger_;
    uint64_t forged_accepted_ = 0;
    uint64_t verify_calls_ = 0;
};

}  // namespace qake
