#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qake/bits.hpp"
#include "qake/info_theory.hpp"
#include "qake/model.hpp"
#include "qake/quantum.hpp"

namespace qake::bb84 {

// ---- wire format ------------------------------------------------------------

/// Classical message tags, one per protocol step that emits a message.
enum class MsgTag : uint8_t {
    start = 1,  // step 1: session open, no signature
    basis = 2,  // step 3: responder's basis bits
    sift = 3,   // step 4: initiator's basis bits, check indices, check bits
    rate = 4,   // step 5: measured error rate
    recon = 5,  // step 6: reconciliation and amplification parameters
};

inline const char* tag_name(MsgTag t) {
    switch (t) {
        case MsgTag::start: return "start";
        case MsgTag::basis: return "basis";
        case MsgTag::sift: return "sift";
        case MsgTag::rate: return "rate";
        case MsgTag::recon: return "recon";
    }
    return "?";
}

/// A classical protocol message. Everything except the routing hint `to`
/// and the trailing signature is covered by the signature, serialized
/// canonically with length-prefixed fields so signer and verifier hash
/// identical bytes.
struct Message {
    MsgTag tag = MsgTag::start;
    SessionId sid_a;
    std::optional<SessionId> sid_b;
    PartyId sender;  // claimed sender, part of the signed bytes
    PartyId to;      // routing hint only

    BitString basis_bits;             // basis: b_B; sift: b_A
    BitString ind, chk;               // sift
    uint64_t eps_num = 0, eps_den = 0;  // rate: error count / check count
    HashParams f;                     // recon
    BitString f_val;                  // recon
    Permutation perm;                 // recon
    HashParams g;                     // recon
    std::string label_d, label_b;     // basis/sift: value-pair labels
    std::string label_f, label_pg;    // recon

    std::string sig;  // fixed-width hex tag; empty on start

    std::vector<uint8_t> signed_bytes() const {
        ByteWriter w;
        w.u8(static_cast<uint8_t>(tag));
        w.str(sid_a.owner);
        w.u64(sid_a.local);
        w.u8(sid_b ? 1 : 0);
        if (sid_b) {
            w.str(sid_b->owner);
            w.u64(sid_b->local);
        }
        switch (tag) {
            case MsgTag::start:
                break;
            case MsgTag::basis:
                w.bits(basis_bits);
                w.str(label_d);
                w.str(label_b);
                break;
            case MsgTag::sift:
                w.bits(basis_bits);
                w.bits(ind);
                w.bits(chk);
                w.str(label_d);
                w.str(label_b);
                break;
            case MsgTag::rate:
                w.u64(eps_num);
                w.u64(eps_den);
                break;
            case MsgTag::recon:
                w.u32(static_cast<uint32_t>(f.w));
                w.u32(static_cast<uint32_t>(f.out_len));
                w.u64_vec(f.a);
                w.u64_vec(f.b);
                w.bits(f_val);
                w.u32_vec(perm.map);
                w.u32(static_cast<uint32_t>(g.w));
                w.u32(static_cast<uint32_t>(g.out_len));
                w.u64_vec(g.a);
                w.u64_vec(g.b);
                w.str(label_f);
                w.str(label_pg);
                break;
        }
        w.str(sender);
        return w.take();
    }

    double eps() const { return eps_den == 0 ? 0.0 : static_cast<double>(eps_num) / eps_den; }
};

// ---- pure operations ---------------------------------------------------------

/// Keeps bits[i] exactly where the two basis strings agree, order preserved.
inline BitString sift(const BitString& b_own, const BitString& b_peer, const BitString& bits) {
    if (b_own.size() != b_peer.size() || b_own.size() != bits.size())
        throw std::invalid_argument("sift: length mismatch");
    BitString kept;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (b_own[i] == b_peer[i]) kept.push_back(bits[i]);
    return kept;
}

/// Splits the sifted string: positions flagged 1 in `ind` become check
/// bits, the rest become the key.
inline std::pair<BitString, BitString> split_check_key(const BitString& sifted,
                                                       const BitString& ind) {
    if (sifted.size() != ind.size()) throw std::invalid_argument("split_check_key: length mismatch");
    BitString chk, key;
    for (std::size_t i = 0; i < sifted.size(); ++i)
        (ind[i] ? chk : key).push_back(sifted[i]);
    return {chk, key};
}

// ---- session state machine ----------------------------------------------------

enum class Role { initiator, responder };

enum class Stage {
    awaiting_basis,   // initiator sent start+frame, waits for step-3 message
    awaiting_eps,     // initiator sent sift data, waits for step-5 message
    awaiting_qubits,  // responder configured measurement, waits for the frame
    awaiting_sift,    // responder sent basis disclosure, waits for step-4 message
    awaiting_recon,   // responder sent error rate, waits for step-6 message
    completed,
    aborted,
};

enum class AbortCause { none, threshold, reconcile_failed, zero_key, timeout };

inline const char* abort_name(AbortCause c) {
    switch (c) {
        case AbortCause::none: return "none";
        case AbortCause::threshold: return "threshold";
        case AbortCause::reconcile_failed: return "reconcile_failed";
        case AbortCause::zero_key: return "zero_key";
        case AbortCause::timeout: return "timeout";
    }
    return "?";
}

struct Session {
    Role role = Role::initiator;
    Stage stage = Stage::awaiting_basis;
    SessionId sid_local;
    std::optional<SessionId> sid_peer;
    PartyId peer;

    BitString d;       // initiator: drawn data bits; responder: measured bits
    BitString b_own;
    BitString b_peer;
    BitString ind, chk, key;
    std::string label_d, label_b;                      // own pair labels
    std::string label_peer_d, label_peer_b;            // learned from messages
    std::string label_f, label_pg;
    std::optional<double> eps;
    uint64_t eps_num = 0, eps_den = 0;

    HashParams f;
    BitString f_val;
    Permutation perm;
    HashParams g;

    std::optional<SessionOutput> output;
    AbortCause abort_cause = AbortCause::none;
    uint32_t protocol_errors = 0;  // discarded messages: bad stage, bad sid, bad signature

    std::size_t n2() const { return ind.size(); }
    std::size_t n3() const { return key.size(); }
    bool active() const { return stage != Stage::completed && stage != Stage::aborted; }
};

struct OutFrame {
    PartyId intended;
    QubitFrame frame;
};

struct StepResult {
    std::vector<Message> messages;
    std::vector<OutFrame> frames;
    std::optional<SessionOutput> output;
    AbortCause abort = AbortCause::none;
};

namespace detail {

inline std::string sign_msg(World& world, const PartyId& signer, Message& m) {
    m.sig = world.sign(signer, world.verify_key_of(signer), m.signed_bytes());
    return m.sig;
}

inline bool verify_msg(World& world, const PartyId& claimed_signer, const Message& m) {
    return world.verify_protocol(world.verify_key_of(claimed_signer), m.signed_bytes(), m.sig);
}

/// Derives the reconciliation / amplification functions from a 64-bit seed
/// pair. The hash width is the key width rounded up to even, bumped further
/// if the output length would not fit under it.
inline int hash_width_for(int n3, int out_len) {
    int w = pad_even(n3);
    if (out_len >= w) w += 2;
    return w;
}

}  // namespace detail

constexpr int kMinN1 = 16;

/// Step 1: the initiator draws data and basis bits, queues the qubit frame
/// and opens the session toward `peer`.
inline std::tuple<Session, Message, OutFrame> start_initiator(World& world, Party& a,
                                                              const PartyId& peer,
                                                              uint64_t frame_uid) {
    if (world.config().n1 < kMinN1) throw std::invalid_argument("bb84: n1 below minimum");
    if (!world.has_party(peer)) throw lookup_error("bb84: unknown peer " + peer);

    Session s;
    s.role = Role::initiator;
    s.stage = Stage::awaiting_basis;
    s.sid_local = {a.id, a.next_local_sid++};
    s.peer = peer;

    ValuePair& data = world.take_pair(a, ValueRole::data_bits);
    ValuePair& basis = world.take_pair(a, ValueRole::basis_bits);
    s.d = data.private_value;
    s.b_own = basis.private_value;
    s.label_d = data.label;
    s.label_b = basis.label;

    Message start;
    start.tag = MsgTag::start;
    start.sid_a = s.sid_local;
    start.sender = a.id;
    start.to = peer;

    OutFrame frame{peer, prepare(s.b_own, s.d, a.id, frame_uid)};
    return {std::move(s), std::move(start), std::move(frame)};
}

/// Step 2: the responder opens its session and configures the measurement
/// bases for the incoming frame.
inline Session on_start(World& world, Party& b, const Message& start) {
    Session s;
    s.role = Role::responder;
    s.stage = Stage::awaiting_qubits;
    s.sid_local = {b.id, b.next_local_sid++};
    s.sid_peer = start.sid_a;
    s.peer = start.sender;

    ValuePair& basis = world.take_pair(b, ValueRole::basis_bits);
    s.b_own = basis.private_value;
    s.label_b = basis.label;
    return s;
}

/// Step 3, entered through the measurement report: the responder stores the
/// outcomes as its data bits and discloses its basis choice, signed.
inline StepResult on_frame(World& world, Party& b, Session& s, QubitFrame frame) {
    StepResult r;
    if (s.role != Role::responder || s.stage != Stage::awaiting_qubits ||
        frame.size() != s.b_own.size()) {
        ++s.protocol_errors;
        return r;  // frame dropped
    }
    BitString outcomes = measure(frame, s.b_own, b.q_device);

    // The outcome is a labelled private value in the responder's memory.
    ValuePair& vp =
        world.mint_pair_with_value(b, ValueRole::data_bits, outcomes, PairKind::ephemeral);
    s.d = outcomes;
    s.label_d = vp.label;

    Message m;
    m.tag = MsgTag::basis;
    m.sid_a = *s.sid_peer;
    m.sid_b = s.sid_local;
    m.sender = b.id;
    m.to = s.peer;
    m.basis_bits = s.b_own;
    m.label_d = s.label_d;
    m.label_b = s.label_b;
    detail::sign_msg(world, b.id, m);

    s.stage = Stage::awaiting_sift;
    r.messages.push_back(std::move(m));
    return r;
}

namespace detail {

// Step 4: initiator verifies the basis disclosure, sifts, splits off check
// bits and answers with its own basis string, the index mask and the check
// substring.
inline StepResult step4(World& world, Party& a, Session& s, const Message& m) {
    StepResult r;
    if (!m.sid_b || m.basis_bits.size() != s.b_own.size()) {
        ++s.protocol_errors;
        return r;
    }
    if (!verify_msg(world, s.peer, m)) {
        ++s.protocol_errors;
        return r;
    }
    s.sid_peer = m.sid_b;
    s.b_peer = m.basis_bits;
    s.label_peer_d = m.label_d;
    s.label_peer_b = m.label_b;

    BitString sifted = sift(s.b_own, s.b_peer, s.d);
    s.ind = a.r_source.bits(sifted.size());
    std::tie(s.chk, s.key) = split_check_key(sifted, s.ind);

    Message out;
    out.tag = MsgTag::sift;
    out.sid_a = s.sid_local;
    out.sid_b = s.sid_peer;
    out.sender = a.id;
    out.to = s.peer;
    out.basis_bits = s.b_own;
    out.ind = s.ind;
    out.chk = s.chk;
    out.label_d = s.label_d;
    out.label_b = s.label_b;
    sign_msg(world, a.id, out);

    s.stage = Stage::awaiting_eps;
    r.messages.push_back(std::move(out));
    return r;
}

// Step 5: responder verifies, sifts its measured bits, measures the error
// rate on the disclosed check bits and aborts above the threshold.
inline StepResult step5(World& world, Party& b, Session& s, const Message& m) {
    StepResult r;
    if (m.basis_bits.size() != s.b_own.size()) {
        ++s.protocol_errors;
        return r;
    }
    if (!verify_msg(world, s.peer, m)) {
        ++s.protocol_errors;
        return r;
    }
    s.b_peer = m.basis_bits;
    BitString sifted = sift(s.b_own, s.b_peer, s.d);
    if (m.ind.size() != sifted.size()) {
        ++s.protocol_errors;
        return r;
    }
    s.ind = m.ind;
    std::tie(s.chk, s.key) = split_check_key(sifted, s.ind);
    if (m.chk.size() != s.chk.size()) {
        ++s.protocol_errors;
        return r;
    }
    s.label_peer_d = m.label_d;
    s.label_peer_b = m.label_b;

    s.eps_num = s.chk.empty() ? 0 : hamming_distance(m.chk, s.chk);
    s.eps_den = s.chk.size();
    s.eps = s.eps_den == 0 ? 0.0 : static_cast<double>(s.eps_num) / static_cast<double>(s.eps_den);

    if (*s.eps > world.config().abort_threshold) {
        s.stage = Stage::aborted;
        s.abort_cause = AbortCause::threshold;
        r.abort = AbortCause::threshold;
        return r;
    }
    if (s.n3() == 0) {
        s.stage = Stage::aborted;
        s.abort_cause = AbortCause::zero_key;
        r.abort = AbortCause::zero_key;
        return r;
    }

    Message out;
    out.tag = MsgTag::rate;
    out.sid_a = s.sid_peer ? *s.sid_peer : m.sid_a;
    out.sid_b = s.sid_local;
    out.sender = b.id;
    out.to = s.peer;
    out.eps_num = s.eps_num;
    out.eps_den = s.eps_den;
    sign_msg(world, b.id, out);

    s.stage = Stage::awaiting_recon;
    r.messages.push_back(std::move(out));
    return r;
}

// Step 6: initiator verifies the rate report, derives the reconciliation
// hash and the amplification parameters from fresh randomness pairs,
// discloses them and completes.
inline StepResult step6(World& world, Party& a, Session& s, const Message& m) {
    StepResult r;
    if (!verify_msg(world, s.peer, m)) {
        ++s.protocol_errors;
        return r;
    }
    if (m.eps_den != 0 && m.eps_num > m.eps_den) {
        ++s.protocol_errors;
        return r;
    }
    s.eps_num = m.eps_num;
    s.eps_den = m.eps_den;
    s.eps = m.eps();

    // A reported rate above the threshold means the peer should have
    // aborted already; mirror its rule.
    if (*s.eps > world.config().abort_threshold) {
        s.stage = Stage::aborted;
        s.abort_cause = AbortCause::threshold;
        r.abort = AbortCause::threshold;
        return r;
    }
    const int n3 = static_cast<int>(s.n3());
    if (n3 == 0) {
        s.stage = Stage::aborted;
        s.abort_cause = AbortCause::zero_key;
        r.abort = AbortCause::zero_key;
        return r;
    }
    const int r_len = ir_output_len(n3, *s.eps);
    const int s_len = pa_output_len(n3, *s.eps);
    if (s_len == 0) {
        s.stage = Stage::aborted;
        s.abort_cause = AbortCause::zero_key;
        r.abort = AbortCause::zero_key;
        return r;
    }

    ValuePair& fr = world.take_pair(a, ValueRole::ir_randomness);
    ValuePair& pgr = world.take_pair(a, ValueRole::pa_randomness);
    s.label_f = fr.label;
    s.label_pg = pgr.label;

    Rng f_rng(fr.private_value.to_uint64());
    s.f = sample_hash(hash_width_for(n3, r_len), r_len, f_rng);
    s.f_val = qake::detail::eval_padded(s.f, s.key);

    Rng pg_rng(pgr.private_value.to_uint64());
    s.perm = sample_permutation(static_cast<std::size_t>(n3), pg_rng);
    s.g = sample_hash(hash_width_for(n3, s_len), s_len, pg_rng);

    Message out;
    out.tag = MsgTag::recon;
    out.sid_a = s.sid_local;
    out.sid_b = s.sid_peer;
    out.sender = a.id;
    out.to = s.peer;
    out.f = s.f;
    out.f_val = s.f_val;
    out.perm = s.perm;
    out.g = s.g;
    out.label_f = s.label_f;
    out.label_pg = s.label_pg;
    sign_msg(world, a.id, out);

    SessionOutput output;
    output.sk = privacy_amplify(s.key, {s.perm, s.g});
    output.pid = s.peer;
    output.v = {{s.label_d},      {s.label_b},      {s.label_peer_d},
                {s.label_peer_b}, {s.label_f},      {s.label_pg}};
    output.u = {{world.verify_key_of(s.peer)}};

    s.stage = Stage::completed;
    s.output = output;
    r.messages.push_back(std::move(out));
    r.output = std::move(output);
    return r;
}

// Step 7: responder verifies, corrects its key against the disclosed hash
// value, amplifies and completes.
inline StepResult step7(World& world, Party& /*b*/, Session& s, const Message& m) {
    StepResult r;
    if (!verify_msg(world, s.peer, m)) {
        ++s.protocol_errors;
        return r;
    }
    const int n3 = static_cast<int>(s.n3());
    if (m.perm.size() != s.key.size() || m.f.w < n3 || m.f.w > n3 + 2 || m.g.w < n3 ||
        m.g.w > n3 + 2 || static_cast<int>(m.f_val.size()) != m.f.out_len || m.g.out_len < 1) {
        ++s.protocol_errors;
        return r;
    }
    s.f = m.f;
    s.f_val = m.f_val;
    s.perm = m.perm;
    s.g = m.g;
    s.label_f = m.label_f;
    s.label_pg = m.label_pg;

    auto corrected = reconcile(s.key, s.f, s.f_val, default_reconcile_weight(n3));
    if (!corrected) {
        s.stage = Stage::aborted;
        s.abort_cause = AbortCause::reconcile_failed;
        r.abort = AbortCause::reconcile_failed;
        return r;
    }

    SessionOutput output;
    output.sk = privacy_amplify(*corrected, {s.perm, s.g});
    output.pid = s.peer;
    output.v = {{s.label_peer_d}, {s.label_peer_b}, {s.label_d},
                {s.label_b},      {s.label_f},      {s.label_pg}};
    output.u = {{world.verify_key_of(s.peer)}};

    s.stage = Stage::completed;
    s.output = output;
    r.output = std::move(output);
    return r;
}

}  // namespace detail

/// Dispatches a delivered classical message to the protocol step the session
/// expects next. Anything out of order, mis-addressed or carrying a bad
/// signature is discarded and counted; the session state is unchanged.
inline StepResult process_message(World& world, Party& p, Session& s, const Message& m) {
    StepResult none;
    if (!s.active()) {
        ++s.protocol_errors;
        return none;
    }
    switch (m.tag) {
        case MsgTag::basis:
            if (s.role == Role::initiator && s.stage == Stage::awaiting_basis &&
                m.sid_a == s.sid_local)
                return detail::step4(world, p, s, m);
            break;
        case MsgTag::sift:
            if (s.role == Role::responder && s.stage == Stage::awaiting_sift && m.sid_b &&
                *m.sid_b == s.sid_local && m.sid_a == *s.sid_peer)
                return detail::step5(world, p, s, m);
            break;
        case MsgTag::rate:
            if (s.role == Role::initiator && s.stage == Stage::awaiting_eps &&
                m.sid_a == s.sid_local && m.sid_b && s.sid_peer && *m.sid_b == *s.sid_peer)
                return detail::step6(world, p, s, m);
            break;
        case MsgTag::recon:
            if (s.role == Role::responder && s.stage == Stage::awaiting_recon && m.sid_b &&
                *m.sid_b == s.sid_local && m.sid_a == *s.sid_peer)
                return detail::step7(world, p, s, m);
            break;
        case MsgTag::start:
            break;  // start opens sessions at the routing layer, never here
    }
    ++s.protocol_errors;
    return none;
}

}  // namespace qake::bb84
