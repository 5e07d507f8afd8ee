#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qake/bb84.hpp"
#include "qake/bits.hpp"
#include "qake/model.hpp"
#include "qake/quantum.hpp"

namespace qake {

// ---- transcript ---------------------------------------------------------------

/// Everything the adversary sees, in event order: classical messages both
/// ways, opaque quantum-frame hand-offs, its own measurement records, its
/// queries, and public session results. Never any e-channel or r-channel
/// content, and never a session key.
struct TranscriptEvent {
    enum class Kind { classical, quantum, eve, query, done };
    uint64_t ordinal = 0;
    Kind kind = Kind::classical;
    std::string line;                      // dump body, without the ordinal
    std::optional<bb84::Message> msg;      // structured copy of classical traffic
    std::vector<EveRecord> eve;
    std::optional<std::string> done_sid;
};

class Transcript {
public:
    void add(TranscriptEvent e) { events_.push_back(std::move(e)); }
    const std::vector<TranscriptEvent>& events() const { return events_; }

    void dump(std::ostream& os) const {
        for (const auto& e : events_) os << e.ordinal << " " << e.line << "\n";
    }
    std::string dump() const {
        std::ostringstream os;
        dump(os);
        return os.str();
    }

private:
    std::vector<TranscriptEvent> events_;
};

// ---- simulation driver ----------------------------------------------------------

/// Binds a world to its protocol sessions and exposes the network-side
/// surface a strategy drives: message and frame delivery plus the query
/// interface. Every call is recorded in the transcript.
class Simulation {
public:
    Simulation(WorldConfig cfg, uint64_t seed) : world_(cfg, seed) {}

    World& world() { return world_; }
    const World& world() const { return world_; }
    Transcript& transcript() { return transcript_; }
    const Transcript& transcript() const { return transcript_; }

    Party& register_party(const PartyId& id, bool honest = true) {
        return world_.register_party(id, honest);
    }

    uint64_t mint_frame_uid() { return frame_uid_++; }

    /// SendC(start): opens an initiator session; the start message and the
    /// prepared qubit frame are handed to the adversary.
    bb84::StepResult start_session(const PartyId& initiator, const PartyId& peer) {
        Party& a = world_.party(initiator);
        auto [session, start, frame] = bb84::start_initiator(world_, a, peer, mint_frame_uid());
        const std::string key = session.sid_local.to_string();
        creation_order_.push_back(key);
        sessions_.emplace(key, std::move(session));

        bb84::StepResult out;
        out.messages.push_back(std::move(start));
        out.frames.push_back(std::move(frame));
        record_emissions(initiator, out);
        return out;
    }

    /// Delivers a classical message to m.to and runs the protocol step.
    bb84::StepResult deliver_message(const bb84::Message& m) {
        record_classical("adv", m.to, m);
        if (!world_.has_party(m.to)) return {};
        Party& p = world_.party(m.to);

        if (m.tag == bb84::MsgTag::start) {
            bb84::Session s = bb84::on_start(world_, p, m);
            const std::string key = s.sid_local.to_string();
            creation_order_.push_back(key);
            sessions_.emplace(key, std::move(s));
            return {};
        }

        bb84::Session* s = route(m);
        if (!s) {
            ++stray_messages_;
            return {};
        }
        bb84::StepResult r = bb84::process_message(world_, p, *s, m);
        finish_step(p.id, *s, r);
        return r;
    }

    /// Delivers a quantum frame; it lands on the oldest session awaiting one.
    bb84::StepResult deliver_frame(const PartyId& to, QubitFrame frame) {
        {
            TranscriptEvent e;
            e.ordinal = world_.next_ordinal();
            e.kind = TranscriptEvent::Kind::quantum;
            e.line = "q adv->" + to + " - - frame#" + std::to_string(frame.uid()) +
                     " n=" + std::to_string(frame.size());
            transcript_.add(std::move(e));
        }
        if (!world_.has_party(to)) return {};
        Party& p = world_.party(to);
        for (const auto& key : creation_order_) {
            bb84::Session& s = sessions_.at(key);
            if (s.sid_local.owner == to && s.role == bb84::Role::responder &&
                s.stage == bb84::Stage::awaiting_qubits) {
                bb84::StepResult r = bb84::on_frame(world_, p, s, std::move(frame));
                finish_step(to, s, r);
                return r;
            }
        }
        ++stray_messages_;
        return {};
    }

    /// Adversarial measurement results enter the transcript as triples.
    void note_eve_records(const std::vector<EveRecord>& records) {
        if (records.empty()) return;
        TranscriptEvent e;
        e.ordinal = world_.next_ordinal();
        e.kind = TranscriptEvent::Kind::eve;
        std::string triples;
        for (const auto& r : records) {
            if (!triples.empty()) triples += ";";
            triples += std::to_string(r.position) + ":" + std::to_string(r.basis) + ":" +
                       std::to_string(r.outcome);
        }
        e.line = "q eve - - meas " + triples;
        e.eve = records;
        transcript_.add(std::move(e));
    }

    // ---- query interface ----------------------------------------------------

    std::string reveal_next(const PartyId& p, ValueRole role) {
        std::string label = world_.reveal_next(p, role);
        add_query_line("query RevealNext " + p + " " + role_tag(role) + " -> " + label);
        return label;
    }

    BitString partner_value(const PartyId& p, const std::string& label) {
        BitString v = world_.partner_value(p, label);
        add_query_line("query Partner " + label);
        return v;
    }

    BitString partner_session(const SessionId& sid) {
        BitString v = world_.partner_session(sid.owner, sid);
        add_query_line("query PartnerSession " + sid.to_string());
        return v;
    }

    /// Real-or-random challenge on a completed session. One Test per game.
    std::optional<BitString> test_query(const SessionId& sid, int b, Rng& rng) {
        if (test_used_) throw std::logic_error("test_query: only one Test query is allowed");
        test_used_ = true;
        const CompletedSession* row = world_.registry().find(sid.to_string());
        if (!row) return std::nullopt;  // no session key was output
        BitString kappa = (b == 1) ? row->output.sk : rng.bits(row->output.sk.size());
        {
            TranscriptEvent e;
            e.ordinal = world_.next_ordinal();
            e.kind = TranscriptEvent::Kind::query;
            e.line = "query Test " + sid.to_string() + " kappa=" + kappa.to_dump();
            transcript_.add(std::move(e));
        }
        return kappa;
    }

    /// Scenario-level timeout: stalled sessions abort.
    void expire_incomplete() {
        for (const auto& key : creation_order_) {
            bb84::Session& s = sessions_.at(key);
            if (s.active()) {
                s.stage = bb84::Stage::aborted;
                s.abort_cause = bb84::AbortCause::timeout;
                record_abort(s);
            }
        }
    }

    bb84::Session* find_session(const SessionId& sid) {
        auto it = sessions_.find(sid.to_string());
        return it == sessions_.end() ? nullptr : &it->second;
    }
    const std::vector<std::string>& session_order() const { return creation_order_; }
    std::map<std::string, bb84::Session>& sessions() { return sessions_; }
    const std::vector<SessionId>& completed_sessions() const { return completed_; }
    uint64_t stray_messages() const { return stray_messages_; }

private:
    bb84::Session* route(const bb84::Message& m) {
        std::string key;
        if (m.tag == bb84::MsgTag::basis || m.tag == bb84::MsgTag::rate)
            key = m.sid_a.to_string();
        else if (m.sid_b)
            key = m.sid_b->to_string();
        else
            return nullptr;
        auto it = sessions_.find(key);
        if (it == sessions_.end() || it->second.sid_local.owner != m.to) return nullptr;
        return &it->second;
    }

    void record_classical(const std::string& from, const std::string& to,
                          const bb84::Message& m) {
        TranscriptEvent e;
        e.ordinal = world_.next_ordinal();
        e.kind = TranscriptEvent::Kind::classical;
        e.line = "c " + from + "->" + to + " " + m.sid_a.to_string() + " " +
                 (m.sid_b ? m.sid_b->to_string() : "-") + " " + bb84::tag_name(m.tag) + " " +
                 bytes_to_hex(m.signed_bytes()) + " sig=" + (m.sig.empty() ? "-" : m.sig);
        e.msg = m;
        transcript_.add(std::move(e));
    }

    void record_emissions(const PartyId& from, bb84::StepResult& r) {
        for (const auto& m : r.messages) record_classical(from, "adv", m);
        for (const auto& f : r.frames) {
            TranscriptEvent e;
            e.ordinal = world_.next_ordinal();
            e.kind = TranscriptEvent::Kind::quantum;
            e.line = "q " + from + "->adv - - frame#" + std::to_string(f.frame.uid()) +
                     " n=" + std::to_string(f.frame.size());
            transcript_.add(std::move(e));
        }
    }

    void record_abort(const bb84::Session& s) {
        TranscriptEvent e;
        e.ordinal = world_.next_ordinal();
        e.kind = TranscriptEvent::Kind::done;
        e.line = "done " + s.sid_local.to_string() + " abort=" + bb84::abort_name(s.abort_cause) +
                 (s.eps ? " eps=" + std::to_string(s.eps_num) + "/" + std::to_string(s.eps_den)
                        : "");
        e.done_sid = s.sid_local.to_string();
        transcript_.add(std::move(e));
    }

    void finish_step(const PartyId& owner, bb84::Session& s, bb84::StepResult& r) {
        record_emissions(owner, r);
        if (r.output) {
            uint64_t ord = world_.next_ordinal();
            world_.record_completion(s.sid_local, *r.output, ord);
            completed_.push_back(s.sid_local);
            std::string v_join, u_join;
            for (const auto& comp : r.output->v) {
                if (!v_join.empty()) v_join += ";";
                for (const auto& l : comp) v_join += l;
            }
            for (const auto& comp : r.output->u) {
                if (!u_join.empty()) u_join += ";";
                for (const auto& l : comp) u_join += l;
            }
            TranscriptEvent e;
            e.ordinal = ord;
            e.kind = TranscriptEvent::Kind::done;
            e.line = "done " + s.sid_local.to_string() + " ok pid=" + r.output->pid +
                     " v=[" + v_join + "] u=[" + u_join +
                     "] sklen=" + std::to_string(r.output->sk.size());
            e.done_sid = s.sid_local.to_string();
            transcript_.add(std::move(e));
        } else if (r.abort != bb84::AbortCause::none) {
            record_abort(s);
        }
    }

    void add_query_line(std::string line) {
        TranscriptEvent e;
        e.ordinal = world_.now();  // the query already ticked the clock
        e.kind = TranscriptEvent::Kind::query;
        e.line = std::move(line);
        transcript_.add(std::move(e));
    }

    World world_;
    Transcript transcript_;
    std::map<std::string, bb84::Session> sessions_;
    std::vector<std::string> creation_order_;
    std::vector<SessionId> completed_;
    uint64_t frame_uid_ = 0;
    uint64_t stray_messages_ = 0;
    bool test_used_ = false;
};

// ---- strategies -----------------------------------------------------------------

enum class StrategyKind { passive_relay, intercept_resend, mitm_forger, randomness_reveal };

enum class RevealTarget {
    peer_static_key,
    own_static_key,
    data_bits,
    basis_bits,
    ir_randomness,
    pa_randomness
};
enum class RevealWhen { pre, post };

inline const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::passive_relay: return "passive-relay";
        case StrategyKind::intercept_resend: return "intercept-resend";
        case StrategyKind::mitm_forger: return "mitm-forger";
        case StrategyKind::randomness_reveal: return "randomness-reveal";
    }
    return "?";
}
inline const char* to_string(RevealTarget t) {
    switch (t) {
        case RevealTarget::peer_static_key: return "peer-static-key";
        case RevealTarget::own_static_key: return "own-static-key";
        case RevealTarget::data_bits: return "data-bits";
        case RevealTarget::basis_bits: return "basis-bits";
        case RevealTarget::ir_randomness: return "ir-randomness";
        case RevealTarget::pa_randomness: return "pa-randomness";
    }
    return "?";
}
inline const char* to_string(RevealWhen w) { return w == RevealWhen::pre ? "pre" : "post"; }

struct StrategySpec {
    StrategyKind kind = StrategyKind::passive_relay;
    double fraction = 1.0;                           // intercept_resend
    bool partner_before = false;                     // mitm_forger
    RevealTarget target = RevealTarget::basis_bits;  // randomness_reveal
    RevealWhen when = RevealWhen::pre;
};

/// What one online phase produced, from the adversary's point of view.
struct StrategyOutcome {
    std::optional<SessionId> test_sid;     // session the strategy elects to Test
    std::optional<BitString> believed_sk;  // adversary's computed key, if any
    std::optional<SessionId> peer_sid;     // matching peer session, if known
    bool second_session_completed = false;
    bool keys_distinct = false;
    std::string note;
};

namespace strategies {

/// Relay queue: honest in-order delivery of everything the parties emit.
/// `on_frame_hop` lets a subclass touch frames in flight.
template <typename FrameHop>
inline void relay(Simulation& sim, bb84::StepResult first, FrameHop&& on_frame_hop) {
    std::deque<bb84::Message> msgs;
    std::deque<bb84::OutFrame> frames;
    auto absorb = [&](bb84::StepResult&& r) {
        for (auto& m : r.messages) msgs.push_back(std::move(m));
        for (auto& f : r.frames) frames.push_back(std::move(f));
    };
    absorb(std::move(first));
    while (!msgs.empty() || !frames.empty()) {
        if (!msgs.empty()) {
            bb84::Message m = std::move(msgs.front());
            msgs.pop_front();
            absorb(sim.deliver_message(m));
        } else {
            bb84::OutFrame f = std::move(frames.front());
            frames.pop_front();
            QubitFrame forwarded = on_frame_hop(std::move(f.frame));
            absorb(sim.deliver_frame(f.intended, std::move(forwarded)));
        }
    }
}

inline StrategyOutcome passive_relay(Simulation& sim, const PartyId& a, const PartyId& b) {
    StrategyOutcome out;
    relay(sim, sim.start_session(a, b), [](QubitFrame f) { return f; });
    if (!sim.completed_sessions().empty()) {
        out.test_sid = sim.completed_sessions().front();
        if (sim.completed_sessions().size() > 1) out.peer_sid = sim.completed_sessions()[1];
    }
    out.note = "passive";
    return out;
}

inline StrategyOutcome intercept_resend_strategy(Simulation& sim, const PartyId& a,
                                                 const PartyId& b, double fraction, Rng& adv) {
    StrategyOutcome out;
    relay(sim, sim.start_session(a, b), [&](QubitFrame f) {
        InterceptResult r = intercept_resend(std::move(f), fraction, adv);
        sim.note_eve_records(r.records);
        return std::move(r.frame);
    });
    if (!sim.completed_sessions().empty()) {
        out.test_sid = sim.completed_sessions().front();
        if (sim.completed_sessions().size() > 1) out.peer_sid = sim.completed_sessions()[1];
    }
    out.note = "intercept fraction=" + std::to_string(fraction);
    return out;
}

inline StrategyOutcome randomness_reveal(Simulation& sim, const PartyId& a, const PartyId& b,
                                         RevealTarget target, RevealWhen when) {
    StrategyOutcome out;
    auto role_of = [](RevealTarget t) {
        switch (t) {
            case RevealTarget::data_bits: return ValueRole::data_bits;
            case RevealTarget::basis_bits: return ValueRole::basis_bits;
            case RevealTarget::ir_randomness: return ValueRole::ir_randomness;
            case RevealTarget::pa_randomness: return ValueRole::pa_randomness;
            default: return ValueRole::static_key;
        }
    };

    if (when == RevealWhen::pre) {
        switch (target) {
            case RevealTarget::peer_static_key:
                sim.partner_value(b, sim.world().verify_key_of(b));
                break;
            case RevealTarget::own_static_key:
                sim.partner_value(a, sim.world().verify_key_of(a));
                break;
            default: {
                std::string label = sim.reveal_next(a, role_of(target));
                sim.partner_value(a, label);
                break;
            }
        }
        out.note = std::string("reveal pre via partner-query: ") + to_string(target);
    }

    relay(sim, sim.start_session(a, b), [](QubitFrame f) { return f; });

    if (when == RevealWhen::post && !sim.completed_sessions().empty()) {
        const SessionId sid = sim.completed_sessions().front();
        const CompletedSession* row = sim.world().registry().find(sid.to_string());
        switch (target) {
            case RevealTarget::peer_static_key:
                sim.partner_value(b, sim.world().verify_key_of(b));
                out.note = "reveal post via partner-query: peer-static-key";
                break;
            case RevealTarget::own_static_key:
                sim.partner_value(a, sim.world().verify_key_of(a));
                out.note = "reveal post via partner-query: own-static-key";
                break;
            case RevealTarget::data_bits:
                // Data bits are never broadcast; learning them takes a query.
                sim.partner_value(a, row->output.v[0][0]);
                out.note = "reveal post via partner-query: data-bits";
                break;
            default:
                // Basis bits and the reconciliation/amplification randomness
                // were broadcast in the clear during the run; after
                // completion the adversary reads them from its transcript
                // for free, no Partner query needed.
                out.note = std::string("reveal post via transcript: ") + to_string(target);
                break;
        }
    }

    if (!sim.completed_sessions().empty()) {
        out.test_sid = sim.completed_sessions().front();
        if (sim.completed_sessions().size() > 1) out.peer_sid = sim.completed_sessions()[1];
    }
    return out;
}

/// How the man-in-the-middle obtains signatures on its injected messages.
enum class MitmSigner { partnered, recovered, forged };

struct MitmKeys {
    MitmSigner mode = MitmSigner::forged;
    uint64_t key_a = 0, key_b = 0;  // recovered signing keys (breakable scheme)
};

inline std::string mitm_sign(Simulation& sim, const MitmKeys& keys, const PartyId& as_party,
                             bb84::Message& m) {
    World& w = sim.world();
    switch (keys.mode) {
        case MitmSigner::partnered:
            m.sig = w.sign("adversary", w.verify_key_of(as_party), m.signed_bytes());
            break;
        case MitmSigner::recovered:
            m.sig = breakable_tag(as_party == "A" ? keys.key_a : keys.key_b, m.signed_bytes());
            break;
        case MitmSigner::forged:
            m.sig = BitString::from_uint64(splitmix64(detail::fnv1a(m.signed_bytes())), 64).to_hex();
            break;
    }
    return m.sig;
}

/// Full man-in-the-middle: the adversary plays responder toward A and
/// initiator toward B, completing two unrelated keys. Signature material
/// comes from Partner queries, an offline key recovery, or plain forgery,
/// depending on the mode.
inline StrategyOutcome mitm_forger(Simulation& sim, const PartyId& a, const PartyId& b,
                                   bool partner_before, Rng& adv) {
    StrategyOutcome out;
    World& w = sim.world();
    MitmKeys keys;

    if (partner_before) {
        sim.partner_value(a, w.verify_key_of(a));
        sim.partner_value(b, w.verify_key_of(b));
        keys.mode = MitmSigner::partnered;
        out.note = "mitm signer=partnered";
    } else if (w.config().sig_scheme == SigScheme::breakable) {
        // Phase 1: observe one honest run, then recover both signing keys
        // by exhaustive search over the small keyspace.
        relay(sim, sim.start_session(a, b), [](QubitFrame f) { return f; });
        std::vector<SignObservation> obs_a, obs_b;
        for (const auto& e : sim.transcript().events()) {
            if (!e.msg || e.msg->sig.empty()) continue;
            if (e.line.rfind("c adv->", 0) == 0) continue;  // count each emission once
            SignObservation o{e.msg->signed_bytes(), e.msg->sig};
            if (e.msg->sender == a) obs_a.push_back(std::move(o));
            else if (e.msg->sender == b) obs_b.push_back(std::move(o));
        }
        auto ka = brute_force_key(obs_a, w.config().breakable_keyspace);
        auto kb = brute_force_key(obs_b, w.config().breakable_keyspace);
        if (!ka || !kb) {
            out.note = "mitm key recovery failed";
            return out;
        }
        keys.mode = MitmSigner::recovered;
        keys.key_a = *ka;
        keys.key_b = *kb;
        out.note = "mitm signer=recovered";
    } else {
        keys.mode = MitmSigner::forged;
        out.note = "mitm signer=forged";
    }

    const int n1 = w.config().n1;

    // Half 1: A initiates; the adversary answers as the alleged B.
    bb84::StepResult init = sim.start_session(a, b);
    bb84::Message start_msg = init.messages.front();
    QubitFrame frame_a = std::move(init.frames.front().frame);
    const SessionId sid_a_session = start_msg.sid_a;
    const SessionId fake_sid_b{b, 9000};

    BitString eve_basis = adv.bits(static_cast<std::size_t>(n1));
    BitString eve_out = measure(frame_a, eve_basis, adv);
    {
        std::vector<EveRecord> recs(static_cast<std::size_t>(n1));
        for (int i = 0; i < n1; ++i)
            recs[static_cast<std::size_t>(i)] =
                EveRecord{static_cast<uint32_t>(i), eve_basis[static_cast<std::size_t>(i)],
                          eve_out[static_cast<std::size_t>(i)]};
        sim.note_eve_records(recs);
    }

    bb84::Message m3;
    m3.tag = bb84::MsgTag::basis;
    m3.sid_a = sid_a_session;
    m3.sid_b = fake_sid_b;
    m3.sender = b;
    m3.to = a;
    m3.basis_bits = eve_basis;
    m3.label_d = b + ":data:mitm";
    m3.label_b = b + ":basis:mitm";
    mitm_sign(sim, keys, b, m3);

    bb84::StepResult r4 = sim.deliver_message(m3);
    if (!r4.messages.empty()) {
        const bb84::Message& m4 = r4.messages.front();  // A's sift disclosure
        BitString kept;
        for (std::size_t i = 0; i < eve_basis.size(); ++i)
            if (m4.basis_bits[i] == eve_basis[i]) kept.push_back(eve_out[i]);
        auto [chk_e, key_e] = bb84::split_check_key(kept, m4.ind);
        (void)chk_e;

        bb84::Message m5;
        m5.tag = bb84::MsgTag::rate;
        m5.sid_a = sid_a_session;
        m5.sid_b = fake_sid_b;
        m5.sender = b;
        m5.to = a;
        m5.eps_num = 0;
        m5.eps_den = chk_e.size();
        mitm_sign(sim, keys, b, m5);

        bb84::StepResult r6 = sim.deliver_message(m5);
        if (!r6.messages.empty()) {
            const bb84::Message& m6 = r6.messages.front();
            out.believed_sk = privacy_amplify(key_e, {m6.perm, m6.g});
            out.test_sid = sid_a_session;
        }
    }

    // Half 2: the adversary initiates toward B as the alleged A.
    BitString d_e = adv.bits(static_cast<std::size_t>(n1));
    BitString b_e = adv.bits(static_cast<std::size_t>(n1));
    const SessionId fake_sid_a{a, 9000};

    bb84::Message start2;
    start2.tag = bb84::MsgTag::start;
    start2.sid_a = fake_sid_a;
    start2.sender = a;
    start2.to = b;
    sim.deliver_message(start2);
    bb84::StepResult r3 =
        sim.deliver_frame(b, prepare(b_e, d_e, "adv", sim.mint_frame_uid()));
    if (!r3.messages.empty()) {
        const bb84::Message& m3b = r3.messages.front();  // B's basis disclosure
        BitString kept;
        BitString kept_mask(static_cast<std::size_t>(n1));
        for (std::size_t i = 0; i < b_e.size(); ++i)
            if (m3b.basis_bits[i] == b_e[i]) {
                kept.push_back(d_e[i]);
                kept_mask[i] = 1;
            }
        Rng split_rng(adv.next_u64());
        BitString ind = split_rng.bits(kept.size());
        auto [chk_e, key_e] = bb84::split_check_key(kept, ind);

        bb84::Message m4b;
        m4b.tag = bb84::MsgTag::sift;
        m4b.sid_a = fake_sid_a;
        m4b.sid_b = m3b.sid_b;
        m4b.sender = a;
        m4b.to = b;
        m4b.basis_bits = b_e;
        m4b.ind = ind;
        m4b.chk = chk_e;
        m4b.label_d = a + ":data:mitm";
        m4b.label_b = a + ":basis:mitm";
        mitm_sign(sim, keys, a, m4b);

        bb84::StepResult r5 = sim.deliver_message(m4b);
        if (!r5.messages.empty()) {
            const bb84::Message& m5b = r5.messages.front();
            const int n3 = static_cast<int>(key_e.size());
            const double eps = m5b.eps();
            if (n3 > 0 && eps <= w.config().abort_threshold) {
                const int r_len = ir_output_len(n3, eps);
                const int s_len = pa_output_len(n3, eps);
                if (s_len > 0) {
                    bb84::Message m6b;
                    m6b.tag = bb84::MsgTag::recon;
                    m6b.sid_a = fake_sid_a;
                    m6b.sid_b = m5b.sid_b;
                    m6b.sender = a;
                    m6b.to = b;
                    m6b.f = sample_hash(bb84::detail::hash_width_for(n3, r_len), r_len, adv);
                    m6b.f_val = detail::eval_padded(m6b.f, key_e);
                    m6b.perm = sample_permutation(static_cast<std::size_t>(n3), adv);
                    m6b.g = sample_hash(bb84::detail::hash_width_for(n3, s_len), s_len, adv);
                    m6b.label_f = a + ":ir:mitm";
                    m6b.label_pg = a + ":pa:mitm";
                    mitm_sign(sim, keys, a, m6b);
                    sim.deliver_message(m6b);

                    BitString sk_eb = privacy_amplify(key_e, {m6b.perm, m6b.g});
                    out.second_session_completed = !sim.completed_sessions().empty() &&
                                                   sim.completed_sessions().back().owner == b;
                    if (out.believed_sk)
                        out.keys_distinct = !(sk_eb == *out.believed_sk);
                }
            }
        }
    }
    return out;
}

}  // namespace strategies

// ---- security game ---------------------------------------------------------------

struct GameConfig {
    int n_parties = 2;
    std::string t_c = "poly(k)";  // declared bounds, informational only:
    std::string t_q = "poly(k)";  // strategies respect them by construction,
    std::string m_q = "poly(k)";  // the simulator does not meter them
    SigScheme sig_scheme = SigScheme::ideal;
    uint64_t breakable_keyspace = uint64_t{1} << 16;
    StrategySpec strategy;
    int trials = 1000;
    uint64_t seed = 42;
    int n1 = 512;
    double abort_threshold = 0.061;
    bool offline_analysis = false;
    int offline_max_n3 = 20;
};

/// Exhaustive-enumeration statistics of the final key given the public
/// transcript: the desk-scale stand-in for the unbounded offline machine.
struct OfflineStats {
    uint64_t candidates_total = 0;
    uint64_t candidates_consistent = 0;
    int n3 = 0, r_len = 0, s_len = 0;
    double tv_distance = 0.0;
    double best_guess = 0.0;
    double delta_raw = 0.0;
    bool sig_keys_recovered = false;
    bool sig_keys_match_actual = false;
    std::string enumeration_radius;
};

struct TrialRow {
    int trial = 0;
    bool completed = false;  // the elected test session output a key
    std::map<std::string, int> abort_causes;
    std::optional<double> eps;
    std::optional<double> sift_ratio;
    std::optional<int> n2, n3, sk_len;
    std::optional<bool> correctness;
    std::optional<int> test_b, guess;
    std::optional<bool> fresh;
    uint64_t forged_accepted = 0;
    std::optional<double> delta_raw;
    std::optional<OfflineStats> offline;
    std::string note;
    bool second_session_completed = false;
    bool keys_distinct = false;
};

struct AdvantageEstimate {
    uint64_t samples = 0;
    uint64_t correct = 0;
    double p_correct = 0.0;
    double advantage = 0.0;
    double ci95 = 0.0;
};

struct Aggregates {
    double completion_rate = 0.0;
    double abort_rate = 0.0;
    std::map<std::string, int> abort_causes;
    std::optional<double> mean_eps;
    std::optional<double> mean_sift_ratio;
    std::optional<double> correctness_rate;
    std::optional<double> fresh_rate;
    std::optional<AdvantageEstimate> advantage;
    uint64_t forged_accepted_total = 0;
    uint64_t non_fresh_tested = 0;
    std::optional<double> max_delta_raw;
};

struct GameResult {
    GameConfig config;
    std::vector<TrialRow> trials;
    Aggregates agg;
    std::string transcript_dump;  // all trials, separated by trial markers
};

/// Enumerates every data-bit assignment consistent with the public
/// transcript of one session (bases, index mask, check bits, F, F', P, G,
/// plus the adversary's measurement records and any revealed values) and
/// measures how far the induced key distribution is from uniform.
inline OfflineStats offline_analyze(const Transcript& tr, const SessionId& initiator_sid,
                                    int max_n3,
                                    const std::map<std::string, BitString>& revealed = {}) {
    const bb84::Message* sift_msg = nullptr;
    const bb84::Message* basis_msg = nullptr;
    const bb84::Message* recon_msg = nullptr;
    std::vector<EveRecord> eve;
    for (const auto& e : tr.events()) {
        if (e.kind == TranscriptEvent::Kind::eve)
            eve.insert(eve.end(), e.eve.begin(), e.eve.end());
        if (!e.msg || !(e.msg->sid_a == initiator_sid)) continue;
        if (e.line.rfind("c adv->", 0) == 0) continue;  // read each message once
        switch (e.msg->tag) {
            case bb84::MsgTag::basis: basis_msg = &*e.msg; break;
            case bb84::MsgTag::sift: sift_msg = &*e.msg; break;
            case bb84::MsgTag::recon: recon_msg = &*e.msg; break;
            default: break;
        }
    }
    if (!sift_msg || !basis_msg || !recon_msg)
        throw std::invalid_argument("offline_analyze: transcript lacks the session's messages");

    const BitString& b_a = sift_msg->basis_bits;
    const BitString& b_b = basis_msg->basis_bits;
    const BitString& ind = sift_msg->ind;

    // raw positions of the key bits, in order
    std::vector<uint32_t> key_pos;
    {
        std::size_t j = 0;
        for (std::size_t i = 0; i < b_a.size(); ++i) {
            if (b_a[i] != b_b[i]) continue;
            if (!ind[j]) key_pos.push_back(static_cast<uint32_t>(i));
            ++j;
        }
    }
    const int n3 = static_cast<int>(key_pos.size());
    OfflineStats st;
    st.n3 = n3;
    st.r_len = recon_msg->f.out_len;
    st.s_len = recon_msg->g.out_len;
    st.delta_raw = security_delta(n3, st.r_len, st.s_len);
    st.enumeration_radius = "2^" + std::to_string(n3);
    if (st.s_len == 0) {  // empty key: trivially uniform on the one point
        st.tv_distance = 0.0;
        st.best_guess = 1.0;
        return st;
    }
    if (n3 > max_n3) throw std::invalid_argument("offline_analyze: enumeration budget exceeded");

    // per-key-position constraints from the adversary's own measurements
    std::map<uint32_t, int> key_index_of_pos;
    for (int i = 0; i < n3; ++i) key_index_of_pos[key_pos[static_cast<std::size_t>(i)]] = i;
    std::vector<int8_t> fixed(static_cast<std::size_t>(n3), -1);
    for (const auto& rec : eve) {
        auto it = key_index_of_pos.find(rec.position);
        if (it == key_index_of_pos.end()) continue;
        if (rec.basis == b_a[rec.position]) fixed[static_cast<std::size_t>(it->second)] = rec.outcome;
    }
    // a revealed data-bit pair pins the key bits outright
    for (const auto& [label, bits] : revealed) {
        if (label == sift_msg->label_d && bits.size() == b_a.size()) {
            for (int i = 0; i < n3; ++i)
                fixed[static_cast<std::size_t>(i)] =
                    static_cast<int8_t>(bits[key_pos[static_cast<std::size_t>(i)]]);
        }
    }

    std::map<uint64_t, uint64_t> key_counts;  // G(P(x)) value -> count
    const uint64_t total = uint64_t{1} << n3;
    uint64_t consistent = 0;
    BitString x(static_cast<std::size_t>(n3));
    for (uint64_t v = 0; v < total; ++v) {
        bool ok = true;
        for (int i = 0; i < n3 && ok; ++i) {
            uint8_t bit = static_cast<uint8_t>((v >> (n3 - 1 - i)) & 1u);
            if (fixed[static_cast<std::size_t>(i)] >= 0 &&
                fixed[static_cast<std::size_t>(i)] != bit)
                ok = false;
            x[static_cast<std::size_t>(i)] = bit;
        }
        if (!ok) continue;
        if (!(detail::eval_padded(recon_msg->f, x) == recon_msg->f_val)) continue;
        ++consistent;
        BitString sk = privacy_amplify(x, {recon_msg->perm, recon_msg->g});
        ++key_counts[sk.to_uint64()];
    }
    st.candidates_total = total;
    st.candidates_consistent = consistent;
    if (consistent == 0) return st;

    const double uniform = std::exp2(-static_cast<double>(st.s_len));
    double tv = 0.0, best = 0.0;
    for (const auto& [key, count] : key_counts) {
        double p = static_cast<double>(count) / static_cast<double>(consistent);
        tv += std::abs(p - uniform);
        best = std::max(best, p);
    }
    const double cells = std::exp2(static_cast<double>(st.s_len));
    tv += (cells - static_cast<double>(key_counts.size())) * uniform;
    st.tv_distance = 0.5 * tv;
    st.best_guess = best;
    return st;
}

namespace detail_game {

inline StrategyOutcome run_strategy(Simulation& sim, const GameConfig& cfg, Rng& adv) {
    switch (cfg.strategy.kind) {
        case StrategyKind::passive_relay:
            return strategies::passive_relay(sim, "A", "B");
        case StrategyKind::intercept_resend:
            return strategies::intercept_resend_strategy(sim, "A", "B", cfg.strategy.fraction, adv);
        case StrategyKind::mitm_forger:
            return strategies::mitm_forger(sim, "A", "B", cfg.strategy.partner_before, adv);
        case StrategyKind::randomness_reveal:
            return strategies::randomness_reveal(sim, "A", "B", cfg.strategy.target,
                                                 cfg.strategy.when);
    }
    return {};
}

inline int strategy_guess(const GameConfig& cfg, const StrategyOutcome& outcome,
                          const std::optional<BitString>& kappa, Rng& adv) {
    if (cfg.strategy.kind == StrategyKind::mitm_forger && outcome.believed_sk && kappa)
        return (*kappa == *outcome.believed_sk) ? 1 : 0;
    return adv.bit();  // nothing distinguishing known: coin flip
}

}  // namespace detail_game

inline GameResult run_game(const GameConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("run_game: trials < 1");
    if (cfg.n_parties < 2) throw std::invalid_argument("run_game: n_parties < 2");
    GameResult result;
    result.config = cfg;
    std::ostringstream dump;

    for (int trial = 0; trial < cfg.trials; ++trial) {
        WorldConfig wc{cfg.n1, cfg.abort_threshold, cfg.sig_scheme, cfg.breakable_keyspace};
        const uint64_t trial_seed = splitmix64(cfg.seed ^ splitmix64(static_cast<uint64_t>(trial) + 1));
        Simulation sim(wc, trial_seed);
        sim.register_party("A", true);
        sim.register_party("B", true);
        for (int i = 2; i < cfg.n_parties; ++i)
            sim.register_party("P" + std::to_string(i), true);

        Rng adv = Rng::derive(cfg.seed, {static_cast<uint64_t>(trial), 100});
        Rng game = Rng::derive(cfg.seed, {static_cast<uint64_t>(trial), 200});

        StrategyOutcome outcome = detail_game::run_strategy(sim, cfg, adv);
        sim.expire_incomplete();

        TrialRow row;
        row.trial = trial;
        row.note = outcome.note;
        row.second_session_completed = outcome.second_session_completed;
        row.keys_distinct = outcome.keys_distinct;
        row.forged_accepted = sim.world().forged_accepted();

        for (const auto& key : sim.session_order()) {
            const bb84::Session& s = sim.sessions().at(key);
            if (s.stage == bb84::Stage::aborted)
                ++row.abort_causes[bb84::abort_name(s.abort_cause)];
            if (s.eps && !row.eps) row.eps = *s.eps;
        }

        if (outcome.test_sid) {
            if (const bb84::Session* s = sim.find_session(*outcome.test_sid)) {
                if (s->stage == bb84::Stage::completed) {
                    row.completed = true;
                    row.n2 = static_cast<int>(s->n2());
                    row.n3 = static_cast<int>(s->n3());
                    row.sift_ratio = static_cast<double>(s->n2()) / cfg.n1;
                    row.sk_len = static_cast<int>(s->output->sk.size());
                    row.delta_raw = security_delta(static_cast<int>(s->n3()), s->f.out_len,
                                                   s->g.out_len);
                }
            }
        }

        if (row.completed) {
            const int b = game.bit();
            std::optional<BitString> kappa = sim.test_query(*outcome.test_sid, b, game);
            row.test_b = b;
            row.guess = detail_game::strategy_guess(cfg, outcome, kappa, adv);
            row.fresh = sim.world().fresh(*outcome.test_sid);

            // correctness against the honest session with a matching vector
            const CompletedSession* self =
                sim.world().registry().find(outcome.test_sid->to_string());
            for (const auto& peer_row : sim.world().registry().rows()) {
                if (peer_row.sid == *outcome.test_sid) continue;
                if (peer_row.output.v == self->output.v) {
                    row.correctness = check_correctness(self->output, peer_row.output);
                    break;
                }
            }

            if (cfg.offline_analysis) {
                std::map<std::string, BitString> revealed;
                OfflineStats st;
                bool analyzable = true;
                try {
                    st = offline_analyze(sim.transcript(), *outcome.test_sid, cfg.offline_max_n3,
                                         revealed);
                } catch (const std::invalid_argument&) {
                    analyzable = false;
                }
                if (analyzable) {
                    if (cfg.sig_scheme == SigScheme::breakable) {
                        std::vector<SignObservation> obs_a, obs_b;
                        for (const auto& e : sim.transcript().events()) {
                            if (!e.msg || e.msg->sig.empty()) continue;
                            if (e.line.rfind("c adv->", 0) == 0) continue;
                            SignObservation o{e.msg->signed_bytes(), e.msg->sig};
                            if (e.msg->sender == "A") obs_a.push_back(std::move(o));
                            else if (e.msg->sender == "B") obs_b.push_back(std::move(o));
                        }
                        auto ka = brute_force_key(obs_a, cfg.breakable_keyspace);
                        auto kb = brute_force_key(obs_b, cfg.breakable_keyspace);
                        st.sig_keys_recovered = ka.has_value() && kb.has_value();
                        if (st.sig_keys_recovered) {
                            World& w = sim.world();
                            uint64_t real_a = w.party("A")
                                                  .pairs.at(w.verify_key_of("A"))
                                                  .private_value.to_uint64();
                            uint64_t real_b = w.party("B")
                                                  .pairs.at(w.verify_key_of("B"))
                                                  .private_value.to_uint64();
                            st.sig_keys_match_actual = (*ka == real_a && *kb == real_b);
                        }
                    }
                    row.offline = st;
                }
            }
        }

        dump << "trial " << trial << "\n";
        sim.transcript().dump(dump);
        result.trials.push_back(std::move(row));
    }

    // ---- aggregation ----
    Aggregates& agg = result.agg;
    uint64_t completed = 0, eps_n = 0, sift_n = 0, corr_n = 0, corr_ok = 0, fresh_n = 0,
             fresh_ok = 0;
    double eps_sum = 0, sift_sum = 0;
    uint64_t adv_samples = 0, adv_correct = 0;
    for (const auto& row : result.trials) {
        if (row.completed) ++completed;
        for (const auto& [cause, count] : row.abort_causes) agg.abort_causes[cause] += count;
        if (row.eps) {
            eps_sum += *row.eps;
            ++eps_n;
        }
        if (row.sift_ratio) {
            sift_sum += *row.sift_ratio;
            ++sift_n;
        }
        if (row.correctness) {
            ++corr_n;
            if (*row.correctness) ++corr_ok;
        }
        if (row.fresh) {
            ++fresh_n;
            if (*row.fresh) ++fresh_ok;
        }
        if (row.fresh.has_value() && row.test_b && row.guess) {
            if (*row.fresh) {
                ++adv_samples;
                if (*row.test_b == *row.guess) ++adv_correct;
            } else {
                ++agg.non_fresh_tested;
            }
        }
        agg.forged_accepted_total += row.forged_accepted;
        if (row.delta_raw)
            agg.max_delta_raw = std::max(agg.max_delta_raw.value_or(0.0), *row.delta_raw);
    }
    const double n_trials = static_cast<double>(cfg.trials);
    agg.completion_rate = static_cast<double>(completed) / n_trials;
    agg.abort_rate = 1.0 - agg.completion_rate;
    if (eps_n) agg.mean_eps = eps_sum / static_cast<double>(eps_n);
    if (sift_n) agg.mean_sift_ratio = sift_sum / static_cast<double>(sift_n);
    if (corr_n) agg.correctness_rate = static_cast<double>(corr_ok) / static_cast<double>(corr_n);
    if (fresh_n) agg.fresh_rate = static_cast<double>(fresh_ok) / static_cast<double>(fresh_n);
    if (adv_samples) {
        AdvantageEstimate est;
        est.samples = adv_samples;
        est.correct = adv_correct;
        est.p_correct = static_cast<double>(adv_correct) / static_cast<double>(adv_samples);
        est.advantage = std::abs(est.p_correct - 0.5);
        est.ci95 = 1.96 * std::sqrt(est.p_correct * (1.0 - est.p_correct) /
                                    static_cast<double>(adv_samples));
        agg.advantage = est;
    }
    result.transcript_dump = dump.str();
    return result;
}

}  // namespace qake
