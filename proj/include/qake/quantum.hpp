#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qake/bits.hpp"
#include "qake/rng.hpp"

namespace qake {

/// One conjugate-coding qubit: basis 0 is computational, basis 1 diagonal.
/// Sufficient for BB84 endpoints and measure-and-resend adversaries; general
/// quantum states are out of scope.
struct SimQubit {
    uint8_t basis = 0;
    uint8_t bit = 0;
    bool consumed = false;
};

/// An ordered batch of qubits in flight. Frames are affine: move-only,
/// measured at most once. Copying would amount to cloning.
class QubitFrame {
public:
    QubitFrame(std::vector<SimQubit> qubits, std::string origin, uint64_t uid)
        : qubits_(std::move(qubits)), origin_(std::move(origin)), uid_(uid) {}

    QubitFrame(const QubitFrame&) = delete;
    QubitFrame& operator=(const QubitFrame&) = delete;
    QubitFrame(QubitFrame&&) = default;
    QubitFrame& operator=(QubitFrame&&) = default;

    std::size_t size() const { return qubits_.size(); }
    const std::string& origin() const { return origin_; }
    uint64_t uid() const { return uid_; }
    bool consumed() const { return !qubits_.empty() && qubits_.front().consumed; }

private:
    std::vector<SimQubit> qubits_;
    std::string origin_;
    uint64_t uid_;

    friend BitString measure(QubitFrame&, const BitString&, Rng&);
    friend struct EveTap;
};

inline uint64_t next_frame_uid() {
    static thread_local uint64_t counter = 0;
    return counter++;
}

inline QubitFrame prepare(const BitString& basis_bits, const BitString& data_bits,
                          const std::string& origin = "", uint64_t uid = 0) {
    if (basis_bits.size() != data_bits.size())
        throw std::invalid_argument("prepare: basis/data length mismatch");
    if (basis_bits.empty()) throw std::invalid_argument("prepare: empty frame");
    std::vector<SimQubit> qs(basis_bits.size());
    for (std::size_t i = 0; i < qs.size(); ++i) {
        qs[i].basis = basis_bits[i];
        qs[i].bit = data_bits[i];
    }
    return QubitFrame(std::move(qs), origin, uid);
}

/// Measures every qubit: same basis reproduces the encoded bit, a
/// mismatched basis yields an independent uniform bit and the state
/// collapses to the measured (basis, outcome). Consumes the frame.
inline BitString measure(QubitFrame& frame, const BitString& basis_bits, Rng& rng) {
    if (frame.size() != basis_bits.size()) throw std::invalid_argument("measure: length mismatch");
    if (frame.consumed()) throw std::logic_error("measure: frame already consumed (no-cloning)");
    BitString out(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        SimQubit& q = frame.qubits_[i];
        uint8_t outcome = (basis_bits[i] == q.basis) ? q.bit : rng.bit();
        q.basis = basis_bits[i];
        q.bit = outcome;
        q.consumed = true;
        out[i] = outcome;
    }
    return out;
}

/// One adversarial measurement: raw frame position, basis used, outcome.
struct EveRecord {
    uint32_t position;
    uint8_t basis;
    uint8_t outcome;
};

struct InterceptResult {
    QubitFrame frame;
    std::vector<EveRecord> records;
};

struct EveTap {
    /// Measure-and-resend on a random subset: each qubit independently with
    /// probability `fraction` is measured in a uniform basis and replaced by
    /// a fresh preparation of the observed state. Consumes the input frame.
    static InterceptResult intercept_resend(QubitFrame frame, double fraction, Rng& rng) {
        if (fraction < 0.0 || fraction > 1.0)
            throw std::invalid_argument("intercept_resend: fraction outside [0,1]");
        if (frame.consumed()) throw std::logic_error("intercept_resend: frame already consumed");
        std::vector<SimQubit> forwarded(frame.size());
        std::vector<EveRecord> records;
        for (std::size_t i = 0; i < frame.size(); ++i) {
            const SimQubit& q = frame.qubits_[i];
            if (rng.real01() < fraction) {
                uint8_t eve_basis = rng.bit();
                uint8_t outcome = (eve_basis == q.basis) ? q.bit : rng.bit();
                records.push_back({static_cast<uint32_t>(i), eve_basis, outcome});
                forwarded[i] = SimQubit{eve_basis, outcome, false};
            } else {
                forwarded[i] = SimQubit{q.basis, q.bit, false};
            }
        }
        QubitFrame out(std::move(forwarded), frame.origin(), frame.uid());
        return InterceptResult{std::move(out), std::move(records)};
    }
};

inline InterceptResult intercept_resend(QubitFrame frame, double fraction, Rng& rng) {
    return EveTap::intercept_resend(std::move(frame), fraction, rng);
}

}  // namespace qake
