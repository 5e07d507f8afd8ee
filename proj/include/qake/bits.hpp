#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qake {

/// Dynamic bit string. Index 0 is the most significant bit: serialization,
/// hex dumps and integer conversion all read the string front-to-back.
class BitString {
public:
    BitString() = default;
    explicit BitString(std::size_t n, uint8_t fill = 0) : bits_(n, fill ? 1 : 0) {}

    static BitString from_uint64(uint64_t v, std::size_t width) {
        if (width > 64) throw std::invalid_argument("BitString::from_uint64: width > 64");
        BitString out(width);
        for (std::size_t i = 0; i < width; ++i)
            out.bits_[i] = static_cast<uint8_t>((v >> (width - 1 - i)) & 1u);
        return out;
    }

    /// Parses a string of '0'/'1' characters, front character = MSB.
    static BitString parse(const std::string& s) {
        BitString out;
        out.bits_.reserve(s.size());
        for (char c : s) {
            if (c != '0' && c != '1') throw std::invalid_argument("BitString::parse: not a bit");
            out.bits_.push_back(static_cast<uint8_t>(c - '0'));
        }
        return out;
    }

    std::size_t size() const { return bits_.size(); }
    bool empty() const { return bits_.empty(); }
    uint8_t operator[](std::size_t i) const { return bits_[i]; }
    uint8_t& operator[](std::size_t i) { return bits_[i]; }
    void push_back(uint8_t b) { bits_.push_back(b ? 1 : 0); }
    void append(const BitString& other) {
        bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
    }
    void flip(std::size_t i) { bits_[i] ^= 1; }

    uint64_t to_uint64() const {
        if (size() > 64) throw std::invalid_argument("BitString::to_uint64: too wide");
        uint64_t v = 0;
        for (uint8_t b : bits_) v = (v << 1) | b;
        return v;
    }

    /// Little-endian 64-bit limbs of the value this string denotes.
    std::vector<uint64_t> to_limbs() const {
        std::vector<uint64_t> limbs((size() + 63) / 64, 0);
        const std::size_t w = size();
        for (std::size_t i = 0; i < w; ++i) {
            if (!bits_[i]) continue;
            std::size_t pos = w - 1 - i;  // bit position within the value
            limbs[pos / 64] |= (uint64_t{1} << (pos % 64));
        }
        return limbs;
    }

    static BitString from_limbs(const std::vector<uint64_t>& limbs, std::size_t width) {
        BitString out(width);
        for (std::size_t i = 0; i < width; ++i) {
            std::size_t pos = width - 1 - i;
            std::size_t li = pos / 64;
            uint8_t bit = li < limbs.size()
                              ? static_cast<uint8_t>((limbs[li] >> (pos % 64)) & 1u)
                              : 0;
            out.bits_[i] = bit;
        }
        return out;
    }

    /// MSB-first packing, low bits of the final nibble zero-padded.
    std::string to_hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out;
        out.reserve((size() + 3) / 4);
        for (std::size_t i = 0; i < size(); i += 4) {
            unsigned nibble = 0;
            for (std::size_t j = 0; j < 4; ++j)
                nibble = (nibble << 1) | (i + j < size() ? bits_[i + j] : 0);
            out.push_back(digits[nibble]);
        }
        return out;
    }

    /// Bit count followed by hex payload, e.g. "5:b0". Used in dumps.
    std::string to_dump() const { return std::to_string(size()) + ":" + to_hex(); }

    std::string to_string01() const {
        std::string s;
        s.reserve(size());
        for (uint8_t b : bits_) s.push_back(static_cast<char>('0' + b));
        return s;
    }

    std::size_t hamming_weight() const {
        std::size_t w = 0;
        for (uint8_t b : bits_) w += b;
        return w;
    }

    friend std::size_t hamming_distance(const BitString& a, const BitString& b) {
        if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
        std::size_t d = 0;
        for (std::size_t i = 0; i < a.size(); ++i) d += a.bits_[i] ^ b.bits_[i];
        return d;
    }

    friend BitString operator^(const BitString& a, const BitString& b) {
        if (a.size() != b.size()) throw std::invalid_argument("BitString xor: length mismatch");
        BitString out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out.bits_[i] = a.bits_[i] ^ b.bits_[i];
        return out;
    }

    bool operator==(const BitString& other) const = default;

private:
    std::vector<uint8_t> bits_;
};

/// Canonical length-prefixed byte serialization. Every field is written with
/// an explicit length so two independent encoders produce identical bytes.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void bits(const BitString& b) {
        u32(static_cast<uint32_t>(b.size()));
        const std::string hex = b.to_hex();
        buf_.insert(buf_.end(), hex.begin(), hex.end());
    }
    void u64_vec(const std::vector<uint64_t>& v) {
        u32(static_cast<uint32_t>(v.size()));
        for (uint64_t x : v) u64(x);
    }
    void u32_vec(const std::vector<uint32_t>& v) {
        u32(static_cast<uint32_t>(v.size()));
        for (uint32_t x : v) u32(x);
    }

    const std::vector<uint8_t>& bytes() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    std::vector<uint8_t> buf_;
};

inline std::string bytes_to_hex(const std::vector<uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

}  // namespace qake
