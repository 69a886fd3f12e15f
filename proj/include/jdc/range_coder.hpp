// Copyright (c) the JDC project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Integer-only range coder: 32-bit range, 16-bit probability precision,
// byte-wise renormalization, carries resolved through a delayed cache byte.
// A two-byte length trailer makes truncated streams detectable. Encoder and
// decoder instances are single-use, single-threaded state machines.

#ifndef JDC_RANGE_CODER_HPP_
#define JDC_RANGE_CODER_HPP_

#include <cstdint>
#include <vector>

#include "jdc/common.hpp"
#include "jdc/entropy_model.hpp"

namespace jdc {

struct Bitstream {
  std::vector<uint8_t> bytes;
  uint64_t bit_length() const { return uint64_t(bytes.size()) * 8; }
};

namespace rcdetail {

constexpr uint32_t kTop = 1u << 24;

class Encoder {
 public:
  void encode(uint32_t cum, uint32_t freq, uint32_t total) {
    const uint32_t r = range_ / total;
    low_ += uint64_t(r) * cum;
    range_ = r * freq;
    while (range_ < kTop) {
      shift_low();
      range_ <<= 8;
    }
  }

  std::vector<uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

 private:
  void shift_low() {
    if (uint32_t(low_) < 0xFF000000u || uint32_t(low_ >> 32) != 0) {
      const uint8_t carry = uint8_t(low_ >> 32);
      out_.push_back(uint8_t(cache_ + carry));
      while (pending_ > 0) {
        out_.push_back(uint8_t(0xFF + carry));
        --pending_;
      }
      cache_ = uint8_t(low_ >> 24);
    } else {
      ++pending_;
    }
    // bits 24..31 moved to cache, bit 32 was the carry: keep only 0..23
    low_ = (low_ & 0x00FFFFFFull) << 8;
  }

  std::vector<uint8_t> out_;
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t pending_ = 0;
};

class Decoder {
 public:
  Decoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
  }

  // Returns a scaled frequency in [0, total); the caller maps it to a symbol.
  uint32_t decode_freq(uint32_t total) {
    r_ = range_ / total;
    const uint32_t f = code_ / r_;
    return f >= total ? total - 1 : f;
  }

  void decode_update(uint32_t cum, uint32_t freq) {
    code_ -= cum * r_;
    range_ = r_ * freq;
    while (range_ < kTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }

 private:
  uint8_t next_byte() {
    if (pos_ >= size_) throw DecodeError("range coder: truncated stream");
    return data_[pos_++];
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t r_ = 0;
};

}  // namespace rcdetail

// Encodes quantized integer values, one ChannelCdf per value. Out-of-support
// values go through the escape symbol followed by the raw 16-bit
// two's-complement value.
inline Bitstream rc_encode(const std::vector<int>& values,
                           const std::vector<const ChannelCdf*>& tables) {
  if (values.size() != tables.size())
    throw ShapeMismatch("rc_encode: one table per value required");
  rcdetail::Encoder enc;
  for (size_t i = 0; i < values.size(); ++i) {
    const ChannelCdf& t = *tables[i];
    const int v = values[i];
    const int s = t.symbol_of(v);
    enc.encode(t.cum[size_t(s)], t.cum[size_t(s) + 1] - t.cum[size_t(s)],
               kCoderTotal);
    if (s == t.escape_symbol()) {
      if (v < -32768 || v > 32767)
        throw ConfigError("rc_encode: escape value outside 16-bit range");
      const uint16_t raw = uint16_t(int16_t(v));
      enc.encode(raw & 0xFF, 1, 256);
      enc.encode(raw >> 8, 1, 256);
    }
  }
  Bitstream bs;
  bs.bytes = enc.finish();
  const uint16_t len = uint16_t(bs.bytes.size() & 0xFFFF);
  bs.bytes.push_back(uint8_t(len & 0xFF));
  bs.bytes.push_back(uint8_t(len >> 8));
  return bs;
}

inline std::vector<int> rc_decode(const Bitstream& bs,
                                  const std::vector<const ChannelCdf*>& tables,
                                  size_t n) {
  if (tables.size() != n)
    throw ShapeMismatch("rc_decode: one table per value required");
  if (bs.bytes.size() < 2) throw DecodeError("rc_decode: stream too short");
  const size_t payload = bs.bytes.size() - 2;
  const uint16_t stored =
      uint16_t(bs.bytes[payload]) | (uint16_t(bs.bytes[payload + 1]) << 8);
  if (uint16_t(payload & 0xFFFF) != stored)
    throw DecodeError("rc_decode: length trailer mismatch (truncated?)");
  if (payload < 5) throw DecodeError("rc_decode: stream too short");

  rcdetail::Decoder dec(bs.bytes.data(), payload);
  std::vector<int> out(n);
  for (size_t i = 0; i < n; ++i) {
    const ChannelCdf& t = *tables[i];
    const uint32_t f = dec.decode_freq(kCoderTotal);
    // cum is strictly increasing: binary search for the containing symbol.
    int lo = 0, hi = t.num_symbols() - 1;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (t.cum[size_t(mid)] <= f)
        lo = mid;
      else
        hi = mid - 1;
    }
    const int s = lo;
    dec.decode_update(t.cum[size_t(s)],
                      t.cum[size_t(s) + 1] - t.cum[size_t(s)]);
    if (s == t.escape_symbol()) {
      const uint32_t b0 = dec.decode_freq(256);
      dec.decode_update(b0, 1);
      const uint32_t b1 = dec.decode_freq(256);
      dec.decode_update(b1, 1);
      out[i] = int(int16_t(uint16_t(b0) | (uint16_t(b1) << 8)));
    } else {
      out[i] = t.v_lo + s;
    }
  }
  return out;
}

}  // namespace jdc

#endif  // JDC_RANGE_CODER_HPP_
