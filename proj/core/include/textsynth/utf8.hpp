// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "textsynth/error.hpp"

namespace textsynth {

// Decodes UTF-8 to codepoints. Throws on malformed sequences.
inline std::vector<uint32_t> utf8_decode(std::string_view s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    uint8_t b0 = uint8_t(s[i]);
    uint32_t cp = 0;
    size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xe0) == 0xc0) {
      cp = b0 & 0x1f;
      len = 2;
    } else if ((b0 & 0xf0) == 0xe0) {
      cp = b0 & 0x0f;
      len = 3;
    } else if ((b0 & 0xf8) == 0xf0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw Error("invalid UTF-8 byte at offset " + std::to_string(i));
    }
    if (i + len > s.size())
      throw Error("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (size_t k = 1; k < len; ++k) {
      uint8_t b = uint8_t(s[i + k]);
      if ((b & 0xc0) != 0x80)
        throw Error("invalid UTF-8 continuation at offset " +
                    std::to_string(i + k));
      cp = (cp << 6) | (b & 0x3f);
    }
    if (len == 2 && cp < 0x80) throw Error("overlong UTF-8 sequence");
    if (len == 3 && cp < 0x800) throw Error("overlong UTF-8 sequence");
    if (len == 4 && cp < 0x10000) throw Error("overlong UTF-8 sequence");
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff))
      throw Error("invalid Unicode codepoint in UTF-8 input");
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void utf8_append(std::string& s, uint32_t cp) {
  if (cp < 0x80) {
    s.push_back(char(cp));
  } else if (cp < 0x800) {
    s.push_back(char(0xc0 | (cp >> 6)));
    s.push_back(char(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    s.push_back(char(0xe0 | (cp >> 12)));
    s.push_back(char(0x80 | ((cp >> 6) & 0x3f)));
    s.push_back(char(0x80 | (cp & 0x3f)));
  } else {
    s.push_back(char(0xf0 | (cp >> 18)));
    s.push_back(char(0x80 | ((cp >> 12) & 0x3f)));
    s.push_back(char(0x80 | ((cp >> 6) & 0x3f)));
    s.push_back(char(0x80 | (cp & 0x3f)));
  }
}

}  // namespace textsynth
