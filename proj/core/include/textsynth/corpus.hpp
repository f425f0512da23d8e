// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <string>
#include <vector>

#include "textsynth/rng.hpp"

namespace textsynth {

// Foreground text source: newline-delimited UTF-8 lines plus a word index
// derived by whitespace splitting.
struct Corpus {
  std::vector<std::string> lines;
  std::vector<std::string> words;
};

enum class SampleMode { kWord, kLine };

// Loads and normalizes a corpus file: whitespace trimmed and collapsed,
// empty lines dropped. Throws on undecodable bytes or an empty result.
Corpus load_corpus(const std::string& path);

// Uniformly samples a word or line, truncating lines at a word boundary to
// at most `max_chars` codepoints. Entries that cannot fit are resampled up
// to 100 times before giving up.
std::string sample_text(const Corpus& corpus, Rng& rng, SampleMode mode,
                        int max_chars);

}  // namespace textsynth
