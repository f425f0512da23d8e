// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/corpus.hpp"

#include <fstream>
#include <sstream>

#include "textsynth/error.hpp"
#include "textsynth/utf8.hpp"

namespace textsynth {

namespace {

std::string normalize_line(const std::string& raw) {
  std::string out;
  bool in_space = true;  // swallow leading whitespace
  for (char c : raw) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

size_t codepoint_count(const std::string& s) { return utf8_decode(s).size(); }

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    std::string norm = normalize_line(line);
    if (norm.empty()) continue;
    utf8_decode(norm);  // validates; throws on bad bytes
    corpus.lines.push_back(norm);
    std::istringstream words(norm);
    std::string w;
    while (words >> w) corpus.words.push_back(w);
  }
  if (corpus.lines.empty())
    throw IoError("corpus is empty after normalization: " + path);
  return corpus;
}

std::string sample_text(const Corpus& corpus, Rng& rng, SampleMode mode,
                        int max_chars) {
  if (corpus.lines.empty()) throw InvalidArgument("sample_text: empty corpus");
  if (max_chars < 1) throw InvalidArgument("sample_text: max_chars must be >= 1");

  for (int attempt = 0; attempt < 100; ++attempt) {
    if (mode == SampleMode::kWord) {
      const std::string& w = corpus.words[rng.uniform_index(corpus.words.size())];
      if (codepoint_count(w) <= size_t(max_chars)) return w;
      continue;
    }
    const std::string& line = corpus.lines[rng.uniform_index(corpus.lines.size())];
    if (codepoint_count(line) <= size_t(max_chars)) return line;
    // Truncate at a word boundary.
    std::istringstream words(line);
    std::string w, kept;
    while (words >> w) {
      std::string trial = kept.empty() ? w : kept + " " + w;
      if (codepoint_count(trial) > size_t(max_chars)) break;
      kept = trial;
    }
    if (!kept.empty()) return kept;
  }
  throw Error("sample_text: no corpus entry fits in " +
              std::to_string(max_chars) + " characters after 100 tries");
}

}  // namespace textsynth
