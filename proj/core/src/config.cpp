// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace textsynth {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw InvalidArgument("config key " + key + ": not an integer: " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw InvalidArgument("config key " + key + ": not a number: " + v);
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw InvalidArgument("config key " + key + ": not an integer: " + v);
  }
}

std::set<std::string> to_set(const std::string& v) {
  std::set<std::string> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.insert(item);
  }
  return out;
}

}  // namespace

void SynthesisConfig::set(const std::string& key, const std::string& value) {
  const std::map<std::string, std::function<void(const std::string&)>>
      setters = {
          {"backgrounds_dir", [&](const std::string& v) { backgrounds_dir = v; }},
          {"semantic_maps_dir",
           [&](const std::string& v) { semantic_maps_dir = v; }},
          {"palette", [&](const std::string& v) { palette = v; }},
          {"corpus", [&](const std::string& v) { corpus = v; }},
          {"fonts_dir", [&](const std::string& v) { fonts_dir = v; }},
          {"generator_checkpoint",
           [&](const std::string& v) { generator_checkpoint = v; }},
          {"recognizer_checkpoint",
           [&](const std::string& v) { recognizer_checkpoint = v; }},
          {"real_crops_dir", [&](const std::string& v) { real_crops_dir = v; }},
          {"output_dir", [&](const std::string& v) { output_dir = v; }},
          {"superpixels",
           [&](const std::string& v) { superpixels = to_int(key, v); }},
          {"compactness",
           [&](const std::string& v) { compactness = to_double(key, v); }},
          {"slic_iterations",
           [&](const std::string& v) { slic_iterations = to_int(key, v); }},
          {"merge_delta_e",
           [&](const std::string& v) { merge_delta_e = to_double(key, v); }},
          {"whitelist", [&](const std::string& v) { whitelist = to_set(v); }},
          {"min_score",
           [&](const std::string& v) { min_score = to_double(key, v); }},
          {"min_area_frac",
           [&](const std::string& v) { min_area_frac = to_double(key, v); }},
          {"max_perturb",
           [&](const std::string& v) { max_perturb = to_double(key, v); }},
          {"margins", [&](const std::string& v) { margins = to_double(key, v); }},
          {"word_fraction",
           [&](const std::string& v) { word_fraction = to_double(key, v); }},
          {"max_chars", [&](const std::string& v) { max_chars = to_int(key, v); }},
          {"text_px_height",
           [&](const std::string& v) { text_px_height = to_int(key, v); }},
          {"max_instances",
           [&](const std::string& v) { max_instances = to_int(key, v); }},
          {"retries", [&](const std::string& v) { retries = to_int(key, v); }},
          {"gan_scale",
           [&](const std::string& v) { gan_scale = to_double(key, v); }},
          {"gan_input_size",
           [&](const std::string& v) { gan_input_size = to_int(key, v); }},
          {"gan_batch", [&](const std::string& v) { gan_batch = to_int(key, v); }},
          {"gan_iterations",
           [&](const std::string& v) { gan_iterations = to_int(key, v); }},
          {"gan_critic_steps",
           [&](const std::string& v) { gan_critic_steps = to_int(key, v); }},
          {"gan_lambda_s",
           [&](const std::string& v) { gan_lambda_s = to_double(key, v); }},
          {"gan_learning_rate",
           [&](const std::string& v) { gan_learning_rate = to_double(key, v); }},
          {"gan_generator_lr",
           [&](const std::string& v) { gan_generator_lr = to_double(key, v); }},
          {"gan_clip_c",
           [&](const std::string& v) { gan_clip_c = to_double(key, v); }},
          {"char_size", [&](const std::string& v) { char_size = to_int(key, v); }},
          {"alphabet", [&](const std::string& v) { alphabet = v; }},
          {"train_samples",
           [&](const std::string& v) { train_samples = to_int(key, v); }},
          {"dump_region_maps",
           [&](const std::string& v) {
             dump_region_maps = v == "1" || v == "true" || v == "yes";
           }},
          {"seed", [&](const std::string& v) { seed = to_u64(key, v); }},
          {"workers", [&](const std::string& v) { workers = to_int(key, v); }},
      };
  auto it = setters.find(key);
  if (it == setters.end())
    throw InvalidArgument("unknown config key: " + key);
  it->second(value);
}

std::vector<std::string> synthesis_config_keys() {
  return {"backgrounds_dir", "semantic_maps_dir", "palette", "corpus",
          "fonts_dir", "generator_checkpoint", "recognizer_checkpoint",
          "real_crops_dir", "output_dir", "superpixels", "compactness",
          "slic_iterations", "merge_delta_e", "whitelist", "min_score",
          "min_area_frac", "max_perturb", "margins", "word_fraction",
          "max_chars", "text_px_height", "max_instances", "retries",
          "gan_scale", "gan_input_size", "gan_batch", "gan_iterations",
          "gan_critic_steps", "gan_lambda_s", "gan_learning_rate",
          "gan_generator_lr", "gan_clip_c", "char_size", "alphabet",
          "train_samples", "dump_region_maps", "seed", "workers"};
}

SynthesisConfig load_synthesis_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  SynthesisConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("config line " + std::to_string(lineno) + " in " + path +
                    ": expected key = value");
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const InvalidArgument& e) {
      throw IoError("config line " + std::to_string(lineno) + " in " + path +
                    ": " + e.what());
    }
  }
  return config;
}

std::vector<std::string> SynthesisConfig::validate(bool check_paths) const {
  std::vector<std::string> problems;
  auto need_dir = [&](const std::string& what, const std::string& p) {
    if (p.empty())
      problems.push_back(what + " is not set");
    else if (check_paths && !std::filesystem::is_directory(p))
      problems.push_back(what + " is not a directory: " + p);
  };
  auto need_file = [&](const std::string& what, const std::string& p) {
    if (p.empty())
      problems.push_back(what + " is not set");
    else if (check_paths && !std::filesystem::is_regular_file(p))
      problems.push_back(what + " is not a file: " + p);
  };
  need_dir("backgrounds_dir", backgrounds_dir);
  need_dir("semantic_maps_dir", semantic_maps_dir);
  need_file("palette", palette);
  need_file("corpus", corpus);
  need_dir("fonts_dir", fonts_dir);
  need_file("generator_checkpoint", generator_checkpoint);
  if (output_dir.empty()) problems.push_back("output_dir is not set");

  if (max_instances < 1 || max_instances > 15)
    problems.push_back("max_instances must be in [1, 15]");
  if (superpixels < 1) problems.push_back("superpixels must be >= 1");
  if (slic_iterations < 1) problems.push_back("slic_iterations must be >= 1");
  if (merge_delta_e <= 0) problems.push_back("merge_delta_e must be > 0");
  if (min_score < 0 || min_score > 1)
    problems.push_back("min_score must be in [0, 1]");
  if (min_area_frac < 0 || min_area_frac > 1)
    problems.push_back("min_area_frac must be in [0, 1]");
  if (max_perturb < 0 || max_perturb > 0.3)
    problems.push_back("max_perturb must be in [0, 0.3]");
  if (margins < 0 || margins >= 0.5)
    problems.push_back("margins must be in [0, 0.5)");
  if (word_fraction < 0 || word_fraction > 1)
    problems.push_back("word_fraction must be in [0, 1]");
  if (whitelist.empty()) problems.push_back("whitelist is empty");
  if (max_chars < 1) problems.push_back("max_chars must be >= 1");
  if (text_px_height < 8) problems.push_back("text_px_height must be >= 8");
  if (retries < 0) problems.push_back("retries must be >= 0");
  if (workers < 1) problems.push_back("workers must be >= 1");
  if (gan_input_size % 4 != 0 || gan_input_size < 8)
    problems.push_back("gan_input_size must be a multiple of 4, >= 8");
  if (gan_scale != 1.0 && gan_scale != 0.5 && gan_scale != 0.25)
    problems.push_back("gan_scale must be 1, 0.5 or 0.25");
  if (alphabet.empty()) problems.push_back("alphabet is empty");
  if (gan_learning_rate <= 0) problems.push_back("gan_learning_rate must be > 0");
  if (gan_clip_c <= 0) problems.push_back("gan_clip_c must be > 0");
  return problems;
}

}  // namespace textsynth
