// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include "textsynth/pipeline.hpp"
#include "textsynth/utf8.hpp"
#include "textsynth/recognizer.hpp"

namespace {

using textsynth::SynthesisConfig;

struct CommonArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

// Registers --config plus one string override option per config key.
void add_config_options(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "key = value config file")
      ->required();
  for (const std::string& key : textsynth::synthesis_config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [args, key](const std::string& value) { args->overrides[key] = value; },
        "override config key " + key);
  }
}

SynthesisConfig resolve_config(const CommonArgs& args) {
  SynthesisConfig config = textsynth::load_synthesis_config(args.config_path);
  for (const auto& [key, value] : args.overrides) config.set(key, value);
  return config;
}

int run_synth(const CommonArgs& args, bool dry_run) {
  SynthesisConfig config = resolve_config(args);
  if (dry_run) {
    auto problems = config.validate(/*check_paths=*/true);
    if (problems.empty()) {
      std::printf("configuration valid\n");
      return 0;
    }
    for (const auto& p : problems) std::fprintf(stderr, "error: %s\n", p.c_str());
    return 1;
  }
  textsynth::BatchSummary summary = textsynth::batch_synthesize(config);
  std::printf("synthesized %d image(s), %d failure(s)\n", summary.processed,
              summary.failed);
  for (const auto& f : summary.failures)
    std::fprintf(stderr, "failed %s\n", f.c_str());
  std::printf("manifest: %s\n", summary.manifest_path.c_str());
  if (summary.failed == 0) return 0;
  return summary.processed > 0 ? 2 : 1;
}

int run_train_gan(const CommonArgs& args) {
  SynthesisConfig config = resolve_config(args);
  if (config.recognizer_checkpoint.empty())
    throw textsynth::InvalidArgument(
        "train-gan requires recognizer_checkpoint (run pretrain-recognizer "
        "first)");
  if (config.real_crops_dir.empty())
    throw textsynth::InvalidArgument("train-gan requires real_crops_dir");
  if (config.generator_checkpoint.empty())
    throw textsynth::InvalidArgument(
        "train-gan requires generator_checkpoint (output path)");

  std::printf("harvesting up to %d training pairs...\n", config.train_samples);
  std::vector<textsynth::TrainingSample> samples =
      textsynth::harvest_training_samples(config, config.train_samples);
  std::printf("harvested %zu pairs\n", samples.size());

  textsynth::GanConfig gan;
  gan.scale = config.gan_scale;
  gan.input_size = config.gan_input_size;
  gan.batch_size = config.gan_batch;
  gan.iterations = config.gan_iterations;
  gan.critic_steps = config.gan_critic_steps;
  gan.lambda_s = config.gan_lambda_s;
  gan.learning_rate = float(config.gan_learning_rate);
  gan.generator_lr = float(config.gan_generator_lr);
  gan.clip_c = float(config.gan_clip_c);
  gan.char_size = config.char_size;
  gan.alphabet = config.alphabet;
  gan.seed = config.seed;
  gan.checkpoint_path = config.generator_checkpoint;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    gan.log_path =
        (std::filesystem::path(config.output_dir) / "training_log.csv").string();
  }

  textsynth::RealCropSet real = textsynth::RealCropSet::load_directory(
      config.real_crops_dir, gan.input_size);
  std::printf("real reference crops: %zu\n", real.crops.size());

  textsynth::ParameterStore<float> store, rstore;
  textsynth::load_checkpoint(rstore, config.recognizer_checkpoint);
  textsynth::Rng rng(config.seed);
  textsynth::GanTrainer::init_params(store, gan, rng);
  textsynth::TrainResult result =
      textsynth::train(gan, store, rstore, samples, real);
  std::printf("trained %d iterations; Wasserstein estimate %.5f -> %.5f\n",
              result.iterations_run, result.wasserstein_start,
              result.wasserstein_end);
  std::printf("checkpoint: %s\n", gan.checkpoint_path.c_str());
  if (!gan.log_path.empty()) std::printf("log: %s\n", gan.log_path.c_str());
  return 0;
}

int run_pretrain_recognizer(const CommonArgs& args) {
  SynthesisConfig config = resolve_config(args);
  if (config.recognizer_checkpoint.empty())
    throw textsynth::InvalidArgument(
        "pretrain-recognizer requires recognizer_checkpoint (output path)");
  if (config.fonts_dir.empty())
    throw textsynth::InvalidArgument("pretrain-recognizer requires fonts_dir");

  textsynth::RecognizerConfig rec;
  rec.alphabet = config.alphabet;
  rec.char_size = config.char_size;
  rec.seed = config.seed;
  auto fonts = textsynth::list_font_files(config.fonts_dir);
  std::printf("training recognizer on %zu classes with %zu fonts...\n",
              textsynth::utf8_decode(rec.alphabet).size(), fonts.size());
  textsynth::ParameterStore<float> store;
  textsynth::RecognizerResult result =
      textsynth::pretrain_recognizer(fonts, rec, store);
  textsynth::save_checkpoint(store, config.recognizer_checkpoint);
  std::printf("held-out accuracy %.4f after %d epoch(s)\n",
              result.heldout_accuracy, result.epochs_run);
  std::printf("checkpoint: %s\n", config.recognizer_checkpoint.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scene-text training-image synthesizer"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, rec_args;
  bool dry_run = false;

  CLI::App* synth = app.add_subcommand(
      "synth", "synthesize annotated images from backgrounds");
  add_config_options(synth, &synth_args);
  synth->add_flag("--dry-run", dry_run, "validate inputs and exit");

  CLI::App* train =
      app.add_subcommand("train-gan", "train the appearance network");
  add_config_options(train, &train_args);

  CLI::App* pretrain = app.add_subcommand(
      "pretrain-recognizer", "train the frozen recognizer");
  add_config_options(pretrain, &rec_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(synth_args, dry_run);
    if (train->parsed()) return run_train_gan(train_args);
    if (pretrain->parsed()) return run_pretrain_recognizer(rec_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
