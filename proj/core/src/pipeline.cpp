// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "textsynth/recognizer.hpp"
#include "textsynth/segmentation.hpp"
#include "textsynth/utf8.hpp"

namespace textsynth {

namespace {

namespace fs = std::filesystem;

std::string uppercase_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'a' && c <= 'z') c = char(c - 'a' + 'A');
  return out;
}

// Candidate detection shared by synthesis and sample harvesting.
std::vector<CandidateRegion> detect_candidates(const RasterImage& background,
                                               const SemanticMap& map,
                                               const SynthesisConfig& cfg,
                                               RegionMap* keep_map = nullptr) {
  int k = scaled_superpixel_count(cfg.superpixels, background.pixel_count());
  RegionMap segments = slic_superpixels(background, k, cfg.compactness,
                                        cfg.slic_iterations);
  segments = enforce_connectivity(segments);
  segments = merge_similar(segments, background, cfg.merge_delta_e);
  std::vector<Region> regions = extract_regions(segments, background);
  auto picked = select_candidates(regions, map, cfg.whitelist, cfg.min_score,
                                  cfg.min_area_frac);
  if (keep_map) *keep_map = std::move(segments);
  return picked;
}

// Weighted draw (probability proportional to score) without replacement.
size_t draw_candidate(std::vector<CandidateRegion>& pool, Rng& rng,
                      CandidateRegion* out) {
  double total = 0;
  for (const CandidateRegion& c : pool) total += c.score;
  double target = rng.uniform() * total;
  size_t pick = pool.size() - 1;
  double acc = 0;
  for (size_t i = 0; i < pool.size(); ++i) {
    acc += pool[i].score;
    if (target <= acc) {
      pick = i;
      break;
    }
  }
  *out = std::move(pool[pick]);
  pool.erase(pool.begin() + std::ptrdiff_t(pick));
  return pick;
}

std::string sample_instance_text(const Corpus& corpus, Rng& rng,
                                 const SynthesisConfig& cfg) {
  SampleMode mode = rng.uniform() < cfg.word_fraction ? SampleMode::kWord
                                                      : SampleMode::kLine;
  return uppercase_ascii(sample_text(corpus, rng, mode, cfg.max_chars));
}

// A font that covers the text, or none after a bounded number of draws.
const Font* pick_font(const std::vector<Font>& fonts, const std::string& text,
                      Rng& rng) {
  for (int attempt = 0; attempt < 20; ++attempt) {
    const Font& font = fonts[rng.uniform_index(fonts.size())];
    if (font.covers(text)) return &font;
  }
  return nullptr;
}

PixelBox crop_rect(const PixelBox& region_bbox, const Quad& quad, int width,
                   int height) {
  PixelBox box = region_bbox;
  PixelBox qb = quad.pixel_bbox();
  box.expand(qb.x0, qb.y0);
  box.expand(qb.x1, qb.y1);
  box.x0 = std::clamp(box.x0, 0, width - 1);
  box.y0 = std::clamp(box.y0, 0, height - 1);
  box.x1 = std::clamp(box.x1, 0, width - 1);
  box.y1 = std::clamp(box.y1, 0, height - 1);
  return box;
}

RasterImage crop_image(const RasterImage& image, const PixelBox& box) {
  RasterImage out(box.width(), box.height(), image.channels);
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x)
      for (int c = 0; c < image.channels; ++c)
        out.at(x, y, c) = image.at(box.x0 + x, box.y0 + y, c);
  return out;
}

}  // namespace

SynthesisOutput synthesize_one(const RasterImage& background,
                               const SemanticMap& semantic_map,
                               const SynthesisResources& resources,
                               uint64_t seed) {
  const SynthesisConfig& cfg = *resources.config;
  if (background.width != semantic_map.width ||
      background.height != semantic_map.height)
    throw InvalidArgument("synthesize_one: background and semantic map "
                          "dimensions differ");

  RasterImage canvas = to_rgb(background);
  SynthesisOutput out;
  out.text_mask.assign(canvas.pixel_count(), 0);
  Rng rng(seed);

  RegionMap debug_map;
  std::vector<CandidateRegion> pool = detect_candidates(
      canvas, semantic_map, cfg, cfg.dump_region_maps ? &debug_map : nullptr);
  if (cfg.dump_region_maps) out.region_map = std::move(debug_map);
  if (pool.empty()) {
    out.image = std::move(canvas);
    return out;  // unmodified copy, empty annotations
  }

  GanConfig gan_cfg;
  gan_cfg.scale = cfg.gan_scale;
  gan_cfg.input_size = cfg.gan_input_size;

  const int target = 1 + int(rng.uniform_index(uint64_t(cfg.max_instances)));
  int attempts_left = target + cfg.retries;
  while (int(out.record.instances.size()) < target && attempts_left-- > 0 &&
         !pool.empty()) {
    CandidateRegion candidate;
    draw_candidate(pool, rng, &candidate);

    std::string text = sample_instance_text(*resources.corpus, rng, cfg);
    if (text.empty()) continue;
    const Font* font = pick_font(*resources.fonts, text, rng);
    if (!font) continue;

    PlacedText placed;
    Homography h;
    try {
      TextMask mask = rasterize_text(text, *font, cfg.text_px_height);
      h = random_homography(rng, candidate.region.bbox, cfg.max_perturb);
      PlaceOptions opts;
      opts.margins = cfg.margins;
      placed = place_text(candidate, h, mask, canvas.width, canvas.height,
                          opts);
    } catch (const Error&) {
      continue;  // does not fit here; retry on another region
    }

    // Reject overlaps above 5% IoU with already accepted instances.
    bool overlaps = false;
    for (const InstanceRecord& prev : out.record.instances)
      if (quad_iou(placed.quad, prev.quad) > 0.05) {
        overlaps = true;
        break;
      }
    if (overlaps) continue;

    // Appearance inference on the region crop of the running canvas.
    PixelBox box =
        crop_rect(candidate.region.bbox, placed.quad, canvas.width,
                  canvas.height);
    RasterImage crop = crop_image(canvas, box);
    std::vector<uint8_t> crop_mask(size_t(box.width()) * box.height(), 0);
    for (int y = 0; y < box.height(); ++y)
      for (int x = 0; x < box.width(); ++x)
        crop_mask[size_t(y) * box.width() + x] =
            placed.warped_mask[size_t(box.y0 + y) * canvas.width + box.x0 + x];
    RasterImage composed =
        infer_appearance(*resources.generator, gan_cfg, crop, crop_mask);
    for (int y = 0; y < box.height(); ++y)
      for (int x = 0; x < box.width(); ++x) {
        if (!crop_mask[size_t(y) * box.width() + x]) continue;
        for (int c = 0; c < 3; ++c)
          canvas.at(box.x0 + x, box.y0 + y, c) = composed.at(x, y, c);
        out.text_mask[size_t(box.y0 + y) * canvas.width + box.x0 + x] = 1;
      }

    InstanceRecord inst;
    inst.quad = placed.quad;
    inst.transcript = placed.transcript;
    inst.region_id = candidate.region.id;
    inst.semantic_class = candidate.dominant_class;
    inst.score = candidate.score;
    inst.homography = h;
    out.record.instances.push_back(std::move(inst));
  }

  out.image = std::move(canvas);
  return out;
}

namespace {

struct BatchItem {
  std::string stem;
  std::string background_path;
  std::string map_path;
};

std::vector<BatchItem> match_pairs(const SynthesisConfig& cfg) {
  std::map<std::string, std::string> backgrounds;
  for (const auto& e : fs::directory_iterator(cfg.backgrounds_dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      backgrounds[e.path().stem().string()] = e.path().string();
  }
  std::vector<BatchItem> items;
  for (const auto& [stem, path] : backgrounds) {
    for (const char* ext : {".png", ".PNG"}) {
      fs::path map = fs::path(cfg.semantic_maps_dir) / (stem + ext);
      if (fs::is_regular_file(map)) {
        items.push_back({stem, path, map.string()});
        break;
      }
    }
  }
  return items;
}

}  // namespace

BatchSummary batch_synthesize(const SynthesisConfig& config) {
  auto problems = config.validate(/*check_paths=*/true);
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InvalidArgument(msg);
  }
  std::vector<BatchItem> items = match_pairs(config);
  if (items.empty())
    throw IoError("no background/semantic-map pairs matched by stem");
  fs::create_directories(config.output_dir);

  Corpus corpus = load_corpus(config.corpus);
  std::vector<Font> fonts;
  for (const std::string& path : list_font_files(config.fonts_dir))
    fonts.push_back(Font::load(path));
  ParameterStore<float> generator;
  load_checkpoint(generator, config.generator_checkpoint);

  SynthesisResources resources;
  resources.config = &config;
  resources.corpus = &corpus;
  resources.fonts = &fonts;
  resources.generator = &generator;

  struct RowResult {
    bool ok = false;
    std::string error;
    int instances = 0;
    std::set<std::string> classes;
  };
  std::vector<RowResult> rows(items.size());

  std::mutex queue_mutex;
  size_t next_item = 0;
  auto worker = [&] {
    while (true) {
      size_t index;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next_item >= items.size()) return;
        index = next_item++;
      }
      const BatchItem& item = items[index];
      RowResult& row = rows[index];
      try {
        RasterImage background = load_image(item.background_path);
        SemanticMap map = load_semantic_map(item.map_path, config.palette);
        uint64_t stream = derive_stream_seed(config.seed, item.stem);
        SynthesisOutput out = synthesize_one(background, map, resources, stream);
        fs::path image_out = fs::path(config.output_dir) / (item.stem + ".png");
        fs::path ann_out = fs::path(config.output_dir) / (item.stem + ".txt");
        save_png(out.image, image_out.string());
        out.record.image_path = image_out.string();
        write_annotations(out.record, ann_out.string());
        if (out.region_map) {
          fs::path dump =
              fs::path(config.output_dir) / (item.stem + ".regions.png");
          dump_region_map_png(*out.region_map, dump.string());
        }
        row.ok = true;
        row.instances = int(out.record.instances.size());
        for (const InstanceRecord& inst : out.record.instances)
          row.classes.insert(inst.semantic_class);
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };

  const int worker_count = std::max(1, config.workers);
  std::vector<std::thread> threads;
  for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();

  // Manifest rows in stem order, independent of scheduling.
  BatchSummary summary;
  fs::path manifest = fs::path(config.output_dir) / "manifest.tsv";
  std::ofstream mf(manifest, std::ios::binary | std::ios::trunc);
  if (!mf) throw IoError("cannot write manifest: " + manifest.string());
  for (size_t i = 0; i < items.size(); ++i) {
    const RowResult& row = rows[i];
    if (!row.ok) {
      summary.failed += 1;
      summary.failures.push_back(items[i].stem + ": " + row.error);
      continue;
    }
    summary.processed += 1;
    std::string classes;
    for (const auto& c : row.classes) classes += (classes.empty() ? "" : ",") + c;
    if (classes.empty()) classes = "-";
    mf << items[i].stem << '\t' << row.instances << '\t' << classes << '\n';
  }
  summary.manifest_path = manifest.string();
  return summary;
}

std::vector<TrainingSample> harvest_training_samples(
    const SynthesisConfig& config, int count) {
  std::vector<BatchItem> items = match_pairs(config);
  if (items.empty())
    throw IoError("no background/semantic-map pairs matched by stem");
  Corpus corpus = load_corpus(config.corpus);
  std::vector<Font> fonts;
  for (const std::string& path : list_font_files(config.fonts_dir))
    fonts.push_back(Font::load(path));

  const std::vector<uint32_t> alphabet = utf8_decode(config.alphabet);
  auto recognizable = [&](const std::string& text) {
    for (uint32_t cp : utf8_decode(text))
      if (std::find(alphabet.begin(), alphabet.end(), cp) != alphabet.end())
        return true;
    return false;
  };

  std::vector<TrainingSample> samples;
  for (const BatchItem& item : items) {
    if (int(samples.size()) >= count) break;
    RasterImage background;
    SemanticMap map;
    try {
      background = to_rgb(load_image(item.background_path));
      map = load_semantic_map(item.map_path, config.palette);
    } catch (const Error&) {
      continue;
    }
    if (background.width != map.width || background.height != map.height)
      continue;
    Rng rng(derive_stream_seed(config.seed ^ 0x7261696eull, item.stem));
    std::vector<CandidateRegion> pool =
        detect_candidates(background, map, config);
    int attempts = config.max_instances + config.retries;
    while (int(samples.size()) < count && attempts-- > 0 && !pool.empty()) {
      CandidateRegion candidate;
      draw_candidate(pool, rng, &candidate);
      std::string text = sample_instance_text(corpus, rng, config);
      if (text.empty() || !recognizable(text)) continue;
      const Font* font = pick_font(fonts, text, rng);
      if (!font) continue;
      try {
        TextMask mask = rasterize_text(text, *font, config.text_px_height);
        Homography h =
            random_homography(rng, candidate.region.bbox, config.max_perturb);
        PlaceOptions opts;
        opts.margins = config.margins;
        PlacedText placed = place_text(candidate, h, mask, background.width,
                                       background.height, opts);
        PixelBox box = crop_rect(candidate.region.bbox, placed.quad,
                                 background.width, background.height);
        TrainingSample sample;
        sample.x = crop_image(background, box);
        sample.m.width = box.width();
        sample.m.height = box.height();
        sample.m.mask.assign(size_t(box.width()) * box.height(), 0);
        for (int y = 0; y < box.height(); ++y)
          for (int x = 0; x < box.width(); ++x)
            sample.m.mask[size_t(y) * box.width() + x] =
                placed.warped_mask[size_t(box.y0 + y) * background.width +
                                   box.x0 + x];
        sample.m.transcript = placed.transcript;
        sample.m.px_height = mask.px_height;
        for (const Quad& cq : placed.char_quads) {
          PixelBox cb = cq.pixel_bbox();
          PixelBox local{
              std::clamp(cb.x0 - box.x0, 0, box.width() - 1),
              std::clamp(cb.y0 - box.y0, 0, box.height() - 1),
              std::clamp(cb.x1 - box.x0, 0, box.width() - 1),
              std::clamp(cb.y1 - box.y0, 0, box.height() - 1)};
          sample.m.char_boxes.push_back(local);
        }
        if (sample.m.set_pixel_count() == 0) continue;
        samples.push_back(std::move(sample));
      } catch (const Error&) {
        continue;
      }
    }
  }
  if (samples.empty())
    throw Error("harvest_training_samples: no placements succeeded");
  return samples;
}

}  // namespace textsynth
