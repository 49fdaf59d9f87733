// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>

#include "spatialcot/errors.hpp"
#include "spatialcot/pipeline.hpp"
#include "spatialcot/raster_io.hpp"
#include "spatialcot/rng.hpp"

namespace spatialcot {

namespace {

constexpr std::array<const char*, 8> kColors = {"red", "blue", "green", "white", "black", "yellow", "wooden", "gray"};
constexpr std::array<const char*, 10> kNouns = {"chair", "table", "lamp", "sofa", "plant",
                                                "cabinet", "monitor", "box", "vase", "bookshelf"};
constexpr int kTrajectoryFrames = 10;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

bool every(std::size_t n, std::size_t k) { return n != 0 && k % n == 0; }

}  // namespace

std::filesystem::path write_synthetic_manifest(const std::filesystem::path& dir, const SyntheticOptions& opt) {
  if (opt.width < 16 || opt.height < 8) throw ConfigurationError("synthetic scenes need at least 16x8 pixels");
  std::filesystem::create_directories(dir);
  Manifest manifest;
  manifest.root = dir;
  const int w = opt.width;
  const int h = opt.height;
  const CameraIntrinsics intr{w * 0.9, w * 0.9, w / 2.0, h / 2.0, w, h};
  const auto& labels = AdmissionLabelSet::builtin().labels();

  for (std::size_t i = 0; i < opt.scenes; ++i) {
    const std::size_t k = i + 1;
    Rng rng(derive_seed(opt.seed, i));
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05zu", i);
    const std::filesystem::path sub(name);
    std::filesystem::create_directories(dir / sub);

    SceneEntry scene;
    scene.id = name;
    const std::size_t objects = every(opt.single_object_every, k) ? 1 : 2 + rng.index(3);
    std::vector<std::size_t> nouns(kNouns.size());
    for (std::size_t n = 0; n < nouns.size(); ++n) nouns[n] = n;
    rng.shuffle(nouns);

    DepthMap depth(w, h);
    SegmentationMask mask(w, h);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) depth.set(u, v, 4.0 + 0.01 * v);
    }
    // Objects sit in disjoint column strips so each keeps its pixels.
    const int strip = w / static_cast<int>(objects);
    for (std::size_t o = 0; o < objects; ++o) {
      const auto id = static_cast<ObjectId>(o + 1);
      scene.objects[id] = std::string(kColors[rng.index(kColors.size())]) + " " + kNouns[nouns[o]];
      const int bw = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, strip - 3))));
      const int bh = 3 + static_cast<int>(rng.index(static_cast<std::size_t>(h - 4)));
      const int u0 = static_cast<int>(o) * strip + static_cast<int>(rng.index(static_cast<std::size_t>(strip - bw + 1)));
      const int v0 = static_cast<int>(rng.index(static_cast<std::size_t>(h - bh + 1)));
      const double z = 0.4 + 3.0 * rng.uniform();
      for (int v = v0; v < v0 + bh; ++v) {
        for (int u = u0; u < std::min(w, u0 + bw); ++u) {
          depth.set(u, v, z + 0.013 * (u - u0) + 0.007 * (v - v0));
          mask.set(u, v, id);
        }
      }
    }
    mask.descriptions = scene.objects;
    write_depth_png(dir / sub / "depth.png", depth);
    write_mask_png(dir / sub / "mask.png", mask);

    auto frame_image = [&](int shift) {
      GrayImage img{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          const double base = std::clamp(1.0 - depth.at((u + shift) % w, v) / 5.0, 0.0, 1.0);
          img.pixels[static_cast<std::size_t>(v) * w + u] = base;
        }
      }
      return img;
    };

    if (every(opt.multi_view_every, k)) {
      std::string lpips;
      for (int f = 0; f < kTrajectoryFrames; ++f) {
        const std::string file = "frame_" + std::to_string(f) + ".png";
        write_gray_png(dir / sub / file, frame_image(f));
        scene.views.push_back({name + std::string("_f") + std::to_string(f), (sub / file).string(),
                               (sub / "depth.png").string(), (sub / "mask.png").string(), intr});
        for (int g = f + 1; g < kTrajectoryFrames; ++g) {
          char line[96];
          std::snprintf(line, sizeof line, "%s_f%d %s_f%d %.2f\n", name, f, name, g, 0.08 * (g - f));
          lpips += line;
        }
      }
      write_text(dir / sub / "lpips.txt", lpips);
      scene.lpips_scores = (sub / "lpips.txt").string();
    } else {
      write_gray_png(dir / sub / "image.png", frame_image(0));
      const std::string view_id = name;
      scene.views.push_back({view_id, (sub / "image.png").string(), (sub / "depth.png").string(),
                             (sub / "mask.png").string(), intr});
      std::vector<std::size_t> positive;
      std::vector<std::size_t> negative;
      for (std::size_t l = 0; l < labels.size(); ++l) (labels[l].positive ? positive : negative).push_back(l);
      const auto& pool = every(opt.reject_every, k) ? negative : positive;
      const std::size_t top = pool[rng.index(pool.size())];
      std::string row = view_id;
      for (std::size_t l = 0; l < labels.size(); ++l) {
        char num[32];
        std::snprintf(num, sizeof num, " %.4f", l == top ? 0.31 : 0.1 + 0.15 * rng.uniform());
        row += num;
      }
      write_text(dir / sub / "labels.txt", row + "\n");
      scene.label_scores = (sub / "labels.txt").string();
    }
    manifest.scenes.push_back(std::move(scene));
  }
  const auto path = dir / "manifest.json";
  write_text(path, manifest.to_json());
  return path;
}

}  // namespace spatialcot
