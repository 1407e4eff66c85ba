#pragma once

// File formats: DVLF1 field dumps, PGM (P5) masks, PNG previews, rectangle
// layouts, "key = value" run configs, loss CSV and metrics JSON.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lsilt/config.hpp"
#include "lsilt/fields.hpp"
#include "lsilt/metrics.hpp"
#include "lsilt/optimizer.hpp"

namespace lsilt {

/// DVLF1: "DVLF1\0", u32 width, u32 height, width*height f64 row-major, little-endian.
std::vector<std::uint8_t> encode_field(const ScalarField& field);
ScalarField decode_field(const std::vector<std::uint8_t>& bytes);
void dump_field(const std::filesystem::path& path, const ScalarField& field);
ScalarField load_field(const std::filesystem::path& path);

/// Binary mask as 8-bit P5, lit pixels 255.
void write_pgm(const std::filesystem::path& path, const BinaryGrid& mask);
std::string encode_pgm(const BinaryGrid& mask);
/// Any 8-bit P5 image, thresholded at >= 128.
BinaryGrid decode_pgm(const std::string& bytes);
BinaryGrid read_pgm(const std::filesystem::path& path);

/// RGB preview: mask in white, target outline (if given) in red.
void write_png(const std::filesystem::path& path, const BinaryGrid& mask, const BinaryGrid* target = nullptr);

inline constexpr int kDefaultTileSide = 2048;

struct LayoutSpec {
  int tile_side = kDefaultTileSide;
  std::vector<Rect> rects;  // nm, one pixel per nm
  std::vector<std::string> warnings;
};

/// Lines of "SIZE n" and "RECT x y w h"; '#' starts a comment.
/// `side_override` (> 0) replaces the SIZE header.
LayoutSpec parse_layout_spec(const std::string& text, int side_override = 0);
/// Pixel (px, py) is lit iff its center lies inside some rect.
BinaryGrid rasterize(const LayoutSpec& layout);
BinaryGrid parse_layout(const std::string& text, int side_override = 0);
/// Text layout or P5 raster, chosen by content.
BinaryGrid load_layout(const std::filesystem::path& path, int side_override = 0,
                       std::vector<std::string>* warnings = nullptr);

/// "key = value" lines in file order; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
/// Applies "key = value" lines onto `cfg`. Unknown keys are a ParseError.
void apply_config_text(const std::string& text, OptConfig& cfg);
/// Single key assignment; returns false for keys that are not optimizer settings.
bool apply_config_value(const std::string& key, const std::string& value, OptConfig& cfg);

/// Columns: iter,L_ilt,L_pvb,L_DSO,dt,max_v.
std::string loss_csv(const std::vector<LossRecord>& history);
/// {"l2", "pvband", "shots", "wall_time_s", "iters"}.
std::string metrics_json(const MetricsReport& report, int iters);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lsilt
