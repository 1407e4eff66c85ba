#include "lsilt/io.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include "json.hpp"
#include <sstream>

#include "lsilt/binary_io.hpp"

namespace lsilt {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidArgument("write failed for " + path.string());
}

}  // namespace detail

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::write_file(path, {text.begin(), text.end()});
}

// ---------------------------------------------------------------------------
// DVLF1

namespace {
constexpr char kFieldMagic[] = "DVLF1";
}

std::vector<std::uint8_t> encode_field(const ScalarField& field) {
  detail::ByteWriter w;
  w.bytes(kFieldMagic, sizeof(kFieldMagic));
  w.u32(static_cast<std::uint32_t>(field.width()));
  w.u32(static_cast<std::uint32_t>(field.height()));
  for (const double v : field) w.f64(v);
  return std::move(w.buffer());
}

ScalarField decode_field(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kFieldMagic, sizeof(kFieldMagic));
  const std::uint32_t w = r.u32("width");
  const std::uint32_t h = r.u32("height");
  const std::uint64_t payload = 8ull * w * h;
  const std::uint64_t expected = r.offset() + payload;
  if (bytes.size() != expected) {
    throw FormatError("field of " + std::to_string(w) + "x" + std::to_string(h) + " needs " +
                          std::to_string(expected) + " bytes, file has " + std::to_string(bytes.size()),
                      std::min<std::size_t>(bytes.size(), static_cast<std::size_t>(expected)));
  }
  ScalarField out(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : out) v = r.f64("value");
  return out;
}

void dump_field(const std::filesystem::path& path, const ScalarField& field) {
  detail::write_file(path, encode_field(field));
}

ScalarField load_field(const std::filesystem::path& path) { return decode_field(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// PGM

std::string encode_pgm(const BinaryGrid& mask) {
  std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  out.reserve(out.size() + mask.size());
  for (const auto v : mask) out.push_back(static_cast<char>(v ? 255 : 0));
  return out;
}

void write_pgm(const std::filesystem::path& path, const BinaryGrid& mask) { write_text(path, encode_pgm(mask)); }

BinaryGrid decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) throw FormatError(std::string("PGM ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("PGM header: missing ") + what, start);
    return static_cast<int>(value);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("expected PGM magic \"P5\"", 0);
  pos = 2;
  const int w = number("width");
  const int h = number("height");
  const int maxval = number("maxval");
  if (maxval <= 0 || maxval > 255) throw FormatError("only 8-bit PGM is supported", pos);
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h;
  if (bytes.size() < pos + need) {
    throw FormatError("PGM raster truncated: expected " + std::to_string(need) + " bytes", bytes.size());
  }
  BinaryGrid out(w, h);
  for (std::size_t i = 0; i < need; ++i) out[i] = static_cast<unsigned char>(bytes[pos + i]) >= 128 ? 1 : 0;
  return out;
}

BinaryGrid read_pgm(const std::filesystem::path& path) { return decode_pgm(read_text(path)); }

// ---------------------------------------------------------------------------
// PNG

void write_png(const std::filesystem::path& path, const BinaryGrid& mask, const BinaryGrid* target) {
  if (target) require_same_shape(mask, *target, "write_png");
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw InvalidArgument("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw InvalidArgument("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InvalidArgument("PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, mask.width(), mask.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(mask.width()) * 3);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      png_byte r = mask(x, y) ? 255 : 0;
      png_byte g = r;
      png_byte b = r;
      if (target && (*target)(x, y)) {
        const bool edge = x == 0 || y == 0 || x == mask.width() - 1 || y == mask.height() - 1 ||
                          !(*target)(x - 1, y) || !(*target)(x + 1, y) || !(*target)(x, y - 1) ||
                          !(*target)(x, y + 1);
        if (edge) {
          r = 255;
          g = 0;
          b = 0;
        }
      }
      row[3 * x] = r;
      row[3 * x + 1] = g;
      row[3 * x + 2] = b;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------------------
// Layouts

namespace {

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

bool parse_int(std::istringstream& in, long long& out) {
  std::string token;
  if (!(in >> token)) return false;
  std::size_t used = 0;
  try {
    out = std::stoll(token, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == token.size();
}

}  // namespace

LayoutSpec parse_layout_spec(const std::string& text, int side_override) {
  LayoutSpec layout;
  std::istringstream lines(text);
  std::string raw;
  int line_no = 0;
  std::vector<std::pair<Rect, int>> rects;
  while (std::getline(lines, raw)) {
    ++line_no;
    std::istringstream in(strip_comment(raw));
    std::string keyword;
    if (!(in >> keyword)) continue;
    if (keyword == "SIZE") {
      long long n = 0;
      if (!parse_int(in, n) || n <= 0 || n > 65536) throw ParseError("SIZE expects one positive integer", line_no);
      layout.tile_side = static_cast<int>(n);
    } else if (keyword == "RECT") {
      long long v[4];
      for (auto& x : v) {
        if (!parse_int(in, x)) throw ParseError("RECT expects four integers: x y w h", line_no);
      }
      if (v[2] <= 0 || v[3] <= 0) throw ParseError("RECT width and height must be positive", line_no);
      if (std::abs(v[0]) > 1'000'000'000 || std::abs(v[1]) > 1'000'000'000 || v[2] > 1'000'000'000 ||
          v[3] > 1'000'000'000) {
        throw ParseError("RECT coordinates out of range", line_no);
      }
      rects.push_back({Rect{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                            static_cast<int>(v[3])},
                       line_no});
    } else {
      throw ParseError("unknown keyword \"" + keyword + "\"", line_no);
    }
    std::string extra;
    if (in >> extra) throw ParseError("unexpected trailing token \"" + extra + "\"", line_no);
  }
  if (side_override > 0) layout.tile_side = side_override;
  for (const auto& [r, line] : rects) {
    if (r.x < 0 || r.y < 0 || static_cast<long long>(r.x) + r.w > layout.tile_side ||
        static_cast<long long>(r.y) + r.h > layout.tile_side) {
      throw InvalidArgument("line " + std::to_string(line) + ": RECT lies outside the " +
                            std::to_string(layout.tile_side) + " tile");
    }
    layout.rects.push_back(r);
  }
  if (layout.rects.empty()) layout.warnings.push_back("layout has no rectangles; target is empty");
  return layout;
}

BinaryGrid rasterize(const LayoutSpec& layout) {
  BinaryGrid out(layout.tile_side, layout.tile_side);
  for (const auto& r : layout.rects) {
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) out(x, y) = 1;
    }
  }
  return out;
}

BinaryGrid parse_layout(const std::string& text, int side_override) {
  return rasterize(parse_layout_spec(text, side_override));
}

BinaryGrid load_layout(const std::filesystem::path& path, int side_override, std::vector<std::string>* warnings) {
  const std::string text = read_text(path);
  if (text.size() >= 2 && text[0] == 'P' && text[1] == '5') {
    BinaryGrid grid = decode_pgm(text);
    if (side_override > 0 && (grid.width() != side_override || grid.height() != side_override)) {
      throw InvalidArgument(path.string() + " is " + std::to_string(grid.width()) + "x" +
                            std::to_string(grid.height()) + ", expected " + std::to_string(side_override));
    }
    return grid;
  }
  LayoutSpec layout = parse_layout_spec(text, side_override);
  if (warnings) warnings->insert(warnings->end(), layout.warnings.begin(), layout.warnings.end());
  return rasterize(layout);
}

// ---------------------------------------------------------------------------
// Config

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream lines(text);
  std::string raw;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(lines, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected \"key = value\"", line_no);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError("expected \"key = value\"", line_no);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

namespace {

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size()) throw InvalidArgument("config key " + key + ": \"" + value + "\" is not a number");
  return v;
}

int to_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size()) throw InvalidArgument("config key " + key + ": \"" + value + "\" is not an integer");
  return static_cast<int>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw InvalidArgument("config key " + key + ": \"" + value + "\" is not a boolean");
}

}  // namespace

bool apply_config_value(const std::string& key, const std::string& value, OptConfig& cfg) {
  if (key == "alpha") cfg.alpha = to_double(key, value);
  else if (key == "beta") cfg.beta = to_double(key, value);
  else if (key == "lambda") cfg.lambda = to_double(key, value);
  else if (key == "sigma_z") cfg.sigma_z = to_double(key, value);
  else if (key == "I_th" || key == "i_th") cfg.I_th = to_double(key, value);
  else if (key == "epsilon") cfg.epsilon = to_double(key, value);
  else if (key == "eta") cfg.eta = to_double(key, value);
  else if (key == "D_u" || key == "d_u") cfg.D_u = to_double(key, value);
  else if (key == "D_l" || key == "d_l") cfg.D_l = to_double(key, value);
  else if (key == "max_iters") cfg.max_iters = to_int(key, value);
  else if (key == "stop_rel_tol") cfg.stop_rel_tol = to_double(key, value);
  else if (key == "stop_patience") cfg.stop_patience = to_int(key, value);
  else if (key == "use_curvature") cfg.use_curvature = to_bool(key, value);
  else if (key == "grid_side") cfg.grid_side = to_int(key, value);
  else if (key == "dose_nominal") cfg.dose_nominal = to_double(key, value);
  else if (key == "dose_outer") cfg.dose_outer = to_double(key, value);
  else if (key == "dose_inner") cfg.dose_inner = to_double(key, value);
  else return false;
  return true;
}

void apply_config_text(const std::string& text, OptConfig& cfg) {
  int index = 0;
  for (const auto& [key, value] : parse_key_values(text)) {
    ++index;
    if (!apply_config_value(key, value, cfg)) throw ParseError("unknown config key \"" + key + "\"", index);
  }
}

// ---------------------------------------------------------------------------
// Reports

std::string loss_csv(const std::vector<LossRecord>& history) {
  std::string out = "iter,L_ilt,L_pvb,L_DSO,dt,max_v\n";
  char buf[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& r = history[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, r.l_ilt, r.l_pvb, r.l_dso, r.dt,
                  r.max_v);
    out += buf;
  }
  return out;
}

std::string metrics_json(const MetricsReport& report, int iters) {
  nlohmann::ordered_json j;
  j["l2"] = report.l2;
  j["pvband"] = report.pvband;
  j["shots"] = report.shots;
  j["wall_time_s"] = report.wall_time;
  j["iters"] = iters;
  return j.dump(2) + "\n";
}

}  // namespace lsilt
