#include "m3d/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "m3d/errors.hpp"

static_assert(std::endian::native == std::endian::little, "PNG and PFM paths assume little-endian");

namespace m3d {
namespace fs = std::filesystem;
namespace {

[[noreturn]] void io_fail(const fs::path& path, const std::string& what) {
  throw IoError(path.string() + ": " + what);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode) {
  File f(std::fopen(path.string().c_str(), mode));
  if (!f) io_fail(path, std::string("cannot open (") + std::strerror(errno) + ")");
  return f;
}

std::string next_token(std::istream& in) {
  std::string tok;
  in >> tok;
  return tok;
}

}  // namespace

// ---------------------------------------------------------------- PFM

void write_pfm(const fs::path& path, const FloatImage& img) {
  if (img.channels != 1 && img.channels != 3) io_fail(path, "PFM needs 1 or 3 channels");
  if (img.data.size() != static_cast<std::size_t>(img.height) * img.width * img.channels) {
    io_fail(path, "PFM data size mismatch");
  }
  std::ostringstream head;
  head << (img.channels == 3 ? "PF" : "Pf") << '\n' << img.width << ' ' << img.height << '\n'
       << "-1\n";
  const std::string h = head.str();
  auto f = open_file(path, "wb");
  std::fwrite(h.data(), 1, h.size(), f.get());
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<unsigned char> buf(row * 4);
  // PFM stores the bottom row first; samples are little-endian.
  for (int i = img.height - 1; i >= 0; --i) {
    for (std::size_t k = 0; k < row; ++k) {
      auto bits = std::bit_cast<std::uint32_t>(img.data[static_cast<std::size_t>(i) * row + k]);
      for (int b = 0; b < 4; ++b) buf[k * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size()) io_fail(path, "write failed");
  }
  if (std::fflush(f.get()) != 0) io_fail(path, "write failed");
}

FloatImage read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  FloatImage img;
  const std::string magic = next_token(in);
  if (magic == "PF") {
    img.channels = 3;
  } else if (magic == "Pf") {
    img.channels = 1;
  } else {
    io_fail(path, "not a PFM file");
  }
  double scale = 0.0;
  if (!(in >> img.width >> img.height >> scale) || img.width <= 0 || img.height <= 0 || scale == 0.0) {
    io_fail(path, "bad PFM header");
  }
  in.get();  // the single whitespace byte ending the header
  const bool little = scale < 0.0;
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  img.data.resize(row * img.height);
  std::vector<unsigned char> buf(row * 4);
  for (int i = img.height - 1; i >= 0; --i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      io_fail(path, "truncated PFM data");
    }
    for (std::size_t k = 0; k < row; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const int shift = little ? 8 * b : 8 * (3 - b);
        bits |= static_cast<std::uint32_t>(buf[k * 4 + b]) << shift;
      }
      img.data[static_cast<std::size_t>(i) * row + k] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

void write_pfm(const fs::path& path, const ScalarField& f) {
  FloatImage img{f.height(), f.width(), 1, {}};
  img.data.reserve(f.values().size());
  for (double v : f.values()) img.data.push_back(static_cast<float>(v));
  write_pfm(path, img);
}

ScalarField read_pfm_field(const fs::path& path) {
  const FloatImage img = read_pfm(path);
  if (img.channels != 1) io_fail(path, "expected a single-channel PFM");
  return ScalarField(img.height, img.width, std::vector<double>(img.data.begin(), img.data.end()));
}

void write_depth_pfm(const fs::path& path, const DepthMap& d) {
  write_pfm(path, ScalarField(d.height(), d.width(),
                              std::vector<double>(d.values().begin(), d.values().end())));
}

DepthMap read_depth_pfm(const fs::path& path) {
  const ScalarField f = read_pfm_field(path);
  return DepthMap::from_values(f.height(), f.width(),
                               std::vector<double>(f.values().begin(), f.values().end()));
}

// ---------------------------------------------------------------- PNG

namespace {

struct PngReadState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadState() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWriteState {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteState() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

PngImage read_png(const fs::path& path) {
  auto f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) io_fail(path, "not a PNG file");

  std::string err;
  PngReadState st;
  st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!st.png) io_fail(path, "libpng init failed");
  st.info = png_create_info_struct(st.png);
  if (!st.info) io_fail(path, "libpng init failed");

  PngImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> raw;
  if (setjmp(png_jmpbuf(st.png))) io_fail(path, "corrupt PNG (" + err + ")");
  png_init_io(st.png, f.get());
  png_set_sig_bytes(st.png, 8);
  png_read_info(st.png, st.info);

  const int color = png_get_color_type(st.png, st.info);
  int depth = png_get_bit_depth(st.png, st.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(st.png);
  if (png_get_valid(st.png, st.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(st.png);
  if (depth == 16) png_set_swap(st.png);  // host order on little-endian hosts
  png_read_update_info(st.png, st.info);

  img.width = static_cast<int>(png_get_image_width(st.png, st.info));
  img.height = static_cast<int>(png_get_image_height(st.png, st.info));
  img.channels = png_get_channels(st.png, st.info);
  depth = png_get_bit_depth(st.png, st.info);
  img.bit_depth = depth;
  const std::size_t rowbytes = png_get_rowbytes(st.png, st.info);
  raw.resize(rowbytes * img.height);
  rows.resize(img.height);
  for (int i = 0; i < img.height; ++i) rows[i] = raw.data() + rowbytes * i;
  png_read_image(st.png, rows.data());
  png_read_end(st.png, nullptr);

  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.samples.resize(n);
  if (depth == 16) {
    for (std::size_t k = 0; k < n; ++k) {
      std::uint16_t v;
      std::memcpy(&v, raw.data() + 2 * k, 2);
      img.samples[k] = v;
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) img.samples[k] = raw[k];
  }
  return img;
}

void write_png(const fs::path& path, const PngImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16) io_fail(path, "PNG bit depth must be 8 or 16");
  int color = 0;
  switch (img.channels) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 2: color = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGBA; break;
    default: io_fail(path, "PNG needs 1-4 channels");
  }
  const std::size_t per_row = static_cast<std::size_t>(img.width) * img.channels;
  if (img.samples.size() != per_row * img.height) io_fail(path, "PNG sample count mismatch");

  std::vector<unsigned char> raw(per_row * img.height * (img.bit_depth / 8));
  for (std::size_t k = 0; k < img.samples.size(); ++k) {
    if (img.bit_depth == 8) {
      raw[k] = static_cast<unsigned char>(std::min<std::uint16_t>(img.samples[k], 255));
    } else {
      raw[2 * k] = static_cast<unsigned char>(img.samples[k] >> 8);  // PNG is big-endian
      raw[2 * k + 1] = static_cast<unsigned char>(img.samples[k] & 0xFF);
    }
  }

  auto f = open_file(path, "wb");
  std::string err;
  PngWriteState st;
  st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!st.png) io_fail(path, "libpng init failed");
  st.info = png_create_info_struct(st.png);
  if (!st.info) io_fail(path, "libpng init failed");
  std::vector<png_bytep> rows(img.height);
  const std::size_t rowbytes = per_row * (img.bit_depth / 8);
  for (int i = 0; i < img.height; ++i) rows[i] = raw.data() + rowbytes * i;
  if (setjmp(png_jmpbuf(st.png))) io_fail(path, "PNG write failed (" + err + ")");
  png_init_io(st.png, f.get());
  png_set_IHDR(st.png, st.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), img.bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(st.png, st.info);
  png_write_image(st.png, rows.data());
  png_write_end(st.png, nullptr);
  if (std::fflush(f.get()) != 0) io_fail(path, "write failed");
}

ImagePlane read_image(const fs::path& path) {
  const PngImage png = read_png(path);
  const int color_channels = png.channels <= 2 ? 1 : 3;
  const double maxv = png.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(png.width) * png.height * color_channels);
  for (std::size_t p = 0; p < static_cast<std::size_t>(png.width) * png.height; ++p) {
    for (int c = 0; c < color_channels; ++c) data.push_back(png.samples[p * png.channels + c] / maxv);
  }
  return ImagePlane(png.height, png.width, color_channels, std::move(data));
}

namespace {
std::uint16_t to8(double v) { return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }
}  // namespace

void write_image(const fs::path& path, const ImagePlane& img) {
  PngImage png{img.height(), img.width(), img.channels(), 8, {}};
  png.samples.reserve(img.data().size());
  for (double v : img.data()) png.samples.push_back(to8(v));
  write_png(path, png);
}

ImagePlane quantize8(const ImagePlane& img) {
  std::vector<double> data;
  data.reserve(img.data().size());
  for (double v : img.data()) data.push_back(to8(v) / 255.0);
  return ImagePlane(img.height(), img.width(), img.channels(), std::move(data));
}

DepthMap read_depth_png16(const fs::path& path, double units_per_count) {
  const PngImage png = read_png(path);
  if (png.channels != 1 || png.bit_depth != 16) io_fail(path, "expected a 16-bit gray PNG");
  std::vector<double> v(png.samples.size());
  std::vector<std::uint8_t> ok(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    ok[k] = png.samples[k] != 0;
    v[k] = ok[k] ? png.samples[k] * units_per_count : 0.0;
  }
  return DepthMap(png.height, png.width, std::move(v), std::move(ok));
}

void write_depth_png16(const fs::path& path, const DepthMap& d, double units_per_count) {
  PngImage png{d.height(), d.width(), 1, 16, {}};
  png.samples.resize(d.values().size());
  for (int i = 0; i < d.height(); ++i) {
    for (int j = 0; j < d.width(); ++j) {
      const auto k = static_cast<std::size_t>(i) * d.width() + j;
      if (!d.valid(i, j)) continue;
      const double c = std::round(d(i, j) / units_per_count);
      if (c > 65535.0) {
        throw IoError(path.string() + ": depth " + format_double(d(i, j)) + " exceeds the 16-bit range");
      }
      // Tiny positive depths stay valid.
      png.samples[k] = static_cast<std::uint16_t>(std::max(c, 1.0));
    }
  }
  write_png(path, png);
}

void write_mask_png(const fs::path& path, const BinaryMask& m) {
  PngImage png{m.height(), m.width(), 1, 8, {}};
  for (auto b : m.bits()) png.samples.push_back(b ? 255 : 0);
  write_png(path, png);
}

BinaryMask read_mask_png(const fs::path& path) {
  const PngImage png = read_png(path);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(png.width) * png.height);
  for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = png.samples[p * png.channels] != 0;
  return BinaryMask(png.height, png.width, std::move(bits));
}

// ---------------------------------------------------------------- PLY

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_ply(const fs::path& path, const std::vector<Vec3>& points) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(points.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const Vec3& p : points) {
    out += format_double(p.x()) + ' ' + format_double(p.y()) + ' ' + format_double(p.z()) + '\n';
  }
  write_text(path, out);
}

std::vector<Vec3> read_ply(const fs::path& path) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "ply") io_fail(path, "not a PLY file");
  std::size_t count = 0;
  bool ascii = false, in_vertex = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (key == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      // Other elements (faces etc.) follow the vertices and are ignored.
      if (in_vertex && !(ls >> count)) io_fail(path, "bad vertex count");
    } else if (key == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") io_fail(path, "list properties on vertices are not supported");
      props.push_back(name);
    } else if (key == "end_header") {
      break;
    }
  }
  if (!ascii) io_fail(path, "only ASCII PLY is supported");
  const auto find = [&](const char* n) {
    const auto it = std::find(props.begin(), props.end(), n);
    if (it == props.end()) io_fail(path, std::string("missing vertex property ") + n);
    return static_cast<std::size_t>(it - props.begin());
  };
  const std::size_t ix = find("x"), iy = find("y"), iz = find("z");
  std::vector<Vec3> pts;
  pts.reserve(count);
  std::vector<double> vals(props.size());
  for (std::size_t k = 0; k < count; ++k) {
    for (double& v : vals) {
      if (!(in >> v)) io_fail(path, "truncated vertex data");
    }
    pts.emplace_back(vals[ix], vals[iy], vals[iz]);
  }
  return pts;
}

// ---------------------------------------------------------------- CSV / text

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) { add_row(header); }

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw InvalidArgument("CsvWriter: wrong number of cells");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) text_ += ',';
    const bool quote = cells[k].find_first_of(",\"\n") != std::string::npos;
    if (!quote) {
      text_ += cells[k];
      continue;
    }
    text_ += '"';
    for (char c : cells[k]) {
      if (c == '"') text_ += '"';
      text_ += c;
    }
    text_ += '"';
  }
  text_ += '\n';
}

void CsvWriter::add_row(const std::string& label, const std::vector<double>& values) {
  std::vector<std::string> cells{label};
  for (double v : values) cells.push_back(format_double(v));
  add_row(cells);
}

std::string CsvWriter::str() const { return text_; }

void CsvWriter::write(const fs::path& path) const { write_text(path, text_); }

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_file(path, "wb");
  if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size() || std::fflush(f.get()) != 0) {
    io_fail(path, "write failed");
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace m3d
