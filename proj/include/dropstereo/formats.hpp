#pragma once

// File formats: binary PGM/PPM (8-bit), grayscale little-endian PFM and the
// correspondence CSV. Writers produce identical bytes for identical inputs.

#include "dropstereo/core.hpp"
#include "dropstereo/stereo.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace dropstereo {

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "' for reading");
  return f;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  return f;
}

// Next whitespace-separated header token, skipping '#' comments.
inline std::string header_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw FormatError("'" + path + "': truncated header");
  return tok;
}

inline int header_int(std::istream& in, const std::string& path) {
  const std::string t = header_token(in, path);
  int v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    throw FormatError("'" + path + "': bad header field '" + t + "'");
  return v;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(RasterGray::clamp01(v) * 255.0));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PGM / PPM

// Reads P5 or P6 with max value 255. Colour is reduced to Rec. 601 luma.
inline RasterGray read_pnm(const std::string& path) {
  auto in = detail::open_in(path);
  const std::string magic = detail::header_token(in, path);
  if (magic != "P5" && magic != "P6")
    throw FormatError("'" + path + "': unsupported PNM variant '" + magic + "'");
  const int w = detail::header_int(in, path), h = detail::header_int(in, path);
  const int maxval = detail::header_int(in, path);
  if (w <= 0 || h <= 0) throw FormatError("'" + path + "': bad image size");
  if (maxval != 255) throw FormatError("'" + path + "': only max value 255 is supported");
  const int ch = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * ch);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw FormatError("'" + path + "': truncated pixel data");
  RasterGray img(w, h);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const std::size_t k = (static_cast<std::size_t>(i) * w + j) * ch;
      const double v = ch == 1 ? buf[k]
                               : 0.299 * buf[k] + 0.587 * buf[k + 1] + 0.114 * buf[k + 2];
      img.set(i, j, v / 255.0);
    }
  return img;
}

inline void write_pgm(const std::string& path, const RasterGray& img) {
  auto out = detail::open_out(path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(img.width()) * img.height());
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j)
      buf[static_cast<std::size_t>(i) * img.width() + j] = detail::to_byte(img(i, j));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("'" + path + "': write failed");
}

// Gray replicated into three channels.
inline void write_ppm(const std::string& path, const RasterGray& img) {
  auto out = detail::open_out(path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> buf;
  buf.reserve(static_cast<std::size_t>(img.width()) * img.height() * 3);
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) {
      const auto b = detail::to_byte(img(i, j));
      buf.insert(buf.end(), {b, b, b});
    }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("'" + path + "': write failed");
}

// Writes by extension: .ppm as P6, anything else as P5.
inline void write_pnm(const std::string& path, const RasterGray& img) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0)
    write_ppm(path, img);
  else
    write_pgm(path, img);
}

inline void write_mask(const std::string& path, const DropMask& mask) {
  RasterGray img(mask.width(), mask.height(), 0.0);
  mask.for_each([&](int i, int j) { img.set(i, j, 1.0); });
  write_pgm(path, img);
}

// Any non-zero pixel is a member.
inline DropMask read_mask(const std::string& path) {
  const RasterGray img = read_pnm(path);
  Grid<std::uint8_t> g(img.width(), img.height(), 0);
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) g(i, j) = img(i, j) > 0.0 ? 1 : 0;
  try {
    return DropMask::from_membership(g);
  } catch (const DomainError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// PFM (grayscale, little-endian, rows stored bottom to top)

inline void write_pfm(const std::string& path, const Grid<float>& g) {
  static_assert(std::numeric_limits<float>::is_iec559);
  auto out = detail::open_out(path);
  out << "Pf\n" << g.width() << ' ' << g.height() << "\n-1.0\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(g.width()) * g.height() * 4);
  std::size_t k = 0;
  for (int i = g.height() - 1; i >= 0; --i)
    for (int j = 0; j < g.width(); ++j) {
      std::uint32_t bits;
      const float v = g(i, j);
      std::memcpy(&bits, &v, 4);
      for (int b = 0; b < 4; ++b) buf[k++] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("'" + path + "': write failed");
}

inline Grid<float> read_pfm(const std::string& path) {
  auto in = detail::open_in(path);
  const std::string magic = detail::header_token(in, path);
  if (magic == "PF") throw FormatError("'" + path + "': colour PFM is not supported");
  if (magic != "Pf") throw FormatError("'" + path + "': not a PFM file");
  const int w = detail::header_int(in, path), h = detail::header_int(in, path);
  if (w <= 0 || h <= 0) throw FormatError("'" + path + "': bad image size");
  const std::string st = detail::header_token(in, path);
  double scale = 0.0;
  auto [p, ec] = std::from_chars(st.data(), st.data() + st.size(), scale);
  if (ec != std::errc() || p != st.data() + st.size() || scale == 0.0)
    throw FormatError("'" + path + "': bad PFM scale '" + st + "'");
  if (scale > 0.0) throw FormatError("'" + path + "': big-endian PFM is not supported");
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw FormatError("'" + path + "': truncated pixel data");
  Grid<float> g(w, h, 0.0f);
  std::size_t k = 0;
  for (int i = h - 1; i >= 0; --i)
    for (int j = 0; j < w; ++j) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[k++]) << (8 * b);
      float v;
      std::memcpy(&v, &bits, 4);
      g(i, j) = v;
    }
  return g;
}

// Height field as a PFM: NaN outside the mask.
inline Grid<float> height_field_grid(const HeightField& hf) {
  Grid<float> g(hf.width(), hf.height(), std::numeric_limits<float>::quiet_NaN());
  hf.mask().for_each([&](int i, int j) { g(i, j) = static_cast<float>(hf(i, j)); });
  return g;
}

inline void write_height_field(const std::string& path, const HeightField& hf) {
  write_pfm(path, height_field_grid(hf));
}

// The mask is the set of finite pixels.
inline HeightField read_height_field(const std::string& path) {
  const Grid<float> g = read_pfm(path);
  Grid<std::uint8_t> m(g.width(), g.height(), 0);
  for (int i = 0; i < g.height(); ++i)
    for (int j = 0; j < g.width(); ++j) {
      if (std::isnan(g(i, j))) continue;
      if (!std::isfinite(g(i, j)) || g(i, j) < 0.0f)
        throw FormatError("'" + path + "': heights must be finite and >= 0");
      m(i, j) = 1;
    }
  DropMask mask;
  try {
    mask = DropMask::from_membership(m);
  } catch (const DomainError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  if (mask.empty()) throw FormatError("'" + path + "': height field has no finite pixels");
  HeightField hf(mask);
  mask.for_each([&](int i, int j) { hf.set(i, j, g(i, j)); });
  return hf;
}

// ---------------------------------------------------------------------------
// Correspondence CSV

inline constexpr const char* kCorrespondenceHeader = "drop_a,i_a,j_a,drop_b,i_b,j_b,score";

// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw FormatError("format_double: conversion failed");
  return std::string(buf, p);
}

inline void write_correspondences(const std::string& path, const std::vector<Correspondence>& cs) {
  auto out = detail::open_out(path);
  out << kCorrespondenceHeader << '\n';
  for (const auto& c : cs)
    out << c.drop_a << ',' << format_double(c.i_a) << ',' << format_double(c.j_a) << ','
        << c.drop_b << ',' << format_double(c.i_b) << ',' << format_double(c.j_b) << ','
        << format_double(c.score) << '\n';
  if (!out) throw FormatError("'" + path + "': write failed");
}

inline std::vector<Correspondence> read_correspondences(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCorrespondenceHeader)
    throw FormatError("'" + path + "': line 1: expected header '" +
                      std::string(kCorrespondenceHeader) + "'");
  std::vector<Correspondence> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    const std::string where = "'" + path + "': line " + std::to_string(lineno) + ": ";
    if (f.size() != 7)
      throw FormatError(where + "expected 7 fields, got " + std::to_string(f.size()));
    auto num = [&](const std::string& s, double& v) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw FormatError(where + "bad number '" + s + "'");
    };
    auto integer = [&](const std::string& s, int& v) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size() || v < 0)
        throw FormatError(where + "bad drop index '" + s + "'");
    };
    Correspondence c;
    integer(f[0], c.drop_a);
    num(f[1], c.i_a);
    num(f[2], c.j_a);
    integer(f[3], c.drop_b);
    num(f[4], c.i_b);
    num(f[5], c.j_b);
    num(f[6], c.score);
    if (c.score < 0.0 || c.score > 1.0) throw FormatError(where + "score outside [0, 1]");
    out.push_back(c);
  }
  return out;
}

}  // namespace dropstereo
