#include "proxskip/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace proxskip {

namespace fs = std::filesystem;
using nlohmann::json;

json geometry_to_json(ParallelGeometry const &g)
{
  return json{{"n_angles", g.n_angles()},
              {"angles", g.angles},
              {"n_bins", g.n_bins},
              {"bin_spacing", g.bin_spacing},
              {"pixel_size", g.pixel_size}};
}

ParallelGeometry geometry_from_json(json const &j)
{
  try {
    for (auto const &[key, _] : j.items()) {
      if (key != "n_angles" && key != "angles" && key != "n_bins" && key != "bin_spacing" && key != "pixel_size") {
        throw IoError("unknown geometry key '" + key + "'");
      }
    }
    auto const n_angles = j.at("n_angles").get<Index>();
    ParallelGeometry g = ParallelGeometry::uniform(n_angles, j.at("n_bins").get<Index>(), j.value("bin_spacing", 1.0),
                                                   j.value("pixel_size", 1.0));
    if (j.contains("angles")) {
      g.angles = j.at("angles").get<std::vector<double>>();
      if (g.n_angles() != n_angles) { throw IoError("geometry n_angles disagrees with the angle list"); }
    }
    g.validate();
    return g;
  } catch (json::exception const &e) {
    throw IoError(std::string("malformed geometry metadata: ") + e.what());
  } catch (ParameterError const &e) {
    throw IoError(std::string("invalid geometry metadata: ") + e.what());
  }
}

void write_raw_f64(std::ostream &os, std::span<double const> values)
{
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<char const *>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (double const v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) { bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu); }
      os.write(bytes, 8);
    }
  }
  if (!os) { throw IoError("failed writing raw payload"); }
}

void read_raw_f64(std::istream &is, std::span<double> values)
{
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char *>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (double &v : values) {
      unsigned char bytes[8];
      is.read(reinterpret_cast<char *>(bytes), 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) { bits |= std::uint64_t{bytes[b]} << (8 * b); }
      v = std::bit_cast<double>(bits);
    }
  }
  auto const got = is.gcount();
  if (!is || (std::endian::native == std::endian::little && static_cast<size_t>(got) != values.size_bytes())) {
    throw IoError("payload length mismatch: expected " + std::to_string(values.size_bytes()) + " bytes");
  }
}

namespace {

fs::path payload_path(fs::path const &meta) { return fs::path(meta.string() + ".raw"); }

void write_payload(fs::path const &meta, std::span<double const> values)
{
  std::ofstream f(payload_path(meta), std::ios::binary | std::ios::trunc);
  if (!f) { throw IoError("cannot open " + payload_path(meta).string() + " for writing"); }
  write_raw_f64(f, values);
}

void write_meta(fs::path const &path, json const &meta)
{
  std::ofstream f(path, std::ios::trunc);
  if (!f) { throw IoError("cannot open " + path.string() + " for writing"); }
  f << meta.dump(2) << '\n';
  if (!f) { throw IoError("failed writing " + path.string()); }
}

json read_meta(fs::path const &path, std::string const &kind)
{
  std::ifstream f(path);
  if (!f) { throw IoError("cannot open " + path.string()); }
  json meta;
  try {
    f >> meta;
  } catch (json::exception const &e) {
    throw IoError("malformed metadata in " + path.string() + ": " + e.what());
  }
  if (!meta.is_object() || meta.value("kind", std::string()) != kind) {
    throw IoError(path.string() + " is not a " + kind + " metadata file");
  }
  if (meta.value("dtype", std::string("float64-le")) != "float64-le") { throw IoError("unsupported payload dtype"); }
  return meta;
}

void read_payload(fs::path const &meta_path, json const &meta, std::span<double> values)
{
  fs::path payload = meta.value("payload", payload_path(meta_path).filename().string());
  if (payload.is_relative()) { payload = meta_path.parent_path() / payload; }
  std::ifstream f(payload, std::ios::binary);
  if (!f) { throw IoError("cannot open payload " + payload.string()); }
  f.seekg(0, std::ios::end);
  auto const size = static_cast<size_t>(f.tellg());
  f.seekg(0, std::ios::beg);
  if (size != values.size_bytes()) {
    throw IoError("payload length mismatch in " + payload.string() + ": expected " + std::to_string(values.size_bytes()) +
                  " bytes, found " + std::to_string(size));
  }
  read_raw_f64(f, values);
}

} // namespace

void save_image(fs::path const &path, Image const &image)
{
  write_payload(path, std::span<double const>(image.data(), static_cast<size_t>(image.size())));
  write_meta(path, json{{"kind", "image"},
                        {"width", image.cols()},
                        {"height", image.rows()},
                        {"dtype", "float64-le"},
                        {"payload", payload_path(path).filename().string()}});
}

Image load_image(fs::path const &path)
{
  json const meta = read_meta(path, "image");
  Index w = 0;
  Index h = 0;
  try {
    w = meta.at("width").get<Index>();
    h = meta.at("height").get<Index>();
  } catch (json::exception const &e) {
    throw IoError("malformed image metadata in " + path.string() + ": " + e.what());
  }
  if (w < 1 || h < 1) { throw IoError("image dimensions must be positive"); }
  Image image(h, w);
  read_payload(path, meta, std::span<double>(image.data(), static_cast<size_t>(image.size())));
  return image;
}

void save_sinogram(fs::path const &path, Sinogram const &sino)
{
  write_payload(path, std::span<double const>(sino.values.data(), static_cast<size_t>(sino.values.size())));
  write_meta(path, json{{"kind", "sinogram"},
                        {"geometry", geometry_to_json(sino.geometry)},
                        {"dtype", "float64-le"},
                        {"payload", payload_path(path).filename().string()}});
}

Sinogram load_sinogram(fs::path const &path)
{
  json const meta = read_meta(path, "sinogram");
  if (!meta.contains("geometry")) { throw IoError("sinogram metadata lacks a geometry block"); }
  Sinogram sino(geometry_from_json(meta.at("geometry")));
  read_payload(path, meta, std::span<double>(sino.values.data(), static_cast<size_t>(sino.values.size())));
  return sino;
}

void save_pgm(fs::path const &path, Image const &image)
{
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) { throw IoError("cannot open " + path.string() + " for writing"); }
  f << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  double const lo = image.minCoeff();
  double const hi = image.maxCoeff();
  double const span = hi - lo;
  for (Index k = 0; k < image.size(); ++k) {
    double const v = span > 0.0 ? (image.data()[k] - lo) / span : 0.0;
    f.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
  }
  if (!f) { throw IoError("failed writing " + path.string()); }
}

} // namespace proxskip
