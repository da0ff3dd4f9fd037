#pragma once

#include "proxskip/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <span>

namespace proxskip {

// On-disk format: a JSON metadata file plus a raw little-endian float64
// payload stored next to it (metadata name + ".raw"), referenced by the
// metadata "payload" key.
//
//   image:    {"kind":"image","width":W,"height":H,"dtype":"float64-le","payload":"x.img.raw"}
//   sinogram: {"kind":"sinogram","geometry":{...},"dtype":"float64-le","payload":"b.sino.raw"}
//
// Geometry keys: n_angles, angles (optional, defaults to uniform on [0, pi)),
// n_bins, bin_spacing, pixel_size.

nlohmann::json geometry_to_json(ParallelGeometry const &g);
ParallelGeometry geometry_from_json(nlohmann::json const &j);

void write_raw_f64(std::ostream &os, std::span<double const> values);
void read_raw_f64(std::istream &is, std::span<double> values);

void save_image(std::filesystem::path const &path, Image const &image);
Image load_image(std::filesystem::path const &path);

void save_sinogram(std::filesystem::path const &path, Sinogram const &sino);
Sinogram load_sinogram(std::filesystem::path const &path);

/// 8-bit binary PGM, min-max normalised. A constant image maps to all zeros.
void save_pgm(std::filesystem::path const &path, Image const &image);

} // namespace proxskip
