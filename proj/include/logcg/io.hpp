#pragma once

// File formats: volume headers (JSON + raw little-endian data), candidate and
// ground-truth CSV, sweep tables, and phantom scenes.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "logcg/detect.hpp"
#include "logcg/error.hpp"
#include "logcg/evaluate.hpp"
#include "logcg/phantom.hpp"
#include "logcg/scale_plan.hpp"
#include "logcg/volume.hpp"

namespace logcg::io {

static_assert(std::endian::native == std::endian::little, "raw volume I/O assumes a little-endian host");

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class DType { f32, i16, u8 };

inline std::string to_string(DType t) {
  switch (t) {
    case DType::f32: return "f32";
    case DType::i16: return "i16";
    case DType::u8: return "u8";
  }
  return "f32";
}

inline std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : (t == DType::i16 ? 2 : 1); }

/// Fixed 4-decimal formatting used for every numeric text output.
inline std::string fmt4(double v) {
  if (v == 0.0) v = 0.0;  // no "-0.0000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  if (std::strcmp(buf, "-0.0000") == 0) return "0.0000";
  return buf;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError(p.string(), "cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError(p.string(), "cannot open file for writing");
  out << text;
  if (!out) throw FormatError(p.string(), "write failed");
}

inline json parse_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw FormatError(p.string(), std::string("invalid JSON: ") + e.what());
  }
}

namespace detail {

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(where, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(where, std::string("field '") + key + "' has the wrong type");
  }
}

inline Point3 point(const json& j, const char* key, const std::string& where) {
  const auto v = field<std::vector<double>>(j, key, where);
  if (v.size() != 3) throw FormatError(where, std::string("field '") + key + "' must have 3 components");
  return {v[0], v[1], v[2]};
}

}  // namespace detail

struct RawHeader {
  Dims dims;
  Spacing spacing;
  DType dtype = DType::f32;
  Units units = Units::unitless;
  fs::path data;  ///< resolved path of the raw file
};

inline RawHeader read_header(const fs::path& header) {
  const std::string where = header.string();
  const json j = parse_json(header);
  RawHeader h;
  const auto dims = detail::field<std::vector<long long>>(j, "dims", where);
  const auto sp = detail::field<std::vector<double>>(j, "spacing_mm", where);
  if (dims.size() != 3) throw FormatError(where, "field 'dims' must have 3 components");
  if (sp.size() != 3) throw FormatError(where, "field 'spacing_mm' must have 3 components");
  for (long long d : dims)
    if (d <= 0) throw FormatError(where, "field 'dims' must be positive");
  for (double s : sp)
    if (!(s > 0.0) || !std::isfinite(s)) throw FormatError(where, "field 'spacing_mm' must be positive");
  h.dims = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]), static_cast<std::size_t>(dims[2])};
  h.spacing = {sp[0], sp[1], sp[2]};
  const auto dtype = detail::field<std::string>(j, "dtype", where);
  if (dtype == "f32") h.dtype = DType::f32;
  else if (dtype == "i16") h.dtype = DType::i16;
  else if (dtype == "u8") h.dtype = DType::u8;
  else throw FormatError(where, "field 'dtype' must be f32, i16 or u8, got '" + dtype + "'");
  try {
    h.units = units_from_string(detail::field<std::string>(j, "units", where));
  } catch (const InvalidArgument& e) {
    throw FormatError(where, std::string("field 'units': ") + e.what());
  }
  const fs::path data = detail::field<std::string>(j, "data", where);
  h.data = data.is_absolute() ? data : header.parent_path() / data;
  return h;
}

inline std::vector<double> read_raw(const RawHeader& h) {
  const std::size_t n = h.dims.voxel_count();
  const std::size_t bytes = n * dtype_size(h.dtype);
  std::ifstream in(h.data, std::ios::binary);
  if (!in) throw FormatError(h.data.string(), "cannot open raw data file");
  std::vector<char> raw(bytes);
  in.read(raw.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw FormatError(h.data.string(), "raw file holds fewer than " + std::to_string(bytes) + " bytes");
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(h.data.string(), "raw file is larger than dims x dtype");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (h.dtype) {
      case DType::f32: {
        float f;
        std::memcpy(&f, raw.data() + 4 * i, 4);
        out[i] = f;
        break;
      }
      case DType::i16: {
        std::int16_t s;
        std::memcpy(&s, raw.data() + 2 * i, 2);
        out[i] = s;
        break;
      }
      case DType::u8: out[i] = static_cast<unsigned char>(raw[i]); break;
    }
    if (!std::isfinite(out[i]))
      throw FormatError(h.data.string(), "non-finite value at voxel " + std::to_string(i));
  }
  return out;
}

inline Volume read_volume(const fs::path& header) {
  const RawHeader h = read_header(header);
  return Volume(h.dims, h.spacing, read_raw(h), h.units);
}

/// Nonzero voxels are mask members, whatever the stored dtype.
inline Mask3D read_mask(const fs::path& header) {
  const RawHeader h = read_header(header);
  const auto v = read_raw(h);
  std::vector<std::uint8_t> m(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] != 0.0;
  return Mask3D(h.dims, h.spacing, std::move(m), Units::unitless);
}

namespace detail {

inline void write_header(const fs::path& header, const Dims& d, const Spacing& s, DType t, Units u) {
  json j;
  j["dims"] = {d.nx, d.ny, d.nz};
  j["spacing_mm"] = {s.x, s.y, s.z};
  j["dtype"] = to_string(t);
  j["units"] = to_string(u);
  fs::path raw = header.filename();
  raw.replace_extension(".raw");
  j["data"] = raw.string();
  write_text(header, j.dump(2) + "\n");
}

inline fs::path raw_path(const fs::path& header) {
  fs::path raw = header;
  raw.replace_extension(".raw");
  return raw;
}

}  // namespace detail

/// Writes `header` plus a sibling .raw file. i16 output rounds and saturates.
inline void write_volume(const fs::path& header, const Volume& v, DType t = DType::f32) {
  if (header.extension() == ".raw") throw InvalidArgument("volume header path must not end in .raw");
  detail::write_header(header, v.dims(), v.spacing(), t, v.units());
  std::string bytes(v.size() * dtype_size(t), '\0');
  const auto vals = v.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    switch (t) {
      case DType::f32: {
        const auto f = static_cast<float>(vals[i]);
        std::memcpy(bytes.data() + 4 * i, &f, 4);
        break;
      }
      case DType::i16: {
        const double c = std::clamp(std::round(vals[i]), -32768.0, 32767.0);
        const auto s = static_cast<std::int16_t>(c);
        std::memcpy(bytes.data() + 2 * i, &s, 2);
        break;
      }
      case DType::u8: bytes[i] = static_cast<char>(std::clamp(std::round(vals[i]), 0.0, 255.0)); break;
    }
  }
  write_text(detail::raw_path(header), bytes);
}

inline void write_mask(const fs::path& header, const Mask3D& m) {
  if (header.extension() == ".raw") throw InvalidArgument("mask header path must not end in .raw");
  detail::write_header(header, m.dims(), m.spacing(), DType::u8, Units::unitless);
  const auto vals = m.values();
  std::string bytes(vals.size(), '\0');
  for (std::size_t i = 0; i < vals.size(); ++i) bytes[i] = vals[i] ? 1 : 0;
  write_text(detail::raw_path(header), bytes);
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCandidateHeader = "x_mm,y_mm,z_mm,ix,iy,iz,scale_index,sigma_mm,diameter_mm,response";
inline constexpr const char* kTruthHeader = "ix,iy,iz,length_mm,width_mm,class";
inline constexpr const char* kSweepHeader = "distance_diameters,response,size_estimate_mm,merged";

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& p, const std::string& header) {
  std::istringstream in(read_text(p));
  std::string line;
  if (!std::getline(in, line)) throw FormatError(p.string(), "empty file, expected header '" + header + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split(line) != split(header)) throw FormatError(p.string() + ":1", "expected header '" + header + "'");
  const std::size_t cols = split(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != cols)
      throw FormatError(p.string() + ":" + std::to_string(lineno),
                        "expected " + std::to_string(cols) + " fields, got " + std::to_string(cells.size()));
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double to_double(const std::string& s, const std::string& where, const char* name) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v))
    throw FormatError(where, std::string("field '") + name + "' is not a number: '" + s + "'");
  return v;
}

inline std::size_t to_index(const std::string& s, const std::string& where, const char* name) {
  const double v = to_double(s, where, name);
  if (v < 0.0 || v != std::floor(v))
    throw FormatError(where, std::string("field '") + name + "' must be a non-negative integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline std::string candidates_csv(const std::vector<Candidate>& cands) {
  std::string out = std::string(kCandidateHeader) + "\n";
  for (const auto& c : cands) {
    out += fmt4(c.position_mm[0]) + "," + fmt4(c.position_mm[1]) + "," + fmt4(c.position_mm[2]) + ",";
    out += std::to_string(c.voxel.x) + "," + std::to_string(c.voxel.y) + "," + std::to_string(c.voxel.z) + ",";
    out += std::to_string(c.scale_index) + "," + fmt4(c.sigma_mm) + "," + fmt4(c.diameter_mm) + "," +
           fmt4(c.response) + "\n";
  }
  return out;
}

inline void write_candidates(const fs::path& p, const std::vector<Candidate>& cands) {
  write_text(p, candidates_csv(cands));
}

inline std::vector<Candidate> read_candidates(const fs::path& p) {
  std::vector<Candidate> out;
  std::size_t row = 1;
  for (const auto& r : detail::read_csv(p, kCandidateHeader)) {
    const std::string where = p.string() + " row " + std::to_string(row++);
    Candidate c;
    c.position_mm = {detail::to_double(r[0], where, "x_mm"), detail::to_double(r[1], where, "y_mm"),
                     detail::to_double(r[2], where, "z_mm")};
    c.voxel = {detail::to_index(r[3], where, "ix"), detail::to_index(r[4], where, "iy"),
               detail::to_index(r[5], where, "iz")};
    c.scale_index = detail::to_index(r[6], where, "scale_index");
    c.sigma_mm = detail::to_double(r[7], where, "sigma_mm");
    c.diameter_mm = detail::to_double(r[8], where, "diameter_mm");
    c.response = detail::to_double(r[9], where, "response");
    out.push_back(c);
  }
  return out;
}

inline std::vector<GroundTruthNodule> read_truth(const fs::path& p, const Spacing& spacing) {
  std::vector<GroundTruthNodule> out;
  std::size_t row = 1;
  for (const auto& r : detail::read_csv(p, kTruthHeader)) {
    const std::string where = p.string() + " row " + std::to_string(row++);
    const Index3 v{detail::to_index(r[0], where, "ix"), detail::to_index(r[1], where, "iy"),
                   detail::to_index(r[2], where, "iz")};
    const double l = detail::to_double(r[3], where, "length_mm");
    const double w = detail::to_double(r[4], where, "width_mm");
    try {
      out.push_back(make_nodule(v, l, w, spacing, nodule_class_from_string(r[5])));
    } catch (const InvalidArgument& e) {
      throw FormatError(where, e.what());
    }
  }
  return out;
}

inline std::string sweep_csv(const std::vector<phantom::SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& r : rows)
    out += fmt4(r.distance_diameters) + "," + fmt4(r.response) + "," + fmt4(r.size_estimate_mm) + "," +
           (r.merged ? "true" : "false") + "\n";
  return out;
}

inline std::string plan_csv(const ScalePlan& p) {
  std::string out = "index,diameter_mm,sigma_mm,range_lo_mm,range_hi_mm,boundary\n";
  for (const auto& e : p.entries())
    out += std::to_string(e.index) + "," + fmt4(e.diameter_mm) + "," + fmt4(e.sigma_mm) + "," +
           (e.boundary ? std::string("") : fmt4(e.range_lo_mm)) + "," +
           (e.boundary ? std::string("") : fmt4(e.range_hi_mm)) + "," + (e.boundary ? "true" : "false") + "\n";
  return out;
}

/// Numbers are emitted as 4-decimal literals so reruns diff cleanly.
inline std::string plan_json(const ScalePlan& p) {
  std::string out = "{\n  \"k\": " + fmt4(p.k()) + ",\n  \"entries\": [\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& e = p[i];
    out += "    {\"index\": " + std::to_string(e.index) + ", \"diameter_mm\": " + fmt4(e.diameter_mm) +
           ", \"sigma_mm\": " + fmt4(e.sigma_mm);
    if (!e.boundary)
      out += ", \"range_lo_mm\": " + fmt4(e.range_lo_mm) + ", \"range_hi_mm\": " + fmt4(e.range_hi_mm);
    out += std::string(", \"boundary\": ") + (e.boundary ? "true" : "false") + "}";
    out += i + 1 < p.size() ? ",\n" : "\n";
  }
  return out + "  ]\n}\n";
}

inline std::string report_json(const MatchReport& r, const std::vector<GroundTruthNodule>& truth) {
  std::string out = "{\n";
  out += "  \"nodules\": " + std::to_string(truth.size()) + ",\n";
  out += "  \"matched\": " + std::to_string(r.matched) + ",\n";
  out += "  \"sensitivity\": " + fmt4(r.sensitivity) + ",\n";
  out += "  \"diameter_bias_mean_mm\": " + fmt4(r.diameter_bias_mean) + ",\n";
  out += "  \"diameter_bias_sd_mm\": " + fmt4(r.diameter_bias_sd) + ",\n";
  out += "  \"mean_distance_mm\": " + fmt4(r.mean_distance_mm) + ",\n";
  out += "  \"candidate_count\": " + std::to_string(r.candidate_count) + "\n}\n";
  return out;
}

inline std::string report_csv(const MatchReport& r, const std::vector<GroundTruthNodule>& truth,
                              const std::vector<Candidate>& cands) {
  std::string out =
      "ix,iy,iz,effective_diameter_mm,class,matched,candidate_row,candidate_diameter_mm,distance_mm,"
      "diameter_error_mm\n";
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto& n = truth[k];
    const auto& m = r.nodules[k];
    out += std::to_string(n.centroid.x) + "," + std::to_string(n.centroid.y) + "," +
           std::to_string(n.centroid.z) + "," + fmt4(n.effective_diameter_mm()) + "," + to_string(n.cls) + ",";
    if (m.matched)
      out += "true," + std::to_string(*m.candidate) + "," + fmt4(cands[*m.candidate].diameter_mm) + "," +
             fmt4(m.distance_mm) + "," + fmt4(m.diameter_error_mm) + "\n";
    else
      out += "false,,,,\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenes

inline phantom::Scene read_scene(const fs::path& p) {
  const std::string where = p.string();
  const json j = parse_json(p);
  phantom::Scene s;
  const auto dims = detail::field<std::vector<long long>>(j, "dims", where);
  const auto sp = detail::field<std::vector<double>>(j, "spacing_mm", where);
  if (dims.size() != 3 || sp.size() != 3) throw FormatError(where, "'dims' and 'spacing_mm' need 3 components");
  for (long long d : dims)
    if (d <= 0) throw FormatError(where, "field 'dims' must be positive");
  s.dims = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]), static_cast<std::size_t>(dims[2])};
  s.spacing = {sp[0], sp[1], sp[2]};
  s.background = detail::field<double>(j, "background", where);
  if (j.contains("units")) {
    try {
      s.units = units_from_string(detail::field<std::string>(j, "units", where));
    } catch (const InvalidArgument& e) {
      throw FormatError(where, std::string("field 'units': ") + e.what());
    }
  }
  if (j.contains("composite")) {
    const auto c = detail::field<std::string>(j, "composite", where);
    if (c == "max") s.composite = phantom::Composite::max;
    else if (c == "add") s.composite = phantom::Composite::add;
    else throw FormatError(where, "field 'composite' must be max or add");
  }
  if (j.contains("primitives")) {
    if (!j["primitives"].is_array()) throw FormatError(where, "field 'primitives' must be an array");
    std::size_t i = 0;
    for (const auto& pj : j["primitives"]) {
      const std::string pw = where + " primitives[" + std::to_string(i++) + "]";
      phantom::Primitive prim;
      prim.intensity = detail::field<double>(pj, "intensity", pw);
      const auto kind = detail::field<std::string>(pj, "kind", pw);
      if (kind == "sphere") {
        prim.shape = phantom::Sphere{detail::point(pj, "center_mm", pw), detail::field<double>(pj, "diameter_mm", pw)};
      } else if (kind == "cylinder") {
        phantom::Cylinder c;
        c.point_mm = detail::point(pj, "point_mm", pw);
        c.axis = detail::point(pj, "axis", pw);
        c.diameter_mm = detail::field<double>(pj, "diameter_mm", pw);
        if (pj.contains("length_mm")) c.length_mm = detail::field<double>(pj, "length_mm", pw);
        prim.shape = c;
      } else if (kind == "wall") {
        phantom::Wall w;
        w.point_mm = detail::point(pj, "point_mm", pw);
        w.normal = detail::point(pj, "normal", pw);
        if (pj.contains("thickness_mm")) w.thickness_mm = detail::field<double>(pj, "thickness_mm", pw);
        prim.shape = w;
      } else {
        throw FormatError(pw, "unknown primitive kind '" + kind + "'");
      }
      try {
        prim.validate();
      } catch (const InvalidArgument& e) {
        throw FormatError(pw, e.what());
      }
      s.primitives.push_back(prim);
    }
  }
  return s;
}

}  // namespace logcg::io
