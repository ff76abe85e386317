#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "logcg/io.hpp"

using namespace logcg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("logcg_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Io, VolumeRoundTripAllTypes) {
  TempDir t;
  std::vector<double> data{-1000, -810.25, 0, 3, 42, 255, 1.5, -3};
  const Volume v({2, 2, 2}, {0.7, 0.8, 2.5}, data, Units::hu);
  io::write_volume(t.path / "f.json", v, io::DType::f32);
  const auto f = io::read_volume(t.path / "f.json");
  EXPECT_EQ(f.units(), Units::hu);
  EXPECT_DOUBLE_EQ(f.spacing().z, 2.5);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(f.values()[i], static_cast<float>(data[i]));
  io::write_volume(t.path / "s.json", v, io::DType::i16);
  const auto s = io::read_volume(t.path / "s.json");
  EXPECT_EQ(s.values()[1], -810.0);
  EXPECT_EQ(s.values()[6], 2.0);
  EXPECT_EQ(fs::file_size(t.path / "s.raw"), 16u);
}

TEST(Io, MaskRoundTripAndNonzeroMembership) {
  TempDir t;
  const Mask3D m({3, 2, 1}, {1, 1, 1}, std::vector<std::uint8_t>{0, 1, 0, 1, 1, 0});
  io::write_mask(t.path / "m.json", m);
  const auto r = io::read_mask(t.path / "m.json");
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(r.values()[i], m.values()[i]);
  std::ofstream(t.path / "m.raw", std::ios::binary).write("\0\7\0\xff\1\0", 6);
  EXPECT_EQ(count_set(io::read_mask(t.path / "m.json")), 3u);
}

TEST(Io, HeaderErrorsNameTheField) {
  TempDir t;
  auto expect_error = [&](const std::string& json, const std::string& needle) {
    std::ofstream(t.path / "h.json") << json;
    try {
      io::read_volume(t.path / "h.json");
      FAIL() << "no error for " << json;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
      EXPECT_NE(std::string(e.what()).find("h.json"), std::string::npos);
    }
  };
  expect_error(R"({"spacing_mm":[1,1,1],"dtype":"f32","units":"HU","data":"x.raw"})", "dims");
  expect_error(R"({"dims":[1,1],"spacing_mm":[1,1,1],"dtype":"f32","units":"HU","data":"x.raw"})", "dims");
  expect_error(R"({"dims":[1,1,1],"spacing_mm":[1,0,1],"dtype":"f32","units":"HU","data":"x.raw"})", "spacing_mm");
  expect_error(R"({"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f64","units":"HU","data":"x.raw"})", "dtype");
  expect_error(R"({"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f32","units":"mm","data":"x.raw"})", "units");
  expect_error("{not json", "invalid JSON");
  std::ofstream(t.path / "short.raw") << "abc";
  std::ofstream(t.path / "h.json")
      << R"({"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f32","units":"HU","data":"short.raw"})";
  EXPECT_THROW(io::read_volume(t.path / "h.json"), FormatError);
}

TEST(Io, RejectsNonFiniteRawValues) {
  TempDir t;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::ofstream(t.path / "n.raw", std::ios::binary).write(reinterpret_cast<const char*>(&nan), 4);
  std::ofstream(t.path / "n.json")
      << R"({"dims":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f32","units":"unitless","data":"n.raw"})";
  EXPECT_THROW(io::read_volume(t.path / "n.json"), FormatError);
}

TEST(Io, CandidateCsvRoundTrip) {
  TempDir t;
  Candidate c;
  c.voxel = {3, 4, 5};
  c.position_mm = {2.1, 3.2, 12.5};
  c.scale_index = 6;
  c.sigma_mm = 2.81170;
  c.diameter_mm = 9.7400;
  c.response = 0.91533;
  io::write_candidates(t.path / "c.csv", {c, c});
  const std::string text = io::read_text(t.path / "c.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), io::kCandidateHeader);
  EXPECT_NE(text.find("2.1000,3.2000,12.5000,3,4,5,6,2.8117,9.7400,0.9153"), std::string::npos);
  const auto back = io::read_candidates(t.path / "c.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].voxel.z, 5u);
  EXPECT_DOUBLE_EQ(back[0].response, 0.9153);
}

TEST(Io, TruthCsv) {
  TempDir t;
  std::ofstream(t.path / "t.csv") << "ix,iy,iz,length_mm,width_mm,class\n10,20,30,12.5,7.0,solid\n1,2,3,5,5,nonsolid\n";
  const auto n = io::read_truth(t.path / "t.csv", {0.5, 0.5, 2.0});
  ASSERT_EQ(n.size(), 2u);
  EXPECT_DOUBLE_EQ(n[0].effective_diameter_mm(), 9.75);
  EXPECT_DOUBLE_EQ(n[0].position_mm[2], 60.0);
  EXPECT_EQ(n[1].cls, NoduleClass::nonsolid);
  std::ofstream(t.path / "bad.csv") << "ix,iy,iz,length_mm,width_mm,class\n10,20,30,5,7.0,solid\n";
  EXPECT_THROW(io::read_truth(t.path / "bad.csv", {1, 1, 1}), FormatError);
  std::ofstream(t.path / "bad2.csv") << "ix,iy,length_mm,width_mm,class\n";
  EXPECT_THROW(io::read_truth(t.path / "bad2.csv", {1, 1, 1}), FormatError);
  std::ofstream(t.path / "bad3.csv") << "ix,iy,iz,length_mm,width_mm,class\n1,2,x,5,5,solid\n";
  EXPECT_THROW(io::read_truth(t.path / "bad3.csv", {1, 1, 1}), FormatError);
}

TEST(Io, SceneParsing) {
  TempDir t;
  std::ofstream(t.path / "s.json") << R"({
    "dims": [16, 16, 16], "spacing_mm": [1, 1, 1], "background": -810, "units": "HU",
    "primitives": [
      {"kind": "sphere", "center_mm": [8, 8, 8], "diameter_mm": 6, "intensity": -100},
      {"kind": "cylinder", "point_mm": [0, 0, 8], "axis": [1, 0, 0], "diameter_mm": 2, "intensity": 0},
      {"kind": "wall", "point_mm": [2, 0, 0], "normal": [1, 0, 0], "thickness_mm": 4, "intensity": 40}
    ]})";
  const auto s = io::read_scene(t.path / "s.json");
  EXPECT_EQ(s.primitives.size(), 3u);
  EXPECT_EQ(s.units, Units::hu);
  EXPECT_EQ(phantom::rasterize(s)(8, 8, 8), -100.0);
  std::ofstream(t.path / "b.json")
      << R"({"dims":[4,4,4],"spacing_mm":[1,1,1],"background":0,"primitives":[{"kind":"cone","intensity":1}]})";
  EXPECT_THROW(io::read_scene(t.path / "b.json"), FormatError);
  std::ofstream(t.path / "c.json")
      << R"({"dims":[4,4,4],"spacing_mm":[1,1,1],"background":0,"primitives":[{"kind":"sphere","center_mm":[1,1,1],"diameter_mm":0,"intensity":1}]})";
  EXPECT_THROW(io::read_scene(t.path / "c.json"), FormatError);
}

TEST(Io, FixedPrecision) {
  EXPECT_EQ(io::fmt4(-0.00001), "0.0000");
  EXPECT_EQ(io::fmt4(2.370339), "2.3703");
  EXPECT_EQ(io::fmt4(-810), "-810.0000");
}
