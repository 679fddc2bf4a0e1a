#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "cvsdeblur/dataset_io.hpp"
#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/sensor.hpp"
#include "cvsdeblur/synth.hpp"

using namespace cvsdeblur;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cvsdeblur_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CVSSample sample_fixture(std::uint64_t seed, bool keep_all = false) {
  TextureSpec spec;
  spec.size = 16;
  spec.seed = seed;
  return make_sample(render_moving_texture(spec), {6600, 1320}, -1, keep_all);
}

std::vector<QuantFrame> extras_fixture(std::uint64_t seed) {
  TextureSpec spec;
  spec.size = 16;
  spec.seed = seed;
  const auto frames = render_moving_texture(spec);
  std::vector<QuantFrame> extras;
  for (int i = 4; i < 7; ++i)
    extras.push_back(quantize(temporal_difference(frames[static_cast<size_t>(i)], frames[static_cast<size_t>(i) + 1])));
  return extras;
}

}  // namespace

TEST_CASE("write then read reproduces the sample byte for byte") {
  TempDir tmp;
  const CVSSample s = sample_fixture(1, true);
  const auto extras = extras_fixture(1);
  write_sample(tmp.path / "s0", s, extras);

  const CVSSample r = read_sample(tmp.path / "s0");
  CHECK(r.t_rgb_us == s.t_rgb_us);
  CHECK(r.tau_diff_us == s.tau_diff_us);
  CHECK(r.n == s.n);
  CHECK(r.mid_index == s.mid_index);
  CHECK(r.gt_index == s.gt_index);
  CHECK(r.height == s.height);
  CHECK(r.width == s.width);
  CHECK(r.blur.data == s.blur.data);
  REQUIRE(r.sd_seq.size() == s.sd_seq.size());
  for (size_t i = 0; i < s.sd_seq.size(); ++i) CHECK(r.sd_seq[i].data == s.sd_seq[i].data);
  REQUIRE(r.td_seq.size() == s.td_seq.size());
  for (size_t i = 0; i < s.td_seq.size(); ++i) CHECK(r.td_seq[i].data == s.td_seq[i].data);
  REQUIRE(r.gt.size() == s.gt.size());
  for (const auto& [k, f] : s.gt) CHECK(r.gt.at(k).data == f.data);

  const auto rex = read_extra_tds(tmp.path / "s0");
  REQUIRE(rex.size() == extras.size());
  for (size_t i = 0; i < extras.size(); ++i) CHECK(rex[i].data == extras[i].data);
}

TEST_CASE("a sample without extras reads back none") {
  TempDir tmp;
  write_sample(tmp.path / "s0", sample_fixture(2));
  CHECK(read_extra_tds(tmp.path / "s0").empty());
  const CVSSample r = read_sample(tmp.path / "s0");
  CHECK(r.gt.size() == 1);  // only the target index was kept
}

TEST_CASE("list_samples returns sorted sample directories only") {
  TempDir tmp;
  write_sample(tmp.path / "b", sample_fixture(3));
  write_sample(tmp.path / "a", sample_fixture(4));
  write_sample(tmp.path / "c", sample_fixture(5));
  fs::create_directories(tmp.path / "not_a_sample");
  std::ofstream(tmp.path / "stray.txt") << "x";

  const auto dirs = list_samples(tmp.path);
  REQUIRE(dirs.size() == 3);
  CHECK(dirs[0].filename() == "a");
  CHECK(dirs[1].filename() == "b");
  CHECK(dirs[2].filename() == "c");
}

TEST_CASE("corruption is rejected") {
  SUBCASE("truncated payload") {
    TempDir tmp;
    write_sample(tmp.path / "s0", sample_fixture(6));
    fs::resize_file(tmp.path / "s0" / "blur.f32", 16);
    CHECK_THROWS_AS(read_sample(tmp.path / "s0"), IoError);
  }
  SUBCASE("intensity outside the unit range") {
    TempDir tmp;
    write_sample(tmp.path / "s0", sample_fixture(7));
    std::fstream f(tmp.path / "s0" / "blur.f32", std::ios::in | std::ios::out | std::ios::binary);
    const float bad = 7.5f;
    f.write(reinterpret_cast<const char*>(&bad), sizeof(bad));
    f.close();
    CHECK_THROWS_AS(read_sample(tmp.path / "s0"), ValidationError);
  }
  SUBCASE("difference code outside the bit depth") {
    TempDir tmp;
    write_sample(tmp.path / "s0", sample_fixture(8));
    std::fstream f(tmp.path / "s0" / "td_0.i8", std::ios::in | std::ios::out | std::ios::binary);
    const char bad = -128;  // codes live in [-127, 127]
    f.write(&bad, 1);
    f.close();
    CHECK_THROWS_AS(read_sample(tmp.path / "s0"), ValidationError);
  }
  SUBCASE("metadata inconsistent with the exposure arithmetic") {
    TempDir tmp;
    write_sample(tmp.path / "s0", sample_fixture(9));
    const fs::path meta = tmp.path / "s0" / "meta.json";
    std::ifstream in(meta);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"N\": 5");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 6, "\"N\": 6");
    std::ofstream(meta) << text;
    CHECK_THROWS_AS(read_sample(tmp.path / "s0"), ValidationError);
  }
  SUBCASE("missing directory") {
    TempDir tmp;
    CHECK_THROWS_AS(read_sample(tmp.path / "missing"), IoError);
  }
}
