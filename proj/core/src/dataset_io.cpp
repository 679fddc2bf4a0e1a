#include "cvsdeblur/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "cvsdeblur/errors.hpp"

static_assert(std::endian::native == std::endian::little, "raw payloads assume a little-endian host");

namespace fs = std::filesystem;

namespace cvsdeblur {

namespace {

void write_raw(const fs::path& path, const void* data, size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("short write to " + path.string());
}

void read_raw(const fs::path& path, void* data, size_t bytes) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto size = static_cast<size_t>(in.tellg());
  if (size != bytes) {
    throw IoError(path.string() + ": expected " + std::to_string(bytes) + " bytes, file has " +
                  std::to_string(size));
  }
  in.seekg(0);
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from " + path.string());
}

Frame read_frame_f32(const fs::path& path, int h, int w, int c) {
  Frame f(h, w, c);
  read_raw(path, f.data.data(), f.data.size() * sizeof(float));
  validate_range(f, 0.0f, 1.0f, path.string().c_str());
  return f;
}

QuantFrame read_frame_i8(const fs::path& path, int h, int w, int c, int bits) {
  QuantFrame q(h, w, c, bits);
  read_raw(path, q.data.data(), q.data.size());
  const int limit = (1 << bits) - 1;
  for (std::int8_t v : q.data) {
    if (v < -limit || v > limit) {
      throw ValidationError(path.string() + ": code " + std::to_string(v) + " outside +-" +
                            std::to_string(limit));
    }
  }
  return q;
}

int require_int(const nlohmann::json& j, const char* key, const fs::path& dir) {
  if (!j.contains(key) || !j[key].is_number_integer()) {
    throw ValidationError(dir.string() + "/meta.json: missing integer field '" + key + "'");
  }
  return j[key].get<int>();
}

}  // namespace

void write_sample(const fs::path& dir, const CVSSample& s, const std::vector<QuantFrame>& extra_tds) {
  if (s.n < 2 || static_cast<int>(s.sd_seq.size()) != s.n || static_cast<int>(s.td_seq.size()) != s.n - 1) {
    throw ValidationError("write_sample: inconsistent sequence lengths");
  }
  if (!s.gt.count(s.gt_index)) throw ValidationError("write_sample: gt map does not contain gt_index");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["t_rgb_us"] = s.t_rgb_us;
  meta["tau_diff_us"] = s.tau_diff_us;
  meta["N"] = s.n;
  meta["mid_index"] = s.mid_index;
  meta["height"] = s.height;
  meta["width"] = s.width;
  meta["gt_index"] = s.gt_index;
  {
    std::vector<int> gt_indices;
    for (const auto& [k, _] : s.gt) gt_indices.push_back(k);
    meta["gt_indices"] = gt_indices;
  }
  if (!extra_tds.empty()) meta["extra_tds"] = static_cast<int>(extra_tds.size());
  {
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("cannot open " + (dir / "meta.json").string() + " for writing");
    out << meta.dump(2) << "\n";
    if (!out) throw IoError("short write to " + (dir / "meta.json").string());
  }

  write_raw(dir / "blur.f32", s.blur.data.data(), s.blur.data.size() * sizeof(float));
  for (int k = 0; k < s.n; ++k) {
    const auto& q = s.sd_seq[static_cast<size_t>(k)];
    write_raw(dir / ("sd_" + std::to_string(k) + ".i8"), q.data.data(), q.data.size());
  }
  for (int i = 0; i + 1 < s.n; ++i) {
    const auto& q = s.td_seq[static_cast<size_t>(i)];
    write_raw(dir / ("td_" + std::to_string(i) + ".i8"), q.data.data(), q.data.size());
  }
  for (const auto& [k, f] : s.gt) {
    write_raw(dir / ("gt_" + std::to_string(k) + ".f32"), f.data.data(), f.data.size() * sizeof(float));
  }
  for (size_t j = 0; j < extra_tds.size(); ++j) {
    const auto& q = extra_tds[j];
    if (q.height != s.height || q.width != s.width || q.channels != 1) {
      throw ValidationError("write_sample: extra difference shape mismatch");
    }
    write_raw(dir / ("td_extra_" + std::to_string(j) + ".i8"), q.data.data(), q.data.size());
  }
}

CVSSample read_sample(const fs::path& dir) {
  nlohmann::json meta;
  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw IoError("cannot open " + (dir / "meta.json").string());
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError((dir / "meta.json").string() + ": " + e.what());
    }
  }

  CVSSample s;
  s.t_rgb_us = require_int(meta, "t_rgb_us", dir);
  s.tau_diff_us = require_int(meta, "tau_diff_us", dir);
  s.n = require_int(meta, "N", dir);
  s.mid_index = require_int(meta, "mid_index", dir);
  s.height = require_int(meta, "height", dir);
  s.width = require_int(meta, "width", dir);
  s.gt_index = require_int(meta, "gt_index", dir);

  const ExposureInfo info = compute_exposure({s.t_rgb_us, s.tau_diff_us});
  if (info.n != s.n || info.mid_index != s.mid_index) {
    throw ValidationError(dir.string() + ": N/mid_index disagree with the stated exposure");
  }
  if (s.height < 8 || s.width < 8) throw ValidationError(dir.string() + ": extents below 8x8");
  if (s.gt_index < 0 || s.gt_index >= s.n) throw ValidationError(dir.string() + ": gt_index outside [0, N)");

  s.blur = read_frame_f32(dir / "blur.f32", s.height, s.width, 3);
  for (int k = 0; k < s.n; ++k) {
    s.sd_seq.push_back(read_frame_i8(dir / ("sd_" + std::to_string(k) + ".i8"), s.height, s.width, 2, 7));
  }
  for (int i = 0; i + 1 < s.n; ++i) {
    s.td_seq.push_back(read_frame_i8(dir / ("td_" + std::to_string(i) + ".i8"), s.height, s.width, 1, 7));
  }

  std::vector<int> gt_indices;
  if (meta.contains("gt_indices")) {
    gt_indices = meta["gt_indices"].get<std::vector<int>>();
  } else {
    gt_indices.push_back(s.gt_index);
  }
  for (int k : gt_indices) {
    if (k < 0 || k >= s.n) throw ValidationError(dir.string() + ": gt index " + std::to_string(k) + " outside [0, N)");
    s.gt.emplace(k, read_frame_f32(dir / ("gt_" + std::to_string(k) + ".f32"), s.height, s.width, 3));
  }
  if (!s.gt.count(s.gt_index)) throw ValidationError(dir.string() + ": gt files do not cover gt_index");
  return s;
}

std::vector<QuantFrame> read_extra_tds(const fs::path& dir) {
  nlohmann::json meta;
  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw IoError("cannot open " + (dir / "meta.json").string());
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError((dir / "meta.json").string() + ": " + e.what());
    }
  }
  std::vector<QuantFrame> extras;
  if (!meta.contains("extra_tds")) return extras;
  const int count = require_int(meta, "extra_tds", dir);
  const int h = require_int(meta, "height", dir);
  const int w = require_int(meta, "width", dir);
  for (int j = 0; j < count; ++j) {
    extras.push_back(read_frame_i8(dir / ("td_extra_" + std::to_string(j) + ".i8"), h, w, 1, 7));
  }
  return extras;
}

std::vector<fs::path> list_samples(const fs::path& root) {
  if (!fs::exists(root)) throw IoError("dataset root " + root.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace cvsdeblur
