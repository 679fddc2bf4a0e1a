#pragma once

#include <filesystem>
#include <vector>

#include "cvsdeblur/sensor.hpp"

namespace cvsdeblur {

// One sample per directory:
//   meta.json       exposure bookkeeping and extents
//   blur.f32        float32 LE, height * width * 3, row-major channel-last
//   sd_<k>.i8       int8 codes, height * width * 2, k in [0, N)
//   td_<i>.i8       int8 codes, height * width, i in [0, N-1)
//   gt_<k>.f32      float32 LE, height * width * 3, one file per kept index
//   td_extra_<j>.i8 optional post-exposure differences for tail augmentation
//
// Reading back a written sample reproduces every payload byte for byte.

void write_sample(const std::filesystem::path& dir, const CVSSample& s,
                  const std::vector<QuantFrame>& extra_tds = {});

CVSSample read_sample(const std::filesystem::path& dir);

// Post-exposure differences stored alongside the sample; empty if none.
std::vector<QuantFrame> read_extra_tds(const std::filesystem::path& dir);

// Sample directories (those holding a meta.json) directly under root, sorted
// by name.
std::vector<std::filesystem::path> list_samples(const std::filesystem::path& root);

}  // namespace cvsdeblur
