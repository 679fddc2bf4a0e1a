#include "png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur::tools {

namespace {

float srgb_to_linear(float v) {
  return v <= 0.04045f ? v / 12.92f : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

}  // namespace

Frame load_png(const std::filesystem::path& path, bool srgb_decode) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw IoError("load_png: cannot read " + path.string());
  if (img.depth() != CV_8U && img.depth() != CV_16U) {
    throw ValidationError("load_png: unsupported bit depth in " + path.string());
  }
  const int ch = img.channels();
  if (ch != 1 && ch != 3 && ch != 4) {
    throw ValidationError("load_png: unsupported channel count in " + path.string());
  }
  const float scale = img.depth() == CV_8U ? 1.0f / 255.0f : 1.0f / 65535.0f;
  const int out_ch = ch == 1 ? 1 : 3;
  Frame f(img.rows, img.cols, out_ch);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      for (int c = 0; c < out_ch; ++c) {
        // OpenCV stores BGR(A); flip to RGB.
        const int src_c = out_ch == 1 ? 0 : 2 - c;
        float v;
        if (img.depth() == CV_8U) {
          v = static_cast<float>(img.ptr<std::uint8_t>(y)[x * ch + src_c]) * scale;
        } else {
          v = static_cast<float>(img.ptr<std::uint16_t>(y)[x * ch + src_c]) * scale;
        }
        f.at(y, x, c) = srgb_decode ? srgb_to_linear(v) : v;
      }
    }
  }
  return f;
}

void save_png(const std::filesystem::path& path, const Frame& f) {
  if (f.channels != 1 && f.channels != 3) {
    throw ValidationError("save_png: frame must have 1 or 3 channels");
  }
  cv::Mat img(f.height, f.width, f.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      for (int c = 0; c < f.channels; ++c) {
        const float v = std::clamp(f.at(y, x, c), 0.0f, 1.0f);
        const int dst_c = f.channels == 1 ? 0 : 2 - c;
        img.ptr<std::uint8_t>(y)[x * f.channels + dst_c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  if (!cv::imwrite(path.string(), img)) throw IoError("save_png: cannot write " + path.string());
}

void save_f32(const std::filesystem::path& path, const Frame& f) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("save_f32: cannot open " + path.string());
  const size_t n = f.data.size();
  const size_t written = std::fwrite(f.data.data(), sizeof(float), n, fp);
  std::fclose(fp);
  if (written != n) throw IoError("save_f32: short write to " + path.string());
}

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("list_pngs: not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cvsdeblur::tools
