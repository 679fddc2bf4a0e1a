#include "cvsdeblur/bridge.hpp"

#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/sensor.hpp"

namespace cvsdeblur {

nn::Tensor frames_to_tensor(const std::vector<const Frame*>& fs) {
  if (fs.empty()) throw ValidationError("frames_to_tensor: empty batch");
  const Frame& f0 = *fs[0];
  const int H = f0.height, W = f0.width, C = f0.channels;
  std::vector<float> data(static_cast<size_t>(fs.size()) * C * H * W);
  for (size_t b = 0; b < fs.size(); ++b) {
    const Frame& f = *fs[b];
    if (!f.same_shape(f0)) throw ValidationError("frames_to_tensor: frame shapes differ");
    float* dst = data.data() + b * static_cast<size_t>(C) * H * W;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        for (int c = 0; c < C; ++c) {
          dst[(static_cast<long>(c) * H + y) * W + x] = f.at(y, x, c);
        }
      }
    }
  }
  return nn::Tensor::from_vector({static_cast<int>(fs.size()), C, H, W}, std::move(data));
}

nn::Tensor frame_to_tensor(const Frame& f) { return frames_to_tensor({&f}); }

Frame tensor_to_frame(const nn::Tensor& t, int batch_index) {
  if (t.rank() != 4) throw ValidationError("tensor_to_frame: expected rank 4, got " + nn::shape_str(t.shape()));
  const int B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  if (batch_index < 0 || batch_index >= B) throw ValidationError("tensor_to_frame: batch index out of range");
  Frame f(H, W, C);
  const float* src = t.value().data() + static_cast<size_t>(batch_index) * C * H * W;
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        f.at(y, x, c) = src[(static_cast<long>(c) * H + y) * W + x];
      }
    }
  }
  return f;
}

nn::Tensor quants_to_tensor(const std::vector<const QuantFrame*>& qs) {
  if (qs.empty()) throw ValidationError("quants_to_tensor: empty batch");
  std::vector<Frame> deq;
  std::vector<const Frame*> ptrs;
  deq.reserve(qs.size());
  for (const QuantFrame* q : qs) deq.push_back(dequantize(*q));
  for (const Frame& f : deq) ptrs.push_back(&f);
  return frames_to_tensor(ptrs);
}

nn::Tensor quant_to_tensor(const QuantFrame& q) { return quants_to_tensor({&q}); }

}  // namespace cvsdeblur
