#pragma once

#include <vector>

#include "cvsdeblur/frame.hpp"
#include "cvsdeblur/tensor.hpp"

namespace cvsdeblur {

// Frame (y, x, c interleaved) <-> tensor ([B, C, H, W] planar) conversions.

nn::Tensor frame_to_tensor(const Frame& f);
nn::Tensor frames_to_tensor(const std::vector<const Frame*>& fs);  // stacks along B
Frame tensor_to_frame(const nn::Tensor& t, int batch_index = 0);

// Dequantizes and lifts to a [1, C, H, W] tensor.
nn::Tensor quant_to_tensor(const QuantFrame& q);
nn::Tensor quants_to_tensor(const std::vector<const QuantFrame*>& qs);

}  // namespace cvsdeblur
