#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvsdeblur/frame.hpp"
#include "cvsdeblur/sensor.hpp"
#include "cvsdeblur/tensor.hpp"

namespace cvsdeblur {

struct AblationFlags {
  bool use_sd = true;    // false substitutes zeros for the SD feature pyramid
  bool use_td = true;    // false substitutes zeros for the TD feature pyramids
  bool use_ccf = true;   // false swaps cross-attention fusion for concat + two convs
  bool use_trrm = true;  // false runs a single step on the central difference
};

struct ArchConfig {
  int base_channels = 16;
  int n_scales = 3;  // in [1, 4]
  float leaky_slope = 0.1f;
  AblationFlags flags;

  int channels_at(int scale) const { return base_channels << scale; }
  int pad_multiple() const { return 1 << (n_scales - 1); }
};

// Recurrent multi-scale restoration network. One recurrence step per
// temporal difference: the running state is first gated against the blurred
// frame, then pushed through an encoder-decoder whose every scale fuses the
// state with the difference-signal pyramids via two cascaded cross-attention
// stages (state attends to TD features, then to SD features).
//
// The tensor-level entry points are public and forward() is their exact
// composition, so pipeline behavior can be pinned piece by piece.
template <typename T>
class STGDNet {
 public:
  STGDNet(const ArchConfig& cfg, std::uint64_t seed);
  // Adopts an externally created parameter list (registration order); used
  // for checkpoint restore and for driving the model from gradcheck leaves.
  STGDNet(const ArchConfig& cfg, const std::vector<nn::TensorT<T>>& params);

  const ArchConfig& config() const { return cfg_; }
  std::vector<nn::TensorT<T>>& parameters() { return params_; }
  const std::vector<nn::TensorT<T>>& parameters() const { return params_; }

  // Single 3x3 conv embedding of the blurred frame, no activation.
  nn::TensorT<T> embed_blur(const nn::TensorT<T>& blur) const;

  // Difference-signal encoders; return one feature map per scale, extents
  // halved per level. All-zero input yields an all-zero pyramid while the
  // biases are zero.
  std::vector<nn::TensorT<T>> encode_sd(const nn::TensorT<T>& sd) const;
  std::vector<nn::TensorT<T>> encode_td(const nn::TensorT<T>& td) const;
  std::vector<nn::TensorT<T>> zero_pyramid(int batch, int h, int w) const;

  // Dual cross-attention fusion at one scale. Zeroing the value projections
  // reduces it to the identity on f.
  nn::TensorT<T> ccf_fuse(const nn::TensorT<T>& f, const nn::TensorT<T>& f_td, const nn::TensorT<T>& f_sd,
                          int scale) const;

  // Sharpness-attention gate: r + C1(r) * sigmoid(C3(C2(r) + blur)).
  nn::TensorT<T> sam(const nn::TensorT<T>& r, const nn::TensorT<T>& blur) const;

  // One recurrence step: entry fusion with the blur embedding, fused encoder
  // descent, skip-connected decoder ascent back to full resolution.
  nn::TensorT<T> trrm_step(const nn::TensorT<T>& r_prime, const nn::TensorT<T>& b_enc,
                           const std::vector<nn::TensorT<T>>& td_pyr,
                           const std::vector<nn::TensorT<T>>& sd_pyr) const;

  // Full restoration: blur [B,3,H,W], sd [B,2,H,W], tds of [B,1,H,W].
  // Inputs are mirror-padded to a multiple of pad_multiple() and the output
  // is cropped back; the result is blur + residual, unclamped.
  nn::TensorT<T> forward(const nn::TensorT<T>& blur, const nn::TensorT<T>& sd,
                         const std::vector<nn::TensorT<T>>& tds) const;

 private:
  struct Conv {
    nn::TensorT<T> w, b;
  };
  struct Encoder {
    Conv stem;
    std::vector<Conv> block1, block2, proj, down;
  };
  struct CcfProj {
    Conv q1, k1, v1, q2, k2, v2;
  };
  struct CatFuse {
    Conv c1, c2;
  };

  class ParamBuilder;
  void wire(ParamBuilder& pb);
  std::vector<nn::TensorT<T>> run_encoder(const Encoder& enc, const nn::TensorT<T>& in) const;
  nn::TensorT<T> apply(const Conv& c, const nn::TensorT<T>& x, int stride = 1) const;
  nn::TensorT<T> lrelu(const nn::TensorT<T>& x) const;

  ArchConfig cfg_;
  Conv rgb_embed_;
  Encoder sd_enc_, td_enc_;
  Conv trrm_entry_;
  std::vector<Conv> trrm_block1_, trrm_block2_, trrm_down_, trrm_dec_;
  std::vector<CcfProj> ccf_;
  std::vector<CatFuse> cat_;
  Conv sam_c1_, sam_c2_, sam_c3_;
  Conv conv_out_;
  std::vector<nn::TensorT<T>> params_;
};

// Frame-level entry points (float weights, single image). Outputs are
// clamped to [0,1].
Frame restore(const STGDNet<float>& model, const Frame& blur, const QuantFrame& sd,
              const std::vector<QuantFrame>& tds);
// Restores the sharp frame at tick k of the exposure by feeding the SD frame
// aligned with that tick. k = mid_index reproduces the default restoration.
Frame restore_at(const STGDNet<float>& model, const CVSSample& s, int k);

// Checkpoint pair: `path` holds the parameter container, and an .arch.json
// sidecar (same stem) records the ArchConfig so load can rebuild the model.
void save_model(const STGDNet<float>& model, const std::string& path);
STGDNet<float> load_model(const std::string& path);
// Validates the stored ArchConfig against `expected` before loading.
STGDNet<float> load_model(const std::string& path, const ArchConfig& expected);

}  // namespace cvsdeblur
