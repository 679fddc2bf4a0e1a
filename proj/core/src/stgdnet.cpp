#include "cvsdeblur/stgdnet.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "cvsdeblur/bridge.hpp"
#include "cvsdeblur/checkpoint.hpp"
#include "cvsdeblur/errors.hpp"
#include "cvsdeblur/ops.hpp"
#include "cvsdeblur/rng.hpp"

namespace cvsdeblur {

using nn::TensorT;

namespace {
void check_arch(const ArchConfig& cfg) {
  if (cfg.base_channels < 1 || cfg.base_channels > 256) {
    throw ValidationError("ArchConfig: base_channels must lie in [1, 256]");
  }
  if (cfg.n_scales < 1 || cfg.n_scales > 4) throw ValidationError("ArchConfig: n_scales must lie in [1, 4]");
  if (!(cfg.leaky_slope > 0.0f) || cfg.leaky_slope >= 1.0f) {
    throw ValidationError("ArchConfig: leaky_slope must lie in (0, 1)");
  }
}
}  // namespace

// Creates or consumes parameters in registration order; the single source of
// truth for the architecture's parameter list.
template <typename T>
class STGDNet<T>::ParamBuilder {
 public:
  ParamBuilder(std::uint64_t seed) : rng_(seed), generate_(true) {}
  explicit ParamBuilder(const std::vector<TensorT<T>>& given) : given_(&given), generate_(false) {}

  Conv conv(const std::string& name, int cin, int cout, int k) {
    const nn::Shape wshape{cout, cin, k, k};
    const nn::Shape bshape{cout};
    Conv c;
    if (generate_) {
      // He-style fan-in uniform for the weights, zero biases.
      const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * k * k));
      std::vector<T> w(static_cast<size_t>(nn::shape_numel(wshape)));
      for (auto& v : w) v = static_cast<T>((2.0 * u01(rng_) - 1.0) * bound);
      c.w = TensorT<T>::from_vector(wshape, std::move(w)).set_requires_grad(true);
      c.b = TensorT<T>::zeros(bshape).set_requires_grad(true);
    } else {
      c.w = take(wshape, name + ".w");
      c.b = take(bshape, name + ".b");
    }
    c.w.set_name(name + ".w");
    c.b.set_name(name + ".b");
    out.push_back(c.w);
    out.push_back(c.b);
    return c;
  }

  void finish() const {
    if (!generate_ && idx_ != given_->size()) {
      throw ValidationError("STGDNet: expected " + std::to_string(idx_) + " parameters, got " +
                            std::to_string(given_->size()));
    }
  }

  std::vector<TensorT<T>> out;

 private:
  TensorT<T> take(const nn::Shape& shape, const std::string& name) {
    if (idx_ >= given_->size()) {
      throw ValidationError("STGDNet: parameter list ends before '" + name + "'");
    }
    TensorT<T> t = (*given_)[idx_++];
    if (!t.defined() || t.shape() != shape) {
      throw ValidationError("STGDNet: parameter '" + name + "' must have shape " + nn::shape_str(shape));
    }
    if (!t.requires_grad()) throw ValidationError("STGDNet: parameter '" + name + "' must require grad");
    return t;
  }

  std::mt19937_64 rng_{0};
  const std::vector<TensorT<T>>* given_ = nullptr;
  size_t idx_ = 0;
  bool generate_;
};

template <typename T>
void STGDNet<T>::wire(ParamBuilder& pb) {
  const int S = cfg_.n_scales;
  const int c0 = cfg_.base_channels;

  rgb_embed_ = pb.conv("rgb_embed", 3, c0, 3);

  auto wire_encoder = [&](Encoder& enc, const std::string& stem_name, int cin) {
    enc.stem = pb.conv(stem_name + ".stem", cin, c0, 3);
    for (int j = 0; j < S; ++j) {
      const int c = cfg_.channels_at(j);
      const std::string sj = stem_name + ".s" + std::to_string(j);
      enc.block1.push_back(pb.conv(sj + ".conv1", c, c, 3));
      enc.block2.push_back(pb.conv(sj + ".conv2", c, c, 3));
      enc.proj.push_back(pb.conv(sj + ".proj", c, c, 1));
      if (j + 1 < S) enc.down.push_back(pb.conv(sj + ".down", c, cfg_.channels_at(j + 1), 3));
    }
  };
  if (cfg_.flags.use_sd) wire_encoder(sd_enc_, "sd_enc", 2);
  if (cfg_.flags.use_td) wire_encoder(td_enc_, "td_enc", 1);

  trrm_entry_ = pb.conv("trrm.entry", 2 * c0, c0, 1);
  for (int j = 0; j < S; ++j) {
    const int c = cfg_.channels_at(j);
    const std::string sj = "trrm.s" + std::to_string(j);
    trrm_block1_.push_back(pb.conv(sj + ".conv1", c, c, 3));
    trrm_block2_.push_back(pb.conv(sj + ".conv2", c, c, 3));
    if (cfg_.flags.use_ccf) {
      CcfProj p;
      p.q1 = pb.conv(sj + ".q1", c, c, 1);
      p.k1 = pb.conv(sj + ".k1", c, c, 1);
      p.v1 = pb.conv(sj + ".v1", c, c, 1);
      p.q2 = pb.conv(sj + ".q2", c, c, 1);
      p.k2 = pb.conv(sj + ".k2", c, c, 1);
      p.v2 = pb.conv(sj + ".v2", c, c, 1);
      ccf_.push_back(p);
    } else {
      CatFuse f;
      f.c1 = pb.conv(sj + ".cat1", 3 * c, c, 3);
      f.c2 = pb.conv(sj + ".cat2", c, c, 3);
      cat_.push_back(f);
    }
    if (j + 1 < S) trrm_down_.push_back(pb.conv(sj + ".down", c, cfg_.channels_at(j + 1), 3));
  }
  for (int j = 0; j + 1 < S; ++j) {
    const int c = cfg_.channels_at(j);
    trrm_dec_.push_back(pb.conv("trrm.d" + std::to_string(j) + ".merge", cfg_.channels_at(j + 1) + c, c, 3));
  }

  sam_c1_ = pb.conv("sam.c1", c0, c0, 3);
  sam_c2_ = pb.conv("sam.c2", c0, 3, 3);
  sam_c3_ = pb.conv("sam.c3", 3, c0, 3);
  conv_out_ = pb.conv("conv_out", c0, 3, 3);

  pb.finish();
  params_ = pb.out;
}

template <typename T>
STGDNet<T>::STGDNet(const ArchConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  check_arch(cfg_);
  ParamBuilder pb(seed);
  wire(pb);
}

template <typename T>
STGDNet<T>::STGDNet(const ArchConfig& cfg, const std::vector<TensorT<T>>& params) : cfg_(cfg) {
  check_arch(cfg_);
  ParamBuilder pb(params);
  wire(pb);
}

template <typename T>
TensorT<T> STGDNet<T>::apply(const Conv& c, const TensorT<T>& x, int stride) const {
  return nn::conv2d(x, c.w, c.b, stride);
}

template <typename T>
TensorT<T> STGDNet<T>::lrelu(const TensorT<T>& x) const {
  return nn::leaky_relu(x, static_cast<T>(cfg_.leaky_slope));
}

template <typename T>
TensorT<T> STGDNet<T>::embed_blur(const TensorT<T>& blur) const {
  return apply(rgb_embed_, blur);
}

template <typename T>
std::vector<TensorT<T>> STGDNet<T>::run_encoder(const Encoder& enc, const TensorT<T>& in) const {
  TensorT<T> x = lrelu(apply(enc.stem, in));
  std::vector<TensorT<T>> pyr;
  pyr.reserve(static_cast<size_t>(cfg_.n_scales));
  for (int j = 0; j < cfg_.n_scales; ++j) {
    TensorT<T> h = lrelu(apply(enc.block1[static_cast<size_t>(j)], x));
    h = lrelu(apply(enc.block2[static_cast<size_t>(j)], h));
    x = nn::add(x, h);
    pyr.push_back(apply(enc.proj[static_cast<size_t>(j)], x));
    if (j + 1 < cfg_.n_scales) x = lrelu(apply(enc.down[static_cast<size_t>(j)], x, 2));
  }
  return pyr;
}

template <typename T>
std::vector<TensorT<T>> STGDNet<T>::encode_sd(const TensorT<T>& sd) const {
  if (!cfg_.flags.use_sd) throw ValidationError("encode_sd: the SD pathway is ablated in this model");
  if (!sd.defined() || sd.rank() != 4 || sd.dim(1) != 2) {
    throw ValidationError("encode_sd: expected [B, 2, H, W] input");
  }
  return run_encoder(sd_enc_, sd);
}

template <typename T>
std::vector<TensorT<T>> STGDNet<T>::encode_td(const TensorT<T>& td) const {
  if (!cfg_.flags.use_td) throw ValidationError("encode_td: the TD pathway is ablated in this model");
  if (!td.defined() || td.rank() != 4 || td.dim(1) != 1) {
    throw ValidationError("encode_td: expected [B, 1, H, W] input");
  }
  return run_encoder(td_enc_, td);
}

template <typename T>
std::vector<TensorT<T>> STGDNet<T>::zero_pyramid(int batch, int h, int w) const {
  if (h % cfg_.pad_multiple() != 0 || w % cfg_.pad_multiple() != 0) {
    throw ValidationError("zero_pyramid: extents must be multiples of " + std::to_string(cfg_.pad_multiple()));
  }
  std::vector<TensorT<T>> pyr;
  for (int j = 0; j < cfg_.n_scales; ++j) {
    pyr.push_back(TensorT<T>::zeros({batch, cfg_.channels_at(j), h >> j, w >> j}));
  }
  return pyr;
}

template <typename T>
TensorT<T> STGDNet<T>::ccf_fuse(const TensorT<T>& f, const TensorT<T>& f_td, const TensorT<T>& f_sd,
                                int scale) const {
  if (scale < 0 || scale >= cfg_.n_scales) throw ValidationError("ccf_fuse: scale out of range");
  if (f.shape() != f_td.shape() || f.shape() != f_sd.shape()) {
    throw ValidationError("ccf_fuse: feature shapes differ");
  }
  const int h = f.dim(2), w = f.dim(3);
  if (cfg_.flags.use_ccf) {
    const CcfProj& p = ccf_[static_cast<size_t>(scale)];
    TensorT<T> a1 = nn::attention(nn::bchw_to_tokens(apply(p.q1, f)), nn::bchw_to_tokens(apply(p.k1, f_td)),
                                  nn::bchw_to_tokens(apply(p.v1, f_td)));
    TensorT<T> f1 = nn::add(f, nn::tokens_to_bchw(a1, h, w));
    TensorT<T> a2 = nn::attention(nn::bchw_to_tokens(apply(p.q2, f1)), nn::bchw_to_tokens(apply(p.k2, f_sd)),
                                  nn::bchw_to_tokens(apply(p.v2, f_sd)));
    return nn::add(f1, nn::tokens_to_bchw(a2, h, w));
  }
  const CatFuse& cf = cat_[static_cast<size_t>(scale)];
  TensorT<T> y = lrelu(apply(cf.c1, nn::concat_channels<T>({f, f_td, f_sd})));
  return apply(cf.c2, y);
}

template <typename T>
TensorT<T> STGDNet<T>::sam(const TensorT<T>& r, const TensorT<T>& blur) const {
  if (r.rank() != 4 || blur.rank() != 4 || r.dim(0) != blur.dim(0) || r.dim(2) != blur.dim(2) ||
      r.dim(3) != blur.dim(3)) {
    throw ValidationError("sam: state and blur extents differ");
  }
  TensorT<T> gate = nn::sigmoid(apply(sam_c3_, nn::add(apply(sam_c2_, r), blur)));
  return nn::add(r, nn::mul(apply(sam_c1_, r), gate));
}

template <typename T>
TensorT<T> STGDNet<T>::trrm_step(const TensorT<T>& r_prime, const TensorT<T>& b_enc,
                                 const std::vector<TensorT<T>>& td_pyr,
                                 const std::vector<TensorT<T>>& sd_pyr) const {
  const int S = cfg_.n_scales;
  if (static_cast<int>(td_pyr.size()) != S || static_cast<int>(sd_pyr.size()) != S) {
    throw ValidationError("trrm_step: pyramid depth does not match n_scales");
  }
  TensorT<T> e = apply(trrm_entry_, nn::concat_channels<T>({r_prime, b_enc}));
  std::vector<TensorT<T>> fused(static_cast<size_t>(S));
  for (int j = 0; j < S; ++j) {
    TensorT<T> h = lrelu(apply(trrm_block1_[static_cast<size_t>(j)], e));
    h = lrelu(apply(trrm_block2_[static_cast<size_t>(j)], h));
    TensorT<T> u = nn::add(e, h);
    fused[static_cast<size_t>(j)] = ccf_fuse(u, td_pyr[static_cast<size_t>(j)], sd_pyr[static_cast<size_t>(j)], j);
    if (j + 1 < S) e = lrelu(apply(trrm_down_[static_cast<size_t>(j)], fused[static_cast<size_t>(j)], 2));
  }
  TensorT<T> g = fused[static_cast<size_t>(S - 1)];
  for (int j = S - 2; j >= 0; --j) {
    TensorT<T> up = nn::upsample_nearest2x(g);
    g = lrelu(apply(trrm_dec_[static_cast<size_t>(j)], nn::concat_channels<T>({up, fused[static_cast<size_t>(j)]})));
  }
  return g;
}

template <typename T>
TensorT<T> STGDNet<T>::forward(const TensorT<T>& blur, const TensorT<T>& sd,
                               const std::vector<TensorT<T>>& tds) const {
  if (!blur.defined() || blur.rank() != 4 || blur.dim(1) != 3) {
    throw ValidationError("forward: blur must be [B, 3, H, W]");
  }
  if (!sd.defined() || sd.rank() != 4 || sd.dim(1) != 2) {
    throw ValidationError("forward: sd must be [B, 2, H, W]");
  }
  if (tds.empty()) throw ValidationError("forward: at least one temporal difference is required");
  const int B = blur.dim(0), H = blur.dim(2), W = blur.dim(3);
  if (sd.dim(0) != B || sd.dim(2) != H || sd.dim(3) != W) {
    throw ValidationError("forward: sd extents do not match blur");
  }
  for (const auto& td : tds) {
    if (!td.defined() || td.rank() != 4 || td.dim(0) != B || td.dim(1) != 1 || td.dim(2) != H || td.dim(3) != W) {
      throw ValidationError("forward: every td must be [B, 1, H, W] matching blur");
    }
  }
  if (H < 8 || W < 8) throw ValidationError("forward: extents must be at least 8x8");

  const int mult = cfg_.pad_multiple();
  const int ph = (mult - H % mult) % mult;
  const int pw = (mult - W % mult) % mult;
  auto maybe_pad = [&](const TensorT<T>& x) {
    return (ph == 0 && pw == 0) ? x : nn::pad_reflect(x, 0, ph, 0, pw);
  };

  TensorT<T> blur_p = maybe_pad(blur);
  TensorT<T> b_enc = embed_blur(blur_p);
  std::vector<TensorT<T>> sd_pyr =
      cfg_.flags.use_sd ? encode_sd(maybe_pad(sd)) : zero_pyramid(B, H + ph, W + pw);

  TensorT<T> r = TensorT<T>::zeros({B, cfg_.base_channels, H + ph, W + pw});
  auto step = [&](const TensorT<T>& td) {
    TensorT<T> r_prime = sam(r, blur_p);
    std::vector<TensorT<T>> td_pyr =
        cfg_.flags.use_td ? encode_td(maybe_pad(td)) : zero_pyramid(B, H + ph, W + pw);
    r = trrm_step(r_prime, b_enc, td_pyr, sd_pyr);
  };
  if (cfg_.flags.use_trrm) {
    for (const auto& td : tds) step(td);
  } else {
    step(tds[(tds.size() - 1) / 2]);
  }

  TensorT<T> d = nn::add(blur_p, apply(conv_out_, r));
  if (ph != 0 || pw != 0) d = nn::crop(d, 0, 0, H, W);
  return d;
}

template class STGDNet<float>;
template class STGDNet<double>;

Frame restore(const STGDNet<float>& model, const Frame& blur, const QuantFrame& sd,
              const std::vector<QuantFrame>& tds) {
  validate_range(blur, 0.0f, 1.0f, "restore: blur");
  nn::Tensor blur_t = frame_to_tensor(blur);
  nn::Tensor sd_t = quant_to_tensor(sd);
  std::vector<nn::Tensor> td_ts;
  td_ts.reserve(tds.size());
  for (const auto& td : tds) td_ts.push_back(quant_to_tensor(td));
  nn::Tensor out = model.forward(blur_t, sd_t, td_ts);
  Frame f = tensor_to_frame(out);
  for (float& v : f.data) v = std::clamp(v, 0.0f, 1.0f);
  return f;
}

Frame restore_at(const STGDNet<float>& model, const CVSSample& s, int k) {
  if (k < 0 || k >= s.n) {
    throw ValidationError("restore_at: index " + std::to_string(k) + " outside [0, " + std::to_string(s.n) + ")");
  }
  return restore(model, s.blur, s.sd_seq[static_cast<size_t>(k)], s.td_seq);
}

namespace {
std::filesystem::path arch_sidecar(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension(".arch.json");
  return p;
}

nlohmann::ordered_json arch_to_json(const ArchConfig& cfg) {
  nlohmann::ordered_json j;
  j["base_channels"] = cfg.base_channels;
  j["n_scales"] = cfg.n_scales;
  j["leaky_slope"] = cfg.leaky_slope;
  j["use_sd"] = cfg.flags.use_sd;
  j["use_td"] = cfg.flags.use_td;
  j["use_ccf"] = cfg.flags.use_ccf;
  j["use_trrm"] = cfg.flags.use_trrm;
  return j;
}

ArchConfig arch_from_json(const nlohmann::json& j, const std::string& where) {
  ArchConfig cfg;
  try {
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.n_scales = j.at("n_scales").get<int>();
    cfg.leaky_slope = j.at("leaky_slope").get<float>();
    cfg.flags.use_sd = j.at("use_sd").get<bool>();
    cfg.flags.use_td = j.at("use_td").get<bool>();
    cfg.flags.use_ccf = j.at("use_ccf").get<bool>();
    cfg.flags.use_trrm = j.at("use_trrm").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return cfg;
}
}  // namespace

void save_model(const STGDNet<float>& model, const std::string& path) {
  save_checkpoint(path, snapshot_params(model.parameters()));
  const auto sidecar = arch_sidecar(path);
  std::ofstream out(sidecar);
  if (!out) throw IoError("cannot open " + sidecar.string() + " for writing");
  out << arch_to_json(model.config()).dump(2) << "\n";
  if (!out) throw IoError("short write to " + sidecar.string());
}

STGDNet<float> load_model(const std::string& path) {
  const auto sidecar = arch_sidecar(path);
  std::ifstream in(sidecar);
  if (!in) throw IoError("cannot open " + sidecar.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(sidecar.string() + ": " + e.what());
  }
  const ArchConfig cfg = arch_from_json(j, sidecar.string());
  STGDNet<float> model(cfg, 0);
  restore_params(load_checkpoint(path), model.parameters());
  return model;
}

STGDNet<float> load_model(const std::string& path, const ArchConfig& expected) {
  STGDNet<float> model = load_model(path);
  const ArchConfig& got = model.config();
  auto mismatch = [&](const std::string& field, auto a, auto b) {
    throw ValidationError("load_model: arch mismatch on " + field + ": checkpoint has " + std::to_string(a) +
                          ", expected " + std::to_string(b));
  };
  if (got.base_channels != expected.base_channels) {
    mismatch("base_channels", got.base_channels, expected.base_channels);
  }
  if (got.n_scales != expected.n_scales) mismatch("n_scales", got.n_scales, expected.n_scales);
  if (got.flags.use_sd != expected.flags.use_sd) mismatch("use_sd", got.flags.use_sd, expected.flags.use_sd);
  if (got.flags.use_td != expected.flags.use_td) mismatch("use_td", got.flags.use_td, expected.flags.use_td);
  if (got.flags.use_ccf != expected.flags.use_ccf) mismatch("use_ccf", got.flags.use_ccf, expected.flags.use_ccf);
  if (got.flags.use_trrm != expected.flags.use_trrm) {
    mismatch("use_trrm", got.flags.use_trrm, expected.flags.use_trrm);
  }
  return model;
}

}  // namespace cvsdeblur
