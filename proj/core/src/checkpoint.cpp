#include "cvsdeblur/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <memory>
#include <set>

#include "cvsdeblur/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace cvsdeblur {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_bytes(std::FILE* f, const void* p, size_t n, const std::string& path) {
  if (std::fwrite(p, 1, n, f) != n) throw IoError("checkpoint: short write to " + path);
}

void read_bytes(std::FILE* f, void* p, size_t n, const std::string& path) {
  if (std::fread(p, 1, n, f) != n) throw IoError("checkpoint: truncated file " + path);
}

template <typename U>
void write_pod(std::FILE* f, U v, const std::string& path) {
  write_bytes(f, &v, sizeof(v), path);
}

template <typename U>
U read_pod(std::FILE* f, const std::string& path) {
  U v;
  read_bytes(f, &v, sizeof(v), path);
  return v;
}

constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::set<std::string> seen;
  for (const auto& t : tensors) {
    if (t.name.empty()) throw ValidationError("checkpoint: tensor with empty name");
    if (!seen.insert(t.name).second) throw ValidationError("checkpoint: duplicate tensor name '" + t.name + "'");
    std::int64_t n = 1;
    for (auto e : t.extents) {
      if (e <= 0) throw ValidationError("checkpoint: non-positive extent in '" + t.name + "'");
      n *= e;
    }
    if (n != static_cast<std::int64_t>(t.data.size())) {
      throw ValidationError("checkpoint: extents of '" + t.name + "' do not match payload size");
    }
  }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
  write_pod<std::uint32_t>(f.get(), kVersion, path);
  write_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(tensors.size()), path);
  for (const auto& t : tensors) {
    write_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(t.name.size()), path);
    write_bytes(f.get(), t.name.data(), t.name.size(), path);
    write_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(t.extents.size()), path);
    for (auto e : t.extents) write_pod<std::uint64_t>(f.get(), static_cast<std::uint64_t>(e), path);
    write_bytes(f.get(), t.data.data(), t.data.size() * sizeof(float), path);
  }
  if (std::fflush(f.get()) != 0) throw IoError("checkpoint: flush failed for " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("checkpoint: cannot open " + path);
  const auto version = read_pod<std::uint32_t>(f.get(), path);
  if (version != kVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version) + " in " + path);
  }
  const auto count = read_pod<std::uint32_t>(f.get(), path);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = read_pod<std::uint32_t>(f.get(), path);
    if (name_len == 0 || name_len > 4096) throw IoError("checkpoint: implausible name length in " + path);
    t.name.resize(name_len);
    read_bytes(f.get(), t.name.data(), name_len, path);
    if (!seen.insert(t.name).second) throw ValidationError("checkpoint: duplicate tensor name '" + t.name + "'");
    const auto rank = read_pod<std::uint32_t>(f.get(), path);
    if (rank > 8) throw IoError("checkpoint: implausible rank in " + path);
    std::int64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto e = read_pod<std::uint64_t>(f.get(), path);
      if (e == 0 || e > (1ull << 32)) throw IoError("checkpoint: implausible extent in " + path);
      t.extents.push_back(static_cast<std::int64_t>(e));
      n *= static_cast<std::int64_t>(e);
    }
    t.data.resize(static_cast<size_t>(n));
    read_bytes(f.get(), t.data.data(), static_cast<size_t>(n) * sizeof(float), path);
    tensors.push_back(std::move(t));
  }
  if (std::fgetc(f.get()) != EOF) throw IoError("checkpoint: trailing bytes in " + path);
  return tensors;
}

std::vector<NamedTensor> snapshot_params(const std::vector<nn::Tensor>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    if (p.name().empty()) throw ValidationError("snapshot_params: unnamed parameter");
    NamedTensor t;
    t.name = p.name();
    for (int d : p.shape()) t.extents.push_back(d);
    t.data = p.value();
    out.push_back(std::move(t));
  }
  return out;
}

void restore_params(const std::vector<NamedTensor>& tensors, std::vector<nn::Tensor>& params) {
  if (tensors.size() != params.size()) {
    throw ValidationError("restore_params: checkpoint has " + std::to_string(tensors.size()) +
                          " tensors, model has " + std::to_string(params.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    auto& p = params[i];
    if (t.name != p.name()) {
      throw ValidationError("restore_params: tensor '" + t.name + "' where '" + p.name() + "' was expected");
    }
    std::vector<std::int64_t> extents;
    for (int d : p.shape()) extents.push_back(d);
    if (extents != t.extents) throw ValidationError("restore_params: shape mismatch for '" + t.name + "'");
    p.value() = t.data;
  }
}

}  // namespace cvsdeblur
