#include "tanger/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace tanger {

namespace {

constexpr char kMagic[5] = {'T', 'N', 'G', 'R', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void append_record(std::string& out, const std::string& name,
                   const std::vector<std::size_t>& extents, DType dtype,
                   std::span<const double> values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(extents.size()));
  for (std::size_t e : extents) put_u32(out, static_cast<std::uint32_t>(e));
  out.push_back(dtype == DType::f32 ? '\0' : '\1');
  if (dtype == DType::f32) {
    for (double v : values) put_f32(out, static_cast<float>(v));
  } else {
    for (double v : values) put_f64(out, v);
  }
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  bool at_end() const { return pos_ == data_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
    pos_ += 8;
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw std::runtime_error("checkpoint file is truncated");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Codebook& codebook, const std::string& config_text) {
  std::string out(kMagic, sizeof(kMagic));
  for (const auto& [name, t] : params.named()) {
    if (!t->defined()) continue;  // codebook-only containers carry no parameters
    append_record(out, name, t->shape(), t->dtype(), t->values());
  }
  append_record(out, "codebook.centroids", {codebook.k, codebook.dim}, DType::f64,
                codebook.centroids);
  std::vector<double> config_bytes;
  config_bytes.reserve(config_text.size());
  for (unsigned char c : config_text) config_bytes.push_back(static_cast<double>(c));
  append_record(out, "__config__", {config_bytes.size()}, DType::f32, config_bytes);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  }

  Checkpoint ckpt;
  while (!r.at_end()) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw std::runtime_error("checkpoint record name too long");
    const std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw std::runtime_error("checkpoint record rank too large");
    std::vector<std::size_t> extents(rank);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      extents[i] = r.u32();
      count *= extents[i];
    }
    const std::uint8_t tag = r.u8();
    if (tag > 1) throw std::runtime_error("unknown dtype tag in checkpoint record " + name);
    std::vector<double> values(count);
    if (tag == 0) {
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = static_cast<double>(std::bit_cast<float>(r.u32()));
      }
    } else {
      for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(r.u64());
    }

    if (name == "__config__") {
      ckpt.config_text.clear();
      for (double v : values) ckpt.config_text.push_back(static_cast<char>(v));
    } else if (name == "codebook.centroids") {
      if (rank != 2) throw std::runtime_error("codebook record must be rank 2");
      ckpt.codebook.k = extents[0];
      ckpt.codebook.dim = extents[1];
      ckpt.codebook.centroids = values;
      ckpt.tensors.emplace(name, Tensor::from_data(extents, std::move(values)));
    } else {
      ckpt.tensors.emplace(
          name, Tensor::from_data(extents, std::move(values),
                                  tag == 0 ? DType::f32 : DType::f64));
    }
  }
  return ckpt;
}

ModelParams params_from_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt) {
  ModelParams params = make_params(cfg, 0);
  for (auto& [name, t] : params.named()) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) {
      throw std::runtime_error("checkpoint is missing parameter '" + name + "'");
    }
    if (it->second.shape() != t->shape()) {
      throw std::runtime_error("checkpoint parameter '" + name +
                               "' has a shape that does not match the config");
    }
    auto src = it->second.values();
    auto dst = t->mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i];
  }
  return params;
}

}  // namespace tanger
