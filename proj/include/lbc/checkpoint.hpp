#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbc/network.hpp"
#include "lbc/nmformat.hpp"
#include "lbc/tensor.hpp"

// Binary artifact I/O. All integers and IEEE-754 floats are little-endian;
// the byte-exact layouts are documented in docs/formats.md and round-trips
// are bit-exact.

namespace lbc {
namespace io {

inline void put_bytes(std::ostream& os, const void* p, std::size_t count) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(count));
  if (!os) throw std::runtime_error("write failed");
}

inline void get_bytes(std::istream& is, void* p, std::size_t count, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(is.gcount()) != count) {
    throw std::runtime_error(std::string("truncated file while reading ") + what);
  }
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  put_bytes(os, b, 4);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  std::uint8_t b[4];
  get_bytes(is, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  put_bytes(os, b, 8);
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
  std::uint8_t b[8];
  get_bytes(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

inline std::uint8_t get_u8(std::istream& is, const char* what) {
  std::uint8_t v;
  get_bytes(is, &v, 1, what);
  return v;
}

template <typename Real>
void put_real(std::ostream& os, Real v) {
  if constexpr (sizeof(Real) == 4) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
  } else {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
  }
}

template <typename Real>
Real get_real(std::istream& is, const char* what) {
  Real v;
  if constexpr (sizeof(Real) == 4) {
    const std::uint32_t bits = get_u32(is, what);
    std::memcpy(&v, &bits, 4);
  } else {
    const std::uint64_t bits = get_u64(is, what);
    std::memcpy(&v, &bits, 8);
  }
  return v;
}

template <typename Real>
void put_payload(std::ostream& os, const std::vector<Real>& data) {
  for (Real v : data) put_real(os, v);
}

template <typename Real>
void get_payload(std::istream& is, std::vector<Real>& data, std::size_t count, const char* what) {
  data.resize(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = get_real<Real>(is, what);
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  put_bytes(os, s.data(), s.size());
}

inline std::string get_string(std::istream& is, const char* what) {
  const std::uint32_t len = get_u32(is, what);
  std::string s(len, '\0');
  if (len > 0) get_bytes(is, s.data(), len, what);
  return s;
}

inline void put_shape(std::ostream& os, const Shape& shape) {
  put_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t e : shape) put_u64(os, e);
}

inline Shape get_shape(std::istream& is, const char* what) {
  const std::uint32_t ndim = get_u32(is, what);
  Shape shape(ndim);
  for (auto& e : shape) e = static_cast<std::size_t>(get_u64(is, what));
  return shape;
}

inline void check_magic(std::istream& is, const char* magic, const std::string& path) {
  char got[4];
  get_bytes(is, got, 4, "magic");
  if (std::memcmp(got, magic, 4) != 0) {
    throw std::runtime_error(path + ": bad magic, expected \"" + magic + "\"");
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return is;
}

}  // namespace io

// ---------------------------------------------------------------------------
// Checkpoint container, magic "LBC1".

template <typename Real>
void save_checkpoint(const std::string& path, const Network<Real>& net) {
  auto os = io::open_out(path);
  io::put_bytes(os, "LBC1", 4);
  io::put_u32(os, 1);                                         // version
  io::put_u32(os, static_cast<std::uint32_t>(sizeof(Real)));  // scalar width
  io::put_u32(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    io::put_u8(os, static_cast<std::uint8_t>(layer.kind));
    io::put_u8(os, layer.sparsifiable ? 1 : 0);
    io::put_u8(os, layer.has_bias ? 1 : 0);
    io::put_string(os, layer.name);
    io::put_shape(os, layer.has_weight() ? layer.weight.shape : Shape{});
    if (layer.has_weight()) io::put_payload(os, layer.weight.data);
    if (layer.has_bias) {
      io::put_u64(os, layer.bias.numel());
      io::put_payload(os, layer.bias.data);
    }
  }
}

/// Scalar width (4 or 8) recorded in an LBC1 or NMPK file.
inline std::size_t peek_scalar_width(const std::string& path) {
  auto is = io::open_in(path);
  char magic[4];
  io::get_bytes(is, magic, 4, "magic");
  if (std::memcmp(magic, "LBC1", 4) != 0 && std::memcmp(magic, "NMPK", 4) != 0) {
    throw std::runtime_error(path + ": not a checkpoint or packed file");
  }
  io::get_u32(is, "version");
  return io::get_u32(is, "scalar width");
}

template <typename Real>
Network<Real> load_checkpoint(const std::string& path) {
  auto is = io::open_in(path);
  io::check_magic(is, "LBC1", path);
  const std::uint32_t version = io::get_u32(is, "version");
  if (version != 1) throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t width = io::get_u32(is, "scalar width");
  if (width != sizeof(Real)) {
    throw std::runtime_error(path + ": scalar width " + std::to_string(width) +
                             " does not match requested precision " + std::to_string(sizeof(Real) * 8));
  }
  const std::uint32_t count = io::get_u32(is, "layer count");
  Network<Real> net;
  net.layers.resize(count);
  for (auto& layer : net.layers) {
    const std::uint8_t kind = io::get_u8(is, "layer kind");
    if (kind > 3) throw std::runtime_error(path + ": unknown layer kind " + std::to_string(kind));
    layer.kind = static_cast<LayerKind>(kind);
    layer.sparsifiable = io::get_u8(is, "sparsifiable flag") != 0;
    layer.has_bias = io::get_u8(is, "bias flag") != 0;
    layer.name = io::get_string(is, "layer name");
    const Shape shape = io::get_shape(is, "weight shape");
    if (!shape.empty()) {
      layer.weight.shape = shape;
      io::get_payload(is, layer.weight.data, shape_numel(shape), "weight payload");
    }
    if (layer.has_bias) {
      const std::uint64_t blen = io::get_u64(is, "bias extent");
      layer.bias.shape = {static_cast<std::size_t>(blen)};
      io::get_payload(is, layer.bias.data, static_cast<std::size_t>(blen), "bias payload");
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Mask container, magic "LBCM": one bit per weight, flat row-major order,
// LSB-first within each byte.

template <typename Real>
void save_masks(const std::string& path, const Network<Real>& net, const MaskSet<Real>& masks) {
  if (masks.size() != net.layers.size()) {
    throw std::invalid_argument("mask set size does not match layer count");
  }
  auto os = io::open_out(path);
  io::put_bytes(os, "LBCM", 4);
  io::put_u32(os, 1);
  io::put_u32(os, static_cast<std::uint32_t>(masks.size()));
  for (std::size_t i = 0; i < masks.size(); ++i) {
    io::put_u8(os, static_cast<std::uint8_t>(net.layers[i].kind));
    const Tensor<Real>& mask = masks[i];
    io::put_u8(os, mask.empty() ? 0 : 1);
    if (mask.empty()) continue;
    io::put_shape(os, mask.shape);
    std::vector<std::uint8_t> bytes((mask.numel() + 7) / 8, 0);
    for (std::size_t k = 0; k < mask.numel(); ++k) {
      if (mask.data[k] != Real{0}) bytes[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    }
    io::put_bytes(os, bytes.data(), bytes.size());
  }
}

template <typename Real>
MaskSet<Real> load_masks(const std::string& path) {
  auto is = io::open_in(path);
  io::check_magic(is, "LBCM", path);
  const std::uint32_t version = io::get_u32(is, "version");
  if (version != 1) throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t count = io::get_u32(is, "layer count");
  MaskSet<Real> masks(count);
  for (auto& mask : masks) {
    io::get_u8(is, "layer kind");
    if (io::get_u8(is, "mask flag") == 0) continue;
    const Shape shape = io::get_shape(is, "mask shape");
    mask = Tensor<Real>(shape);
    std::vector<std::uint8_t> bytes((mask.numel() + 7) / 8);
    io::get_bytes(is, bytes.data(), bytes.size(), "mask bits");
    for (std::size_t k = 0; k < mask.numel(); ++k) {
      mask.data[k] = ((bytes[k / 8] >> (k % 8)) & 1u) ? Real{1} : Real{0};
    }
  }
  return masks;
}

// ---------------------------------------------------------------------------
// Packed network container, magic "NMPK".

template <typename Real>
struct PackedLayer {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  enum class Storage : std::uint8_t { kNone = 0, kDense = 1, kPacked = 2 };
  Storage storage = Storage::kNone;
  Tensor<Real> dense_weight;
  PackedNm<Real> packed;
  bool has_bias = false;
  Tensor<Real> bias;
};

template <typename Real>
struct PackedNetwork {
  int n = 0;
  int m = 0;
  std::vector<PackedLayer<Real>> layers;
};

/// Packs every masked layer of a trained network; layers without a mask are
/// stored dense.
template <typename Real>
PackedNetwork<Real> pack_network(const Network<Real>& net, const MaskSet<Real>& masks, int n, int m) {
  if (masks.size() != net.layers.size()) {
    throw std::invalid_argument("pack_network: mask set size does not match layer count");
  }
  PackedNetwork<Real> out;
  out.n = n;
  out.m = m;
  out.layers.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer<Real>& layer = net.layers[i];
    PackedLayer<Real>& pl = out.layers[i];
    pl.kind = layer.kind;
    pl.name = layer.name;
    pl.has_bias = layer.has_bias;
    if (layer.has_bias) pl.bias = layer.bias;
    if (!layer.has_weight()) continue;
    if (masks[i].empty()) {
      pl.storage = PackedLayer<Real>::Storage::kDense;
      pl.dense_weight = layer.weight;
    } else {
      const GroupView view = make_group_view(i, layer.weight.shape, static_cast<std::size_t>(m), layer.kind);
      pl.storage = PackedLayer<Real>::Storage::kPacked;
      pl.packed = pack(layer.weight, masks[i], view, n, m, layer.kind);
    }
  }
  return out;
}

/// Reconstructs a dense network; packed layers come back with zeros at the
/// dropped slots, i.e. already masked.
template <typename Real>
Network<Real> unpack_network(const PackedNetwork<Real>& pn) {
  Network<Real> net;
  net.layers.resize(pn.layers.size());
  for (std::size_t i = 0; i < pn.layers.size(); ++i) {
    const PackedLayer<Real>& pl = pn.layers[i];
    Layer<Real>& layer = net.layers[i];
    layer.kind = pl.kind;
    layer.name = pl.name;
    layer.has_bias = pl.has_bias;
    if (pl.has_bias) layer.bias = pl.bias;
    switch (pl.storage) {
      case PackedLayer<Real>::Storage::kNone:
        break;
      case PackedLayer<Real>::Storage::kDense:
        layer.weight = pl.dense_weight;
        break;
      case PackedLayer<Real>::Storage::kPacked:
        layer.weight = unpack(pl.packed);
        layer.sparsifiable = true;
        break;
    }
  }
  return net;
}

template <typename Real>
void save_packed_network(const std::string& path, const PackedNetwork<Real>& pn) {
  auto os = io::open_out(path);
  io::put_bytes(os, "NMPK", 4);
  io::put_u32(os, 1);
  io::put_u32(os, static_cast<std::uint32_t>(sizeof(Real)));
  io::put_u32(os, static_cast<std::uint32_t>(pn.n));
  io::put_u32(os, static_cast<std::uint32_t>(pn.m));
  io::put_u32(os, static_cast<std::uint32_t>(pn.layers.size()));
  for (const auto& pl : pn.layers) {
    io::put_u8(os, static_cast<std::uint8_t>(pl.kind));
    io::put_u8(os, static_cast<std::uint8_t>(pl.storage));
    io::put_u8(os, pl.has_bias ? 1 : 0);
    io::put_string(os, pl.name);
    if (pl.storage == PackedLayer<Real>::Storage::kDense) {
      io::put_shape(os, pl.dense_weight.shape);
      io::put_payload(os, pl.dense_weight.data);
    } else if (pl.storage == PackedLayer<Real>::Storage::kPacked) {
      io::put_shape(os, pl.packed.logical_shape);
      io::put_payload(os, pl.packed.values);
      io::put_u64(os, pl.packed.index_bits.size());
      io::put_bytes(os, pl.packed.index_bits.data(), pl.packed.index_bits.size());
    }
    if (pl.has_bias) {
      io::put_u64(os, pl.bias.numel());
      io::put_payload(os, pl.bias.data);
    }
  }
}

template <typename Real>
PackedNetwork<Real> load_packed_network(const std::string& path) {
  auto is = io::open_in(path);
  io::check_magic(is, "NMPK", path);
  const std::uint32_t version = io::get_u32(is, "version");
  if (version != 1) throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t width = io::get_u32(is, "scalar width");
  if (width != sizeof(Real)) {
    throw std::runtime_error(path + ": scalar width " + std::to_string(width) +
                             " does not match requested precision " + std::to_string(sizeof(Real) * 8));
  }
  PackedNetwork<Real> pn;
  pn.n = static_cast<int>(io::get_u32(is, "n"));
  pn.m = static_cast<int>(io::get_u32(is, "m"));
  const std::uint32_t count = io::get_u32(is, "layer count");
  pn.layers.resize(count);
  for (auto& pl : pn.layers) {
    const std::uint8_t kind = io::get_u8(is, "layer kind");
    if (kind > 3) throw std::runtime_error(path + ": unknown layer kind " + std::to_string(kind));
    pl.kind = static_cast<LayerKind>(kind);
    const std::uint8_t storage = io::get_u8(is, "storage tag");
    if (storage > 2) throw std::runtime_error(path + ": unknown storage tag " + std::to_string(storage));
    pl.storage = static_cast<typename PackedLayer<Real>::Storage>(storage);
    pl.has_bias = io::get_u8(is, "bias flag") != 0;
    pl.name = io::get_string(is, "layer name");
    if (pl.storage == PackedLayer<Real>::Storage::kDense) {
      const Shape shape = io::get_shape(is, "weight shape");
      pl.dense_weight.shape = shape;
      io::get_payload(is, pl.dense_weight.data, shape_numel(shape), "weight payload");
    } else if (pl.storage == PackedLayer<Real>::Storage::kPacked) {
      pl.packed.n = pn.n;
      pl.packed.m = pn.m;
      pl.packed.layout = pl.kind;
      pl.packed.logical_shape = io::get_shape(is, "packed shape");
      const std::size_t total = shape_numel(pl.packed.logical_shape);
      if (pn.m <= 0 || total % static_cast<std::size_t>(pn.m) != 0) {
        throw std::runtime_error(path + ": packed layer size not divisible by m");
      }
      const std::size_t values = total / static_cast<std::size_t>(pn.m) * static_cast<std::size_t>(pn.n);
      io::get_payload(is, pl.packed.values, values, "packed values");
      const std::uint64_t nbytes = io::get_u64(is, "index byte count");
      pl.packed.index_bits.resize(static_cast<std::size_t>(nbytes));
      if (nbytes > 0) io::get_bytes(is, pl.packed.index_bits.data(), pl.packed.index_bits.size(), "index bits");
    }
    if (pl.has_bias) {
      const std::uint64_t blen = io::get_u64(is, "bias extent");
      pl.bias.shape = {static_cast<std::size_t>(blen)};
      io::get_payload(is, pl.bias.data, static_cast<std::size_t>(blen), "bias payload");
    }
  }
  return pn;
}

}  // namespace lbc
