#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "matd3/net.hpp"

namespace matd3::nn {

/// Versioned binary network record, all integers and doubles little-endian:
///   magic "MTD3" | u32 version | u32 layer_count | u32 sizes[layer_count]
///   | u8 output_activation | f64 lo | f64 hi
///   | f64 params (per layer: weight row-major, then bias)
///   | u8 has_adam | [u64 t | f64 beta1 beta2 eps | f64 m params | f64 v params]
/// Round-trips are bit-exact.
inline constexpr char kCheckpointMagic[4] = {'M', 'T', 'D', '3'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!is) throw Error("checkpoint: unexpected end of stream");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline void save_net(std::ostream& os, const DenseNetd& net, const AdamStated* adam = nullptr) {
  os.write(kCheckpointMagic, 4);
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.layer_sizes.size()));
  for (const int s : net.layer_sizes) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s));
  detail::write_le<std::uint8_t>(
      os, net.output_activation == OutputActivation::kSigmoidScaled ? 1 : 0);
  detail::write_le<double>(os, net.sigmoid_lo);
  detail::write_le<double>(os, net.sigmoid_hi);
  for_each_param(net, [&](double v) { detail::write_le<double>(os, v); });
  detail::write_le<std::uint8_t>(os, adam ? 1 : 0);
  if (adam) {
    detail::write_le<std::uint64_t>(os, adam->t);
    detail::write_le<double>(os, adam->beta1);
    detail::write_le<double>(os, adam->beta2);
    detail::write_le<double>(os, adam->eps);
    for (std::size_t k = 0; k < adam->m_w.size(); ++k) {
      const auto& mw = adam->m_w[k];
      for (Eigen::Index i = 0; i < mw.rows(); ++i)
        for (Eigen::Index j = 0; j < mw.cols(); ++j) detail::write_le<double>(os, mw(i, j));
      for (Eigen::Index i = 0; i < adam->m_b[k].size(); ++i)
        detail::write_le<double>(os, adam->m_b[k](i));
    }
    for (std::size_t k = 0; k < adam->v_w.size(); ++k) {
      const auto& vw = adam->v_w[k];
      for (Eigen::Index i = 0; i < vw.rows(); ++i)
        for (Eigen::Index j = 0; j < vw.cols(); ++j) detail::write_le<double>(os, vw(i, j));
      for (Eigen::Index i = 0; i < adam->v_b[k].size(); ++i)
        detail::write_le<double>(os, adam->v_b[k](i));
    }
  }
}

struct LoadedNet {
  DenseNetd net;
  bool has_adam = false;
  AdamStated adam;
};

inline LoadedNet load_net(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw Error("checkpoint: bad magic, not a MTD3 network record");
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  const auto layer_count = detail::read_le<std::uint32_t>(is);
  if (layer_count < 2) throw Error("checkpoint: layer count must be >= 2");
  std::vector<int> sizes(layer_count);
  for (auto& s : sizes) s = static_cast<int>(detail::read_le<std::uint32_t>(is));

  LoadedNet out;
  out.net.layer_sizes = sizes;
  const auto act = detail::read_le<std::uint8_t>(is);
  out.net.output_activation =
      act == 1 ? OutputActivation::kSigmoidScaled : OutputActivation::kIdentity;
  out.net.sigmoid_lo = detail::read_le<double>(is);
  out.net.sigmoid_hi = detail::read_le<double>(is);
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    out.net.weights.emplace_back(sizes[k + 1], sizes[k]);
    out.net.biases.emplace_back(sizes[k + 1]);
  }
  for_each_param(out.net, [&](double& v) { v = detail::read_le<double>(is); });
  out.has_adam = detail::read_le<std::uint8_t>(is) != 0;
  if (out.has_adam) {
    out.adam = make_adam_state(out.net);
    out.adam.t = detail::read_le<std::uint64_t>(is);
    out.adam.beta1 = detail::read_le<double>(is);
    out.adam.beta2 = detail::read_le<double>(is);
    out.adam.eps = detail::read_le<double>(is);
    for (std::size_t k = 0; k < out.adam.m_w.size(); ++k) {
      auto& mw = out.adam.m_w[k];
      for (Eigen::Index i = 0; i < mw.rows(); ++i)
        for (Eigen::Index j = 0; j < mw.cols(); ++j) mw(i, j) = detail::read_le<double>(is);
      for (Eigen::Index i = 0; i < out.adam.m_b[k].size(); ++i)
        out.adam.m_b[k](i) = detail::read_le<double>(is);
    }
    for (std::size_t k = 0; k < out.adam.v_w.size(); ++k) {
      auto& vw = out.adam.v_w[k];
      for (Eigen::Index i = 0; i < vw.rows(); ++i)
        for (Eigen::Index j = 0; j < vw.cols(); ++j) vw(i, j) = detail::read_le<double>(is);
      for (Eigen::Index i = 0; i < out.adam.v_b[k].size(); ++i)
        out.adam.v_b[k](i) = detail::read_le<double>(is);
    }
  }
  return out;
}

}  // namespace matd3::nn
