#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/model.hpp"
#include "ndec/session_io.hpp"

namespace ndec {

// Model checkpoint, little-endian:
//   "NDCK" | u32 version=1 | u32 arch | u64 n_probes, n1, n2, n_lstm
//   u32 feature mode | f64 window | u64 m | f64 dropout | u64 tensor count
//   per tensor (parameters, then buffers): u32 name length | name | u64 size | f32 data[size]
inline constexpr std::array<char, 4> kCheckpointMagic{'N', 'D', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class F>
void for_each_tensor(const Net& net, F&& f) {
  std::visit(
      [&](const auto& n) {
        for_each_param(n, f);
        for_each_buffer(n, f);
      },
      net);
}

template <class F>
void for_each_tensor(Net& net, F&& f) {
  std::visit(
      [&](auto& n) {
        for_each_param(n, f);
        for_each_buffer(n, f);
      },
      net);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Model& m) {
  io::Writer w(os);
  w.put_bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(m.arch));
  for (std::size_t v : {m.shape.n_probes, m.shape.n1, m.shape.n2, m.shape.n_lstm})
    w.put(static_cast<std::uint64_t>(v));
  w.put(static_cast<std::uint32_t>(m.features.mode));
  w.put(m.features.window);
  w.put(static_cast<std::uint64_t>(m.features.m));
  w.put(m.dropout);
  std::uint64_t count = 0;
  detail::for_each_tensor(m.net, [&](auto, auto) { ++count; });
  w.put(count);
  detail::for_each_tensor(m.net, [&](std::string_view name, Eigen::Map<const Vec> t) {
    w.put(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put(static_cast<std::uint64_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) w.put(static_cast<float>(t(i)));
  });
}

inline Model read_checkpoint(std::istream& is) {
  io::Reader r(is);
  std::array<char, 4> magic{};
  r.read(magic.data(), magic.size());
  require(magic == kCheckpointMagic, ErrorCode::BadMagic, "not a model checkpoint");
  require(r.get<std::uint32_t>() == kCheckpointVersion, ErrorCode::VersionMismatch,
          "unsupported checkpoint version");
  const auto arch_tag = r.get<std::uint32_t>();
  require(arch_tag < kAllArchs.size(), ErrorCode::ConfigMismatch, "unknown architecture tag");
  LayerShape shape;
  shape.n_probes = r.get<std::uint64_t>();
  shape.n1 = r.get<std::uint64_t>();
  shape.n2 = r.get<std::uint64_t>();
  shape.n_lstm = r.get<std::uint64_t>();
  FeatureConfig fc;
  const auto mode = r.get<std::uint32_t>();
  require(mode <= 2, ErrorCode::ConfigMismatch, "unknown feature mode");
  fc.mode = static_cast<FeatureMode>(mode);
  fc.window = r.get<double>();
  fc.m = r.get<std::uint64_t>();
  const double dropout = r.get<double>();

  Model m = make_model(static_cast<Arch>(arch_tag), shape, 0, fc);
  m.dropout = dropout;
  std::uint64_t expected = 0;
  detail::for_each_tensor(m.net, [&](auto, auto) { ++expected; });
  require(r.get<std::uint64_t>() == expected, ErrorCode::ConfigMismatch,
          "tensor count does not match architecture");
  detail::for_each_tensor(m.net, [&](std::string_view name, Eigen::Map<Vec> t) {
    const auto len = r.get<std::uint32_t>();
    const auto stored = r.get_array<char>(len);
    require(std::string_view(stored.data(), stored.size()) == name, ErrorCode::ConfigMismatch,
            "unexpected tensor " + std::string(stored.begin(), stored.end()));
    require(r.get<std::uint64_t>() == static_cast<std::uint64_t>(t.size()),
            ErrorCode::ShapeMismatch, "tensor " + std::string(name) + " has the wrong size");
    const auto values = r.get_array<float>(static_cast<std::uint64_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = values[static_cast<std::size_t>(i)];
  });
  reset_state(m);
  return m;
}

inline void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + path.string());
  write_checkpoint(os, m);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed: " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace ndec
