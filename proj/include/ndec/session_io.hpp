#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "ndec/error.hpp"
#include "ndec/session.hpp"

namespace ndec {

// NDEC v1, little-endian:
//   "NDEC" | u32 version=1 | u32 n_probes | f64 sample_rate | u64 T
//   f32 vx[T] | f32 vy[T] | f32 tx[T] | f32 ty[T]
//   per probe: u64 count | f64 timestamps[count]
inline constexpr std::array<char, 4> kSessionMagic{'N', 'D', 'E', 'C'};
inline constexpr std::uint32_t kSessionVersion = 1;

static_assert(std::endian::native == std::endian::little, "NDEC I/O assumes a little-endian host");

namespace io {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  template <class T>
  void put_array(const std::vector<T>& v) {
    if (!v.empty())
      os_.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

  void put_bytes(const char* p, std::size_t n) { os_.write(p, static_cast<std::streamsize>(n)); }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <class T>
  T get() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }

  template <class T>
  std::vector<T> get_array(std::uint64_t n) {
    // Refuse sizes the stream cannot possibly hold before allocating.
    require(n <= remaining() / sizeof(T), ErrorCode::TruncatedPayload, "array exceeds file size");
    std::vector<T> v(n);
    if (n) read(reinterpret_cast<char*>(v.data()), n * sizeof(T));
    return v;
  }

  void read(char* p, std::size_t n) {
    is_.read(p, static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(is_.gcount()) == n, ErrorCode::TruncatedPayload,
            "unexpected end of file");
  }

  std::uint64_t remaining() {
    const auto here = is_.tellg();
    is_.seekg(0, std::ios::end);
    const auto end = is_.tellg();
    is_.seekg(here);
    return static_cast<std::uint64_t>(end - here);
  }

 private:
  std::istream& is_;
};

}  // namespace io

inline void write_session(std::ostream& os, const Session& s) {
  validate(s);
  io::Writer w(os);
  w.put_bytes(kSessionMagic.data(), kSessionMagic.size());
  w.put(kSessionVersion);
  w.put(s.n_probes);
  w.put(s.sample_rate);
  w.put(static_cast<std::uint64_t>(s.n_samples()));
  w.put_array(s.vx);
  w.put_array(s.vy);
  w.put_array(s.tx);
  w.put_array(s.ty);
  for (const auto& train : s.spikes) {
    w.put(static_cast<std::uint64_t>(train.size()));
    w.put_array(train);
  }
}

inline Session read_session(std::istream& is) {
  io::Reader r(is);
  std::array<char, 4> magic{};
  r.read(magic.data(), magic.size());
  require(magic == kSessionMagic, ErrorCode::BadMagic, "not an NDEC session file");
  const auto version = r.get<std::uint32_t>();
  require(version == kSessionVersion, ErrorCode::VersionMismatch,
          "unsupported NDEC version " + std::to_string(version));
  Session s;
  s.n_probes = r.get<std::uint32_t>();
  s.sample_rate = r.get<double>();
  const auto n = r.get<std::uint64_t>();
  s.vx = r.get_array<float>(n);
  s.vy = r.get_array<float>(n);
  s.tx = r.get_array<float>(n);
  s.ty = r.get_array<float>(n);
  s.spikes.resize(s.n_probes);
  for (auto& train : s.spikes) train = r.get_array<double>(r.get<std::uint64_t>());
  validate(s);
  return s;
}

inline void save_session(const Session& s, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_session(os, s);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed for " + path.string());
}

inline Session load_session(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  return read_session(is);
}

/// 64-bit FNV-1a over a file's bytes; recorded in run manifests.
inline std::string content_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  std::array<char, 1 << 16> buf{};
  while (is) {
    is.read(buf.data(), buf.size());
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace ndec
