#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ndec/error.hpp"
#include "ndec/train.hpp"

namespace ndec {

// Training configuration file: one `key = value` per line, '#' comments.
// Keys: epochs, learning_rate, dropout, weight_decay, l2_loss, batch_size,
// seed, shuffle (true/false). Missing keys keep the values of `base`.

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc{} && ptr == v.data() + v.size(), ErrorCode::InvalidArgument,
          "bad value for " + key + ": '" + v + "'");
  return out;
}

}  // namespace detail

inline TrainConfig read_train_config(std::istream& is, TrainConfig cfg = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument,
            "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key == "epochs") cfg.epochs = detail::parse_value<int>(key, val);
    else if (key == "learning_rate") cfg.learning_rate = detail::parse_value<double>(key, val);
    else if (key == "dropout") cfg.dropout = detail::parse_value<double>(key, val);
    else if (key == "weight_decay") cfg.weight_decay = detail::parse_value<double>(key, val);
    else if (key == "l2_loss") cfg.l2_loss = detail::parse_value<double>(key, val);
    else if (key == "batch_size") cfg.batch_size = detail::parse_value<std::size_t>(key, val);
    else if (key == "seed") cfg.seed = detail::parse_value<std::uint64_t>(key, val);
    else if (key == "shuffle") {
      require(val == "true" || val == "false", ErrorCode::InvalidArgument, "shuffle must be true or false");
      cfg.shuffle = val == "true";
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown training key '" + key + "'");
    }
  }
  validate(cfg);
  return cfg;
}

inline TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  return read_train_config(is, base);
}

inline void write_train_config(std::ostream& os, const TrainConfig& c) {
  os.precision(17);
  os << "epochs = " << c.epochs << '\n'
     << "learning_rate = " << c.learning_rate << '\n'
     << "dropout = " << c.dropout << '\n'
     << "weight_decay = " << c.weight_decay << '\n'
     << "l2_loss = " << c.l2_loss << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "seed = " << c.seed << '\n'
     << "shuffle = " << (c.shuffle ? "true" : "false") << '\n';
}

}  // namespace ndec
