#pragma once

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "mplab/errors.hpp"
#include "mplab/tensor/matrix.hpp"

// Checkpoint text format, version 1:
//
//   mplab-checkpoint 1
//   meta <key> <value>                      (zero or more)
//   section <name> <tensor-count>
//   param <layer-index> <name> <rows> <cols>
//   <rows*cols values, row-major, shortest round-trip decimal>
//   ...
//   end
//
// Values are written with std::to_chars so that a save/load cycle is
// bit-exact and identical parameters always produce identical bytes.

namespace mplab::nn {

inline constexpr int kCheckpointVersion = 1;

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size())
    throw IoError("malformed number in checkpoint: " + token);
  return v;
}

struct TensorBlock {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  bool operator==(const TensorBlock&) const = default;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, std::vector<TensorBlock>>> sections;

  const std::vector<TensorBlock>& section(const std::string& name) const {
    for (const auto& [n, blocks] : sections)
      if (n == name) return blocks;
    throw IoError("checkpoint has no section '" + name + "'");
  }
};

inline std::vector<TensorBlock> snapshot(const ParamList& params) {
  std::vector<TensorBlock> out;
  for (const auto& p : params)
    out.push_back({p.name, p.rows, p.cols, std::vector<double>(p.value.begin(), p.value.end())});
  return out;
}

inline void restore(ParamList& params, const std::vector<TensorBlock>& blocks) {
  if (blocks.size() != params.size())
    throw ShapeError("checkpoint tensor count " + std::to_string(blocks.size()) +
                     " does not match network (" + std::to_string(params.size()) + ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& b = blocks[i];
    auto& p = params[i];
    if (b.rows != p.rows || b.cols != p.cols)
      throw ShapeError("checkpoint shape mismatch for " + p.name);
    std::copy(b.values.begin(), b.values.end(), p.value.begin());
  }
}

inline void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << "mplab-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ckpt.meta) os << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, blocks] : ckpt.sections) {
    os << "section " << name << ' ' << blocks.size() << '\n';
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      os << "param " << i << ' ' << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
      for (std::size_t j = 0; j < b.values.size(); ++j) {
        if (j) os << ' ';
        os << format_double(b.values[j]);
      }
      os << '\n';
    }
  }
  os << "end\n";
  if (!os) throw IoError("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint ckpt;
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "mplab-checkpoint")
    throw IoError("not an mplab checkpoint");
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::string tag;
  while (is >> tag) {
    if (tag == "end") return ckpt;
    if (tag == "meta") {
      std::string k, v;
      is >> k;
      std::getline(is >> std::ws, v);
      ckpt.meta[k] = v;
    } else if (tag == "section") {
      std::string name;
      std::size_t count = 0;
      is >> name >> count;
      std::vector<TensorBlock> blocks(count);
      for (std::size_t i = 0; i < count; ++i) {
        std::string ptag;
        std::size_t index = 0;
        auto& b = blocks[i];
        if (!(is >> ptag >> index >> b.name >> b.rows >> b.cols) || ptag != "param" || index != i)
          throw IoError("malformed param header in section " + name);
        b.values.resize(b.rows * b.cols);
        std::string token;
        for (auto& v : b.values) {
          if (!(is >> token)) throw IoError("truncated tensor " + b.name);
          v = parse_double(token);
        }
      }
      ckpt.sections.emplace_back(name, std::move(blocks));
    } else {
      throw IoError("unexpected checkpoint tag '" + tag + "'");
    }
  }
  throw IoError("checkpoint is missing its end marker");
}

}  // namespace mplab::nn
