#pragma once

// Parameter checkpoint archive.
//
//   magic   "CTGC"
//   u32     version (1)
//   u32     bytes per value (4 = float32, 8 = float64)
//   u32     parameter count
//   per parameter, in store order:
//     u32   name length, then the name bytes (UTF-8, no terminator)
//     u32   rows, u32 cols
//     rows*cols values, row-major, little-endian IEEE-754
//
// Values are written with memcpy, so loading reproduces them bit-exactly.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ctg/error.hpp"
#include "ctg/nn.hpp"

namespace ctg {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw DataError(what + ": truncated file");
  return v;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const ParameterStore<S>& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
  os.write("CTGC", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, sizeof(S));
  const auto params = store.all();
  detail::put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    detail::put_u32(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(p->value.rows()));
    detail::put_u32(os, static_cast<std::uint32_t>(p->value.cols()));
    os.write(reinterpret_cast<const char*>(p->value.data().data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(S)));
  }
  if (!os) throw DataError("checkpoint: write failed for " + path);
}

// Loads values into an already-constructed store; names and shapes must match.
template <typename S>
void load_checkpoint(ParameterStore<S>& store, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "CTGC", 4) != 0) throw DataError("checkpoint: bad magic in " + path);
  if (detail::get_u32(is, path) != 1) throw DataError("checkpoint: unsupported version in " + path);
  if (detail::get_u32(is, path) != sizeof(S)) throw DataError("checkpoint: precision mismatch in " + path);
  const auto count = detail::get_u32(is, path);
  if (count != store.size())
    throw DataError("checkpoint: " + path + " holds " + std::to_string(count) + " parameters, model has " +
                    std::to_string(store.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::get_u32(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DataError("checkpoint: truncated file " + path);
    const auto rows = detail::get_u32(is, path);
    const auto cols = detail::get_u32(is, path);
    auto* p = store.find(name);
    if (!p) throw DataError("checkpoint: unknown parameter " + name);
    if (p->value.rows() != rows || p->value.cols() != cols)
      throw DataError("checkpoint: shape mismatch for " + name);
    if (!is.read(reinterpret_cast<char*>(p->value.data().data()), static_cast<std::streamsize>(rows * cols * sizeof(S))))
      throw DataError("checkpoint: truncated values for " + name);
  }
}

}  // namespace ctg
