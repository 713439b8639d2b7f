#pragma once

// Little-endian primitive I/O shared by the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "pieceid/error.hpp"

namespace pieceid::binio {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::BadLength, "truncated " + what);
  }
  return value;
}

inline std::string get_string(std::istream& in, const std::string& what) {
  const auto n = get<std::uint32_t>(in, what);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw Error(ErrorCode::BadLength, "truncated " + what);
  return s;
}

}  // namespace pieceid::binio
