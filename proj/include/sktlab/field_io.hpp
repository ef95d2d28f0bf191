#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "sktlab/grid.hpp"

namespace sktlab {

enum class SnapshotFormat { Csv, Binary };

/// Shortest round-trippable rendering used by every text artifact.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
  return v;
}

}  // namespace detail

/// Header line `m Nx Ny Lx Ly`, then the values of each component in
/// row-major (j, i) order: one CSV row per grid row, or raw little-endian
/// float64 for the binary variant.
inline void write_field(std::ostream& os, const Field& u, SnapshotFormat fmt) {
  const Grid2D& g = u.grid();
  os << u.components() << ' ' << g.Nx << ' ' << g.Ny << ' ' << fmt17(g.Lx) << ' ' << fmt17(g.Ly) << '\n';
  if (fmt == SnapshotFormat::Csv) {
    for (int c = 0; c < u.components(); ++c) {
      for (int j = 0; j < g.Ny; ++j) {
        for (int i = 0; i < g.Nx; ++i) {
          if (i) os << ',';
          os << fmt17(u(c, i, j));
        }
        os << '\n';
      }
    }
  } else {
    for (double x : u.values()) {
      const std::uint64_t bits = detail::to_le(std::bit_cast<std::uint64_t>(x));
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

inline Field read_field(std::istream& is, SnapshotFormat fmt, Boundary bc = Boundary::NeumannZero) {
  std::string header;
  if (!std::getline(is, header)) throw InputError("snapshot: missing header");
  std::istringstream hs(header);
  int m = 0, Nx = 0, Ny = 0;
  double Lx = 0, Ly = 0;
  if (!(hs >> m >> Nx >> Ny >> Lx >> Ly)) throw InputError("snapshot: malformed header '" + header + "'");
  Field u(build_grid(Lx, Ly, Nx, Ny, bc), m);
  if (fmt == SnapshotFormat::Csv) {
    std::string line;
    for (int c = 0; c < m; ++c) {
      for (int j = 0; j < Ny; ++j) {
        if (!std::getline(is, line)) throw InputError("snapshot: truncated CSV body");
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        for (int i = 0; i < Nx; ++i) {
          if (!(ls >> u(c, i, j))) throw InputError("snapshot: short CSV row");
        }
      }
    }
  } else {
    for (double& x : u.values()) {
      std::uint64_t bits = 0;
      if (!is.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw InputError("snapshot: truncated binary body");
      x = std::bit_cast<double>(detail::to_le(bits));
    }
  }
  return u;
}

inline void save_field(const std::string& path, const Field& u, SnapshotFormat fmt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open " + path + " for writing");
  write_field(os, u, fmt);
}

inline Field load_field(const std::string& path, SnapshotFormat fmt, Boundary bc = Boundary::NeumannZero) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  return read_field(is, fmt, bc);
}

}  // namespace sktlab
