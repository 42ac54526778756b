#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "rwld/control.hpp"
#include "rwld/grid.hpp"
#include "rwld/noise.hpp"

namespace rwld::io {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix tagged with the grid it lives on. Fields have nt+1 rows, noise and
/// controls nt rows, grid functions one row; all have nx+1 columns.
struct Table {
  Grid grid;
  RowMat values;
};

inline constexpr std::size_t kHeaderBytes = 80;
inline constexpr char kMagic[] = "RWLD1";

inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string grid_json(const Grid& g, Eigen::Index rows, Eigen::Index cols) {
  return "{\"L\":" + shortest(g.L) + ",\"T\":" + shortest(g.T) + ",\"nx\":" + std::to_string(g.nx) +
         ",\"nt\":" + std::to_string(g.nt) + ",\"r\":" + std::to_string(rows) + ",\"c\":" + std::to_string(cols) + "}";
}

// ---------------------------------------------------------------------------
// binary: 80-byte header "RWLD1" + compact JSON, space padded, '\n' last;
// then rows*cols little-endian float64 in row-major order.

inline void write_binary(std::ostream& os, const Grid& g, const RowMat& m) {
  std::string h = std::string(kMagic) + grid_json(g, m.rows(), m.cols());
  if (h.size() > kHeaderBytes - 1) throw IoError("rwld1: header too long");
  h.resize(kHeaderBytes - 1, ' ');
  h.push_back('\n');
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(m.data()[k]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    os.write(reinterpret_cast<const char*>(&bits), 8);
  }
  if (!os) throw IoError("rwld1: write failed");
}

inline Table read_binary(std::istream& is) {
  char h[kHeaderBytes];
  if (!is.read(h, kHeaderBytes)) throw IoError("rwld1: short header");
  if (std::memcmp(h, kMagic, 5) != 0) throw IoError("rwld1: bad magic");
  if (h[kHeaderBytes - 1] != '\n') throw IoError("rwld1: header not newline terminated");
  json j;
  try {
    j = json::parse(std::string(h + 5, h + kHeaderBytes - 1));
  } catch (const json::exception& e) {
    throw IoError(std::string("rwld1: bad header json: ") + e.what());
  }
  Table t;
  try {
    t.grid = Grid(j.at("L").get<double>(), j.at("nx").get<int>(), j.at("T").get<double>(), j.at("nt").get<int>());
    t.values.resize(j.at("r").get<Eigen::Index>(), j.at("c").get<Eigen::Index>());
  } catch (const json::exception& e) {
    throw IoError(std::string("rwld1: header field: ") + e.what());
  }
  for (Eigen::Index k = 0; k < t.values.size(); ++k) {
    std::uint64_t bits;
    if (!is.read(reinterpret_cast<char*>(&bits), 8)) throw IoError("rwld1: truncated payload");
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    t.values.data()[k] = std::bit_cast<double>(bits);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("rwld1: trailing bytes");
  return t;
}

// ---------------------------------------------------------------------------
// CSV: first line "# rwld {json}", then one comma-separated row per line.

inline void write_csv(std::ostream& os, const Grid& g, const RowMat& m) {
  os << "# rwld " << grid_json(g, m.rows(), m.cols()) << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << shortest(m(i, j));
    os << '\n';
  }
  if (!os) throw IoError("csv: write failed");
}

inline Table read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# rwld ", 0) != 0) throw IoError("csv: missing metadata line");
  json j;
  Table t;
  try {
    j = json::parse(line.substr(7));
    t.grid = Grid(j.at("L").get<double>(), j.at("nx").get<int>(), j.at("T").get<double>(), j.at("nt").get<int>());
    t.values.resize(j.at("r").get<Eigen::Index>(), j.at("c").get<Eigen::Index>());
  } catch (const json::exception& e) {
    throw IoError(std::string("csv: bad metadata: ") + e.what());
  }
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    if (!std::getline(is, line)) throw IoError("csv: too few rows");
    const char* p = line.data();
    const char* end = p + line.size();
    for (Eigen::Index k = 0; k < t.values.cols(); ++k) {
      double v;
      const auto r = std::from_chars(p, end, v);
      if (r.ec != std::errc()) throw IoError("csv: bad number in row " + std::to_string(i));
      t.values(i, k) = v;
      p = r.ptr;
      if (k + 1 < t.values.cols()) {
        if (p == end || *p != ',') throw IoError("csv: too few columns in row " + std::to_string(i));
        ++p;
      }
    }
    if (p != end) throw IoError("csv: too many columns in row " + std::to_string(i));
  }
  return t;
}

// ---------------------------------------------------------------------------
// typed helpers

inline void save(const std::string& path, const Grid& g, const RowMat& m, bool csv = false) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  csv ? write_csv(os, g, m) : write_binary(os, g, m);
}

inline Table load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char c0 = static_cast<char>(is.peek());
  return c0 == '#' ? read_csv(is) : read_binary(is);
}

inline void save(const std::string& path, const Field& f, bool csv = false) { save(path, f.grid, f.values, csv); }
inline void save(const std::string& path, const NoiseField& w, bool csv = false) { save(path, w.grid, w.dW, csv); }
inline void save(const std::string& path, const Control& c, bool csv = false) { save(path, c.grid, c.g, csv); }
inline void save(const std::string& path, const GridFunction& f, bool csv = false) {
  save(path, f.grid, RowMat(f.values.transpose()), csv);
}

inline Field load_field(const std::string& path) {
  Table t = load(path);
  if (t.values.rows() != t.grid.nt + 1 || t.values.cols() != t.grid.nodes())
    throw IoError(path + ": not a field of shape (nt+1) x (nx+1)");
  return Field(t.grid, std::move(t.values));
}

inline Control load_control(const std::string& path) {
  Table t = load(path);
  if (t.values.rows() != t.grid.nt || t.values.cols() != t.grid.nodes())
    throw IoError(path + ": not a control of shape nt x (nx+1)");
  return Control(t.grid, std::move(t.values));
}

inline NoiseField load_noise(const std::string& path) {
  Table t = load(path);
  if (t.values.rows() != t.grid.nt || t.values.cols() != t.grid.nodes())
    throw IoError(path + ": not a noise field of shape nt x (nx+1)");
  return {t.grid, std::move(t.values)};
}

inline GridFunction load_grid_function(const std::string& path) {
  Table t = load(path);
  if (t.values.rows() != 1 || t.values.cols() != t.grid.nodes()) throw IoError(path + ": not a grid function");
  return GridFunction(t.grid, Vec(t.values.row(0).transpose()));
}

// ---------------------------------------------------------------------------
// NoiseSpec <-> JSON

inline json to_json(const NoiseSpec& s) {
  return json{{"H", s.hp.H()}, {"L", s.grid.L},     {"nx", s.grid.nx},           {"T", s.grid.T},
              {"nt", s.grid.nt}, {"seed", s.seed}, {"method", to_string(s.method)}};
}

inline NoiseSpec noise_spec_from_json(const json& j) {
  try {
    return NoiseSpec{HurstParam(j.at("H").get<double>()),
                     Grid(j.at("L").get<double>(), j.at("nx").get<int>(), j.at("T").get<double>(), j.at("nt").get<int>()),
                     j.at("seed").get<std::uint64_t>(), noise_method_from_string(j.at("method").get<std::string>())};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("noise spec: ") + e.what());
  }
}

}  // namespace rwld::io
