#include "warpconv/io.hpp"

#include <cfenv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace warpconv {

namespace {

constexpr float kFloMagic = 202021.25f;

void put_bytes(std::ofstream& out, const void* p, std::size_t count) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(count));
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  put_bytes(out, b, 4);
}

void put_f32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffull));
  put_u32(out, static_cast<std::uint32_t>(bits >> 32));
}

bool get_bytes(std::ifstream& in, void* p, std::size_t count) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(count));
  return static_cast<std::size_t>(in.gcount()) == count;
}

bool get_u32(std::ifstream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!get_bytes(in, b, 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

bool get_f32(std::ifstream& in, float& v) {
  std::uint32_t bits;
  if (!get_u32(in, bits)) return false;
  std::memcpy(&v, &bits, 4);
  return true;
}

bool get_f64(std::ifstream& in, double& v) {
  std::uint32_t lo;
  std::uint32_t hi;
  if (!get_u32(in, lo) || !get_u32(in, hi)) return false;
  const std::uint64_t bits = static_cast<std::uint64_t>(lo) |
                             (static_cast<std::uint64_t>(hi) << 32);
  std::memcpy(&v, &bits, 8);
  return true;
}

std::ifstream open_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open for reading: " + path);
  }
  return in;
}

std::ofstream open_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  return out;
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

FlowField read_flo(const std::string& path) {
  std::ifstream in = open_read(path);
  float magic;
  if (!get_f32(in, magic) || magic != kFloMagic) {
    throw FormatError("read_flo: bad magic in " + path);
  }
  std::uint32_t wu;
  std::uint32_t hu;
  if (!get_u32(in, wu) || !get_u32(in, hu)) {
    throw FormatError("read_flo: truncated header in " + path);
  }
  const std::int32_t w = static_cast<std::int32_t>(wu);
  const std::int32_t h = static_cast<std::int32_t>(hu);
  if (w <= 0 || h <= 0) {
    throw FormatError("read_flo: non-positive dimensions in " + path);
  }

  const std::size_t height = static_cast<std::size_t>(h);
  const std::size_t width = static_cast<std::size_t>(w);
  FlowField flow({2, height, width});
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      float u;
      float v;
      if (!get_f32(in, u) || !get_f32(in, v)) {
        throw FormatError("read_flo: truncated payload in " + path);
      }
      flow.at(0, i, j) = static_cast<double>(u);
      flow.at(1, i, j) = static_cast<double>(v);
    }
  }
  return flow;
}

void write_flo(const FlowField& flow, const std::string& path) {
  if (flow.ndim() != 3 || flow.dim(0) != 2) {
    throw std::invalid_argument("write_flo: flow must have dims (2, H, W)");
  }
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!std::isfinite(flow[i])) {
      throw std::invalid_argument("write_flo: flow must be finite");
    }
  }
  const std::size_t height = flow.dim(1);
  const std::size_t width = flow.dim(2);
  std::ofstream out = open_write(path);
  put_f32(out, kFloMagic);
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(height));
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      put_f32(out, static_cast<float>(flow.at(0, i, j)));
      put_f32(out, static_cast<float>(flow.at(1, i, j)));
    }
  }
  if (!out) {
    throw IoError("write_flo: write failed: " + path);
  }
}

TensorFile read_tensor(const std::string& path) {
  std::ifstream in = open_read(path);
  char magic[4];
  if (!get_bytes(in, magic, 4) || std::memcmp(magic, "TNSR", 4) != 0) {
    throw FormatError("read_tensor: bad magic in " + path);
  }
  std::uint32_t version;
  if (!get_u32(in, version) || version != 1) {
    throw FormatError("read_tensor: unsupported version in " + path);
  }
  unsigned char dtype_code;
  unsigned char ndim;
  if (!get_bytes(in, &dtype_code, 1) || !get_bytes(in, &ndim, 1)) {
    throw FormatError("read_tensor: truncated header in " + path);
  }
  if (dtype_code != 1 && dtype_code != 2) {
    throw FormatError("read_tensor: unknown dtype code in " + path);
  }
  if (ndim == 0) {
    throw FormatError("read_tensor: zero-rank tensor in " + path);
  }
  std::vector<std::size_t> dims(ndim);
  for (unsigned char a = 0; a < ndim; ++a) {
    std::uint32_t d;
    if (!get_u32(in, d)) {
      throw FormatError("read_tensor: truncated dims in " + path);
    }
    if (d == 0) {
      throw FormatError("read_tensor: zero dimension in " + path);
    }
    dims[a] = d;
  }

  TensorFile result;
  result.dtype = static_cast<TensorDType>(dtype_code);
  result.tensor = Tensor(dims);
  for (std::size_t i = 0; i < result.tensor.size(); ++i) {
    if (result.dtype == TensorDType::Float32) {
      float v;
      if (!get_f32(in, v)) {
        throw FormatError("read_tensor: truncated payload in " + path);
      }
      result.tensor[i] = static_cast<double>(v);
    } else {
      double v;
      if (!get_f64(in, v)) {
        throw FormatError("read_tensor: truncated payload in " + path);
      }
      result.tensor[i] = v;
    }
  }
  return result;
}

void write_tensor(const Tensor& t, const std::string& path, TensorDType dtype) {
  if (t.ndim() == 0) {
    throw std::invalid_argument("write_tensor: empty tensor");
  }
  for (std::size_t a = 0; a < t.ndim(); ++a) {
    if (t.dim(a) > std::numeric_limits<std::uint32_t>::max()) {
      throw std::invalid_argument("write_tensor: dimension exceeds the u32 header field");
    }
  }
  if (t.ndim() > 255) {
    throw std::invalid_argument("write_tensor: rank exceeds the u8 header field");
  }

  std::ofstream out = open_write(path);
  put_bytes(out, "TNSR", 4);
  put_u32(out, 1);
  const unsigned char dtype_code = static_cast<unsigned char>(dtype);
  const unsigned char ndim = static_cast<unsigned char>(t.ndim());
  put_bytes(out, &dtype_code, 1);
  put_bytes(out, &ndim, 1);
  for (std::size_t a = 0; a < t.ndim(); ++a) {
    put_u32(out, static_cast<std::uint32_t>(t.dim(a)));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (dtype == TensorDType::Float32) {
      put_f32(out, static_cast<float>(t[i]));
    } else {
      put_f64(out, t[i]);
    }
  }
  if (!out) {
    throw IoError("write_tensor: write failed: " + path);
  }
}

void heatmap_pgm(const Tensor& map, const std::string& path) {
  if (map.ndim() != 2) {
    throw std::invalid_argument("heatmap_pgm: map must be 2D");
  }
  double lo = map[0];
  double hi = map[0];
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!std::isfinite(map[i])) {
      throw std::invalid_argument("heatmap_pgm: map must be finite");
    }
    lo = std::min(lo, map[i]);
    hi = std::max(hi, map[i]);
  }
  const double range = hi - lo;

  std::ofstream out = open_write(path);
  out << "P5\n" << map.dim(1) << " " << map.dim(0) << "\n255\n";
  std::vector<unsigned char> row(map.dim(1));
  for (std::size_t i = 0; i < map.dim(0); ++i) {
    for (std::size_t j = 0; j < map.dim(1); ++j) {
      double scaled = range > 0.0 ? (map.at(i, j) - lo) / range * 255.0 : 0.0;
      row[j] = static_cast<unsigned char>(std::nearbyint(scaled));
    }
    put_bytes(out, row.data(), row.size());
  }
  if (!out) {
    throw IoError("heatmap_pgm: write failed: " + path);
  }
}

void write_stats_csv(const StatsReport& report, const std::string& path) {
  std::ofstream out = open_write(path);
  out << "statistic,operation,g,n,value\n";
  for (const StatEntry& e : report.entries) {
    out << e.statistic << "," << e.operation << ",";
    if (e.g >= 0) out << e.g;
    out << ",";
    if (e.n >= 0) out << e.n;
    out << "," << format_value(e.value) << "\n";
  }
  if (!out) {
    throw IoError("write_stats_csv: write failed: " + path);
  }
}

void write_fit_csv(const FitReport& report, const std::string& path) {
  std::ofstream out = open_write(path);
  out << "step,data_loss,fidelity_loss,max_deviation,mean_diversity\n";
  for (std::size_t s = 0; s < report.data_loss.size(); ++s) {
    out << s << "," << format_value(report.data_loss[s]) << ","
        << format_value(report.fidelity_loss[s]) << ","
        << format_value(report.max_deviation[s]) << ","
        << format_value(report.mean_diversity[s]) << "\n";
  }
  if (!out) {
    throw IoError("write_fit_csv: write failed: " + path);
  }
}

}  // namespace warpconv
