#include "hjpatch/barrier_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hjpatch/contours.hpp"
#include "hjpatch/rng.hpp"

namespace hjpatch {

namespace {

constexpr char kMagic[4] = {'H', 'J', 'P', 'F'};
constexpr std::uint32_t kKindField = 0;
constexpr std::uint32_t kKindMask = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

// Cursor over a loaded byte buffer; every read reports its offset on
// failure.
struct ByteCursor {
  const std::string& data;
  std::size_t pos = 0;

  void require(std::size_t count, const char* what) const {
    if (pos + count > data.size())
      throw CorruptHeader(std::string("field file: truncated reading ") +
                          what + " at byte offset " + std::to_string(pos));
  }
  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    require(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data[pos + i]))
           << (8 * i);
    pos += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string bytes(std::size_t count, const char* what) {
    require(count, what);
    std::string s = data.substr(pos, count);
    pos += count;
    return s;
  }
};

std::string serialize_header(const Grid& g, std::uint32_t kind,
                             const Metadata& metadata) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kFieldFileVersion);
  put_u32(buf, kind);
  put_u32(buf, static_cast<std::uint32_t>(g.dims()));
  for (double v : g.lo()) put_f64(buf, v);
  for (double v : g.hi()) put_f64(buf, v);
  for (std::size_t v : g.shape()) put_u64(buf, v);
  put_u32(buf, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [key, value] : metadata) {
    put_u32(buf, static_cast<std::uint32_t>(key.size()));
    buf.append(key);
    put_u32(buf, static_cast<std::uint32_t>(value.size()));
    buf.append(value);
  }
  return buf;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IOFailure("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open for reading: " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IOFailure("read failed: " + path);
  return data;
}

struct LoadedHeader {
  std::uint32_t kind = 0;
  GridPtr grid;
  Metadata metadata;
  std::size_t payload_offset = 0;
};

LoadedHeader parse_header(const std::string& data, const std::string& path) {
  ByteCursor cur{data};
  cur.require(4, "magic");
  if (std::memcmp(data.data(), kMagic, 4) != 0)
    throw CorruptHeader("field file: bad magic at byte offset 0 in " + path);
  cur.pos = 4;
  const std::uint32_t version = cur.u32("version");
  if (version == 0 || version > kFieldFileVersion)
    throw UnsupportedVersion("field file: version " + std::to_string(version) +
                             " not supported (this build reads up to " +
                             std::to_string(kFieldFileVersion) + ")");
  LoadedHeader h;
  h.kind = cur.u32("payload kind");
  if (h.kind != kKindField && h.kind != kKindMask)
    throw CorruptHeader("field file: unknown payload kind " +
                        std::to_string(h.kind) + " at byte offset 8");
  const std::uint32_t dims = cur.u32("dims");
  if (dims == 0 || dims > kMaxDims)
    throw CorruptHeader("field file: dims " + std::to_string(dims) +
                        " outside [1, " + std::to_string(kMaxDims) +
                        "] at byte offset 12");
  std::vector<double> lo(dims), hi(dims);
  std::vector<std::size_t> shape(dims);
  for (auto& v : lo) v = cur.f64("lo");
  for (auto& v : hi) v = cur.f64("hi");
  for (auto& v : shape) {
    const std::uint64_t s = cur.u64("shape");
    if (s > std::numeric_limits<std::size_t>::max())
      throw ShapeOverflow("field file: shape entry overflows");
    v = static_cast<std::size_t>(s);
  }
  std::size_t cells = 1;
  for (std::size_t s : shape) {
    if (s == 0 || cells > std::numeric_limits<std::size_t>::max() / s)
      throw ShapeOverflow("field file: cell count overflows");
    cells *= s;
  }
  const std::uint32_t meta_count = cur.u32("metadata count");
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    const std::uint32_t klen = cur.u32("metadata key length");
    std::string key = cur.bytes(klen, "metadata key");
    const std::uint32_t vlen = cur.u32("metadata value length");
    std::string value = cur.bytes(vlen, "metadata value");
    h.metadata.emplace(std::move(key), std::move(value));
  }
  h.payload_offset = cur.pos;
  const std::size_t unit = h.kind == kKindField ? 8 : 1;
  if (cells > (data.size() - cur.pos) / unit)
    throw IOFailure("field file: payload truncated at byte offset " +
                    std::to_string(cur.pos) + ", need " +
                    std::to_string(cells * unit) + " bytes, have " +
                    std::to_string(data.size() - cur.pos));
  if (data.size() - cur.pos != cells * unit)
    throw CorruptHeader("field file: " +
                        std::to_string(data.size() - cur.pos - cells * unit) +
                        " trailing bytes after payload");
  h.grid = make_grid(std::move(lo), std::move(hi), std::move(shape));
  return h;
}

}  // namespace

void save_field(const ScalarField& f, const std::string& path,
                const Metadata& metadata) {
  std::string buf = serialize_header(f.grid(), kKindField, metadata);
  buf.reserve(buf.size() + f.size() * 8);
  for (double v : f.values()) put_f64(buf, v);
  write_file(path, buf);
}

ScalarField load_field(const std::string& path, Metadata* metadata) {
  const std::string data = read_file(path);
  LoadedHeader h = parse_header(data, path);
  if (h.kind != kKindField)
    throw CorruptHeader("field file: expected value payload, found mask: " +
                        path);
  std::vector<double> values(h.grid->cell_count());
  ByteCursor cur{data};
  cur.pos = h.payload_offset;
  for (auto& v : values) v = cur.f64("payload");
  if (metadata) *metadata = std::move(h.metadata);
  return ScalarField(h.grid, std::move(values));
}

void save_mask(const GridPtr& grid, std::span<const std::uint8_t> mask,
               const std::string& path, const Metadata& metadata) {
  if (mask.size() != grid->cell_count())
    throw ShapeMismatch("save_mask: mask size does not match grid");
  std::string buf = serialize_header(*grid, kKindMask, metadata);
  buf.reserve(buf.size() + mask.size());
  for (std::uint8_t b : mask) buf.push_back(static_cast<char>(b));
  write_file(path, buf);
}

std::pair<GridPtr, std::vector<std::uint8_t>> load_mask(const std::string& path,
                                                        Metadata* metadata) {
  const std::string data = read_file(path);
  LoadedHeader h = parse_header(data, path);
  if (h.kind != kKindMask)
    throw CorruptHeader("field file: expected mask payload, found values: " +
                        path);
  std::vector<std::uint8_t> mask(h.grid->cell_count());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = static_cast<std::uint8_t>(data[h.payload_offset + i]);
  if (metadata) *metadata = std::move(h.metadata);
  return {h.grid, std::move(mask)};
}

namespace {

double bump_profile(double r, double radius) {
  if (r >= radius) return 0.0;
  const double s = 1.0 - (r / radius) * (r / radius);
  return s * s;
}

void add_bump(ScalarField& f, std::span<const double> center, double radius,
              double amplitude) {
  const Grid& g = f.grid();
  std::vector<double> x(g.dims());
  MultiIndex idx(g.dims(), 0);
  for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
    g.state_of(idx, x);
    double r2 = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double dx = x[d] - center[d];
      r2 += dx * dx;
    }
    f[flat] += amplitude * bump_profile(std::sqrt(r2), radius);
    g.advance(idx);
  }
}

// Inner rim of {h >= 0}: nonnegative cells with a negative axis neighbor.
std::vector<std::size_t> inner_rim(const ScalarField& h) {
  const Grid& g = h.grid();
  std::span<const double> v = h.values();
  std::vector<std::size_t> rim;
  std::size_t idx[kMaxDims];
  std::span<std::size_t> idxs(idx, g.dims());
  g.unflatten(0, idxs);
  for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
    if (v[flat] >= 0.0) {
      bool crossing = false;
      for (std::size_t d = 0; d < g.dims() && !crossing; ++d) {
        const std::size_t stride = g.strides()[d];
        if (idx[d] > 0 && v[flat - stride] < 0.0) crossing = true;
        if (idx[d] + 1 < g.shape()[d] && v[flat + stride] < 0.0)
          crossing = true;
      }
      if (crossing) rim.push_back(flat);
    }
    g.advance(idxs);
  }
  return rim;
}

}  // namespace

ScalarField synth_almost_barrier(const ScalarField& truth,
                                 const PerturbationSpec& spec) {
  if (!(spec.radius > 0.0))
    throw ConfigError("perturbation: radius must be positive");
  const double signed_amp = spec.sign == PerturbationSign::Optimistic
                                ? std::abs(spec.amplitude)
                                : -std::abs(spec.amplitude);
  ScalarField out = truth;
  switch (spec.kind) {
    case PerturbationKind::AdditiveConstant: {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += signed_amp;
      break;
    }
    case PerturbationKind::RadialBump: {
      if (spec.center.size() != truth.grid().dims())
        throw DimensionMismatch("perturbation: center size mismatch");
      add_bump(out, spec.center, spec.radius, signed_amp);
      break;
    }
    case PerturbationKind::BandNoise: {
      const std::vector<std::size_t> rim = inner_rim(truth);
      if (rim.empty()) break;
      Rng rng(spec.seed);
      constexpr std::size_t kBumps = 8;
      for (std::size_t b = 0; b < kBumps; ++b) {
        const std::size_t flat = rim[rng.uniform_index(rim.size())];
        const double scale = 0.5 + 0.5 * rng.uniform01();
        add_bump(out, truth.grid().state_of_flat(flat), spec.radius,
                 signed_amp * scale);
      }
      break;
    }
  }
  return out;
}

EpsilonReport measure_epsilon(const ScalarField& h,
                              const ControlAffineDynamics& d, double gamma,
                              const NumericsConfig& ncfg, double tol) {
  h.check_finite("measure_epsilon");
  if (!(gamma > 0.0)) throw ConfigError("measure_epsilon: gamma must be > 0");
  if (!(tol > 0.0)) throw ConfigError("measure_epsilon: tol must be > 0");
  LevelSetKernel kernel(d, h.grid_ptr(), ncfg);
  const Grid& g = h.grid();
  std::span<const double> v = h.values();

  EpsilonReport report;
  const std::vector<std::size_t> rim = inner_rim(h);
  report.boundary_cells = rim.size();
  if (rim.empty()) {
    report.vacuous = true;
    return report;
  }
  std::size_t idx[kMaxDims];
  std::span<std::size_t> idxs(idx, g.dims());
  for (std::size_t flat : rim) {
    g.unflatten(flat, idxs);
    const double ham = kernel.hamiltonian(v, idxs, flat);
    if (ham + gamma * v[flat] < -tol) report.violating_cells.push_back(flat);
  }
  report.epsilon = static_cast<double>(report.violating_cells.size()) /
                   static_cast<double>(report.boundary_cells);
  return report;
}

namespace {

double point_segment_distance(double px, double py, const Segment2D& s) {
  const double vx = s.b[0] - s.a[0], vy = s.b[1] - s.a[1];
  const double wx = px - s.a[0], wy = py - s.a[1];
  const double vv = vx * vx + vy * vy;
  double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (s.a[0] + t * vx);
  const double dy = py - (s.a[1] + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

SdfResult signed_distance_reconstruct(const ScalarField& f) {
  f.check_finite("signed_distance_reconstruct");
  const Grid& g = f.grid();
  std::span<const double> v = f.values();

  if (g.dims() == 2) {
    const std::vector<Segment2D> segments = marching_squares(f, 0.0);
    if (segments.empty()) return {f, true};
    SdfResult res{ScalarField(f.grid_ptr()), false};
    std::vector<double> x(2);
    MultiIndex idx(2, 0);
    for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
      g.state_of(idx, x);
      double best = std::numeric_limits<double>::infinity();
      for (const Segment2D& s : segments)
        best = std::min(best, point_segment_distance(x[0], x[1], s));
      res.field[flat] = v[flat] >= 0.0 ? best : -best;
      g.advance(idx);
    }
    return res;
  }

  // Zero crossings along grid edges, located by linear interpolation.
  std::vector<std::vector<double>> crossings;
  {
    std::vector<double> xa(g.dims());
    MultiIndex idx(g.dims(), 0);
    for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
      for (std::size_t d = 0; d < g.dims(); ++d) {
        if (idx[d] + 1 >= g.shape()[d]) continue;
        const double va = v[flat];
        const double vb = v[flat + g.strides()[d]];
        if ((va >= 0.0) == (vb >= 0.0)) continue;
        g.state_of(idx, xa);
        const double t = va / (va - vb);
        std::vector<double> p = xa;
        p[d] += t * g.spacing()[d];
        crossings.push_back(std::move(p));
      }
      g.advance(idx);
    }
  }
  if (crossings.empty()) return {f, true};
  SdfResult res{ScalarField(f.grid_ptr()), false};
  std::vector<double> x(g.dims());
  MultiIndex idx(g.dims(), 0);
  for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
    g.state_of(idx, x);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : crossings) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < g.dims(); ++d) {
        const double dx = x[d] - p[d];
        d2 += dx * dx;
      }
      best = std::min(best, d2);
    }
    best = std::sqrt(best);
    res.field[flat] = v[flat] >= 0.0 ? best : -best;
    g.advance(idx);
  }
  return res;
}

}  // namespace hjpatch
