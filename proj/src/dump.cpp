#include "omt/dump.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "omt/errors.hpp"

namespace omt {

namespace {

constexpr char kMagic[4] = {'O', 'M', 'T', 'F'};

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(T) > in.size()) throw FormatError(path + ": truncated dump");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return v;
}

std::uint64_t product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint64_t> grid_dims(const Grid& g) { return {g.nx().begin(), g.nx().end()}; }

}  // namespace

void write_dump(const std::string& path, const FieldDump& dump) {
  if (dump.dims.empty() || dump.dims.size() > 255) throw FormatError(path + ": dump needs 1 to 255 dimensions");
  if (product(dump.dims) != dump.data.size()) throw FormatError(path + ": payload does not match dims");
  std::string buf(kMagic, 4);
  put_le<std::uint32_t>(buf, kDumpVersion);
  buf.push_back(static_cast<char>(dump.dims.size()));
  for (auto d : dump.dims) put_le<std::uint64_t>(buf, d);
  buf.reserve(buf.size() + 8 * dump.data.size());
  for (double v : dump.data) put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

FieldDump read_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dump '" + path + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || buf.compare(0, 4, kMagic, 4) != 0) throw FormatError(path + ": not an OMTF dump");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(buf, pos, path);
  if (version != kDumpVersion) throw FormatError(path + ": unsupported dump version " + std::to_string(version));
  const auto ndim = get_le<std::uint8_t>(buf, pos, path);
  if (ndim == 0) throw FormatError(path + ": dump has no dimensions");
  FieldDump d;
  for (int i = 0; i < ndim; ++i) d.dims.push_back(get_le<std::uint64_t>(buf, pos, path));
  const std::uint64_t n = product(d.dims);
  if ((buf.size() - pos) / 8 < n) throw FormatError(path + ": truncated dump");
  if (buf.size() - pos != 8 * n) throw FormatError(path + ": trailing bytes after payload");
  d.data.resize(n);
  for (auto& v : d.data) v = std::bit_cast<double>(get_le<std::uint64_t>(buf, pos, path));
  return d;
}

FieldDump to_dump(const SpaceSlice& s) {
  return {grid_dims(s.grid()), {s.values().begin(), s.values().end()}};
}

FieldDump to_dump(const ScalarField& f) {
  FieldDump d{grid_dims(f.grid()), {f.values().begin(), f.values().end()}};
  d.dims.insert(d.dims.begin(), static_cast<std::uint64_t>(f.grid().nt()));
  return d;
}

FieldDump to_dump(const FluxField& f) {
  FieldDump d{grid_dims(f.grid()), {f.raw().begin(), f.raw().end()}};
  d.dims.insert(d.dims.begin(), {static_cast<std::uint64_t>(f.components()), static_cast<std::uint64_t>(f.grid().nt())});
  return d;
}

SpaceSlice slice_from_dump(const FieldDump& d, const Grid& g) {
  if (d.dims != grid_dims(g)) throw FormatError("dump dims do not match the spatial grid");
  SpaceSlice s(g);
  std::copy(d.data.begin(), d.data.end(), s.values().begin());
  return s;
}

FluxField flux_from_dump(const FieldDump& d, const Grid& g) {
  std::vector<std::uint64_t> want = grid_dims(g);
  want.insert(want.begin(), {static_cast<std::uint64_t>(g.components()), static_cast<std::uint64_t>(g.nt())});
  if (d.dims != want) throw FormatError("dump dims do not match the space-time grid");
  FluxField f(g);
  std::copy(d.data.begin(), d.data.end(), f.raw().begin());
  return f;
}

}  // namespace omt
