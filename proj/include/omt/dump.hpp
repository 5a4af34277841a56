#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omt/grid.hpp"

namespace omt {

/// Binary field: "OMTF", u32 version, u8 ndim, u64 dims, float64 payload, all
/// little-endian, payload row-major.
struct FieldDump {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

inline constexpr std::uint32_t kDumpVersion = 1;

/// Throws FormatError if dims and payload disagree or the file cannot be written.
void write_dump(const std::string& path, const FieldDump& dump);
/// Throws FormatError on bad magic or version, truncation or trailing bytes.
FieldDump read_dump(const std::string& path);

FieldDump to_dump(const SpaceSlice& s);
/// dims (nt, nx...).
FieldDump to_dump(const ScalarField& f);
/// dims (n+1, nt, nx...), component-major.
FieldDump to_dump(const FluxField& f);

SpaceSlice slice_from_dump(const FieldDump& d, const Grid& g);
FluxField flux_from_dump(const FieldDump& d, const Grid& g);

}  // namespace omt
