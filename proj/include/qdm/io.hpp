#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>

#include "qdm/stack.hpp"

namespace qdm {

// QDMS: "QDMSTACK", u64 LE header length, JSON header, q*m*n f32 LE payload.
// QDMF: "QDMFIELD", u64 LE header length, JSON header, components*m*n f64,
// optional 4*m*n f64 zfs, optional m*n f64 residuals, m*n u8 mask (1 = masked).
inline constexpr int kSchemaVersion = 1;

void write_stack(std::ostream& os, const OdmrStack& stack);
OdmrStack read_stack(std::istream& is);  // throws FormatError naming the failed check
void write_stack_file(const std::string& path, const OdmrStack& stack);  // IoError
OdmrStack read_stack_file(const std::string& path);

void write_field_map(std::ostream& os, const FieldMap& map);
FieldMap read_field_map(std::istream& is);
void write_field_map_file(const std::string& path, const FieldMap& map);
FieldMap read_field_map_file(const std::string& path);

// m*n rows "row,col,value" (value in tesla, empty when masked) after a header line.
void export_csv(std::ostream& os, const FieldMap& map, int component);

// Binary 8-bit PGM. Values map linearly from range (default: unmasked min..max)
// to 0..255 and saturate outside it; masked pixels are 0.
void export_pgm(std::ostream& os, const FieldMap& map, int component,
                std::optional<std::pair<double, double>> range = std::nullopt);

}  // namespace qdm
