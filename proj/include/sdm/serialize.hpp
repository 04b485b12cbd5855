#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "sdm/matrix.hpp"

namespace sdm {

// Little-endian primitive writers/readers for the binary snapshot and
// checkpoint formats. Byte order is explicit so files are portable.
void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
void write_i64(std::ostream& os, int64_t v);
void write_f64(std::ostream& os, double v);
void write_matrix(std::ostream& os, const Matrix& m);
void write_string(std::ostream& os, const std::string& s);

uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
int64_t read_i64(std::istream& is);
double read_f64(std::istream& is);
Matrix read_matrix(std::istream& is);
std::string read_string(std::istream& is);

}  // namespace sdm
