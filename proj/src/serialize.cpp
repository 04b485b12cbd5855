#include "sdm/serialize.hpp"

#include <cstring>
#include <istream>
#include <ostream>

#include "sdm/error.hpp"

namespace sdm {

static void write_bytes_le(std::ostream& os, uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(buf, n);
}

static uint64_t read_bytes_le(std::istream& is, int n) {
    char buf[8] = {};
    is.read(buf, n);
    if (!is) throw IoError("unexpected end of stream");
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
        v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}

void write_u32(std::ostream& os, uint32_t v) { write_bytes_le(os, v, 4); }
void write_u64(std::ostream& os, uint64_t v) { write_bytes_le(os, v, 8); }
void write_i64(std::ostream& os, int64_t v) { write_bytes_le(os, static_cast<uint64_t>(v), 8); }

void write_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_bytes_le(os, bits, 8);
}

void write_matrix(std::ostream& os, const Matrix& m) {
    write_u64(os, static_cast<uint64_t>(m.rows));
    write_u64(os, static_cast<uint64_t>(m.cols));
    for (double v : m.data) write_f64(os, v);
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) { return static_cast<uint32_t>(read_bytes_le(is, 4)); }
uint64_t read_u64(std::istream& is) { return read_bytes_le(is, 8); }
int64_t read_i64(std::istream& is) { return static_cast<int64_t>(read_bytes_le(is, 8)); }

double read_f64(std::istream& is) {
    const uint64_t bits = read_bytes_le(is, 8);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

Matrix read_matrix(std::istream& is) {
    const uint64_t rows = read_u64(is);
    const uint64_t cols = read_u64(is);
    if (rows > (1u << 24) || cols > (1u << 24)) throw IoError("matrix dimensions implausible");
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : m.data) v = read_f64(is);
    return m;
}

std::string read_string(std::istream& is) {
    const uint64_t n = read_u64(is);
    if (n > (1u << 20)) throw IoError("string length implausible");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw IoError("unexpected end of stream");
    return s;
}

}  // namespace sdm
