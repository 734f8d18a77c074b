#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace eit {

// Error taxonomy mirrored by the C API status codes and the CLI exit codes:
// std::invalid_argument -> usage (2), io_error -> I/O (3), numeric_error -> numeric (4).
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic RNG. The std distributions are implementation-defined, so uniforms
// and normals are derived from raw mt19937_64 bits directly; results are identical
// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // standard normal via Box-Muller (two uniforms per pair, no rejection)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// One mixing step; used to derive independent sub-seeds from a record seed.
uint64_t splitmix64(uint64_t x);

// Exact text form for a double ("%.17g"): round-trips and is byte-stable.
std::string format_g17(double v);

// Shortest decimal form that still round-trips (tries 15..17 significant digits).
std::string format_shortest(double v);

// Atomic text write: <path>.tmp then rename.
void write_text_atomic(const std::string& path, const std::string& content);

// Streaming binary writer with the same temp+rename discipline.
class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path);
  ~AtomicFile();
  void write(const void* data, size_t n);
  void write_u32(uint32_t v) { write(&v, 4); }
  void write_u64(uint64_t v) { write(&v, 8); }
  void write_f32(float v) { write(&v, 4); }
  void write_f64(double v) { write(&v, 8); }
  void commit();

 private:
  std::string path_, tmp_;
  void* file_ = nullptr;  // FILE*
  bool committed_ = false;
};

std::string read_text_file(const std::string& path);
std::string read_binary_file(const std::string& path);

// Sequential little-endian reader over an in-memory buffer; throws io_error on
// truncation, bad magic, or trailing bytes.
class BinaryReader {
 public:
  BinaryReader(std::string data, std::string name)
      : data_(std::move(data)), name_(std::move(name)) {}

  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  void expect_magic(const char* magic4);
  void done();

 private:
  void need(size_t n);
  std::string data_, name_;
  size_t pos_ = 0;
};

}  // namespace eit
