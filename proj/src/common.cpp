#include "common.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace eit {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_shortest(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  AtomicFile f(path);
  f.write(content.data(), content.size());
  f.commit();
}

AtomicFile::AtomicFile(const std::string& path) : path_(path), tmp_(path + ".tmp") {
  FILE* fp = std::fopen(tmp_.c_str(), "wb");
  if (!fp) throw io_error("cannot open for writing: " + tmp_);
  file_ = fp;
}

AtomicFile::~AtomicFile() {
  if (file_) std::fclose(static_cast<FILE*>(file_));
  if (!committed_) std::remove(tmp_.c_str());
}

void AtomicFile::write(const void* data, size_t n) {
  if (n == 0) return;
  if (std::fwrite(data, 1, n, static_cast<FILE*>(file_)) != n)
    throw io_error("short write: " + tmp_);
}

void AtomicFile::commit() {
  FILE* fp = static_cast<FILE*>(file_);
  if (std::fclose(fp) != 0) {
    file_ = nullptr;
    throw io_error("close failed: " + tmp_);
  }
  file_ = nullptr;
  if (std::rename(tmp_.c_str(), path_.c_str()) != 0)
    throw io_error("rename failed: " + path_);
  committed_ = true;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error("read failed: " + path);
  return ss.str();
}

std::string read_binary_file(const std::string& path) { return read_text_file(path); }

void BinaryReader::need(size_t n) {
  if (pos_ + n > data_.size()) throw io_error("truncated file: " + name_);
}

uint32_t BinaryReader::u32() {
  need(4);
  uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

uint64_t BinaryReader::u64() {
  need(8);
  uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

float BinaryReader::f32() {
  need(4);
  float v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

double BinaryReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

void BinaryReader::expect_magic(const char* magic4) {
  need(4);
  if (std::memcmp(data_.data() + pos_, magic4, 4) != 0)
    throw io_error("bad magic in " + name_ + " (expected " + magic4 + ")");
  pos_ += 4;
}

void BinaryReader::done() {
  if (pos_ != data_.size()) throw io_error("trailing bytes in " + name_);
}

}  // namespace eit
