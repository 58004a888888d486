// base/io.cc

// Copyright 2026  The cllab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "base/io.h"

#include <cstring>
#include <fstream>
#include <sstream>

namespace cllab {

namespace {

template <typename T>
void WriteLe(std::ostream &os, T v) {
  unsigned char buf[sizeof(T)];
  uint64 bits = 0;
  std::memcpy(&bits, &v, sizeof(T));
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char *>(buf), sizeof(T));
  if (!os) throw IoError("write failed");
}

template <typename T>
T ReadLe(std::istream &is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char *>(buf), sizeof(T));
  if (!is) throw IoError("unexpected end of stream");
  uint64 bits = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<uint64>(buf[i]) << (8 * i);
  T v;
  std::memcpy(&v, &bits, sizeof(T));
  return v;
}

}  // namespace

void WriteU8(std::ostream &os, uint8_t v) {
  os.put(static_cast<char>(v));
  if (!os) throw IoError("write failed");
}

void WriteI32(std::ostream &os, int32 v) { WriteLe<int32>(os, v); }
void WriteI64(std::ostream &os, int64 v) { WriteLe<int64>(os, v); }
void WriteF64(std::ostream &os, double v) { WriteLe<double>(os, v); }

void WriteF64Array(std::ostream &os, const double *data, int64 count) {
  for (int64 i = 0; i < count; ++i) WriteF64(os, data[i]);
}

void WriteString(std::ostream &os, const std::string &s) {
  WriteI64(os, static_cast<int64>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!os) throw IoError("write failed");
}

uint8_t ReadU8(std::istream &is) {
  int c = is.get();
  if (c == EOF) throw IoError("unexpected end of stream");
  return static_cast<uint8_t>(c);
}

int32 ReadI32(std::istream &is) { return ReadLe<int32>(is); }
int64 ReadI64(std::istream &is) { return ReadLe<int64>(is); }
double ReadF64(std::istream &is) { return ReadLe<double>(is); }

void ReadF64Array(std::istream &is, double *data, int64 count) {
  for (int64 i = 0; i < count; ++i) data[i] = ReadF64(is);
}

std::string ReadString(std::istream &is) {
  int64 len = ReadI64(is);
  if (len < 0 || len > (1LL << 40)) throw IoError("corrupt string length");
  std::string s(static_cast<size_t>(len), '\0');
  is.read(s.data(), len);
  if (!is) throw IoError("unexpected end of stream");
  return s;
}

void WriteMagic(std::ostream &os, const char magic[8]) {
  os.write(magic, 8);
  if (!os) throw IoError("write failed");
}

void ExpectMagic(std::istream &is, const char magic[8]) {
  char buf[8];
  is.read(buf, 8);
  if (!is || std::memcmp(buf, magic, 8) != 0)
    throw IoError("bad file magic (expected " + std::string(magic, 8) + ")");
}

std::string ReadTextFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string &path, const std::string &content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw IoError("write failed: " + path);
}

void OpenOrThrow(std::ifstream &is, const std::string &path) {
  is.open(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
}

void OpenOrThrow(std::ofstream &os, const std::string &path) {
  os.open(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
}

}  // namespace cllab
