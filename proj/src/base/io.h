// base/io.h

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

#ifndef CLLAB_BASE_IO_H_
#define CLLAB_BASE_IO_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "base/common.h"

namespace cllab {

// Little-endian binary primitives.  Every binary artifact (checkpoints,
// reference caches, feature files) goes through these so the byte layout is
// identical on any host.
void WriteU8(std::ostream &os, uint8_t v);
void WriteI32(std::ostream &os, int32 v);
void WriteI64(std::ostream &os, int64 v);
void WriteF64(std::ostream &os, double v);
void WriteF64Array(std::ostream &os, const double *data, int64 count);
void WriteString(std::ostream &os, const std::string &s);  // i64 length + bytes

uint8_t ReadU8(std::istream &is);
int32 ReadI32(std::istream &is);
int64 ReadI64(std::istream &is);
double ReadF64(std::istream &is);
void ReadF64Array(std::istream &is, double *data, int64 count);
std::string ReadString(std::istream &is);

// 8-byte file magic, checked on read.
void WriteMagic(std::ostream &os, const char magic[8]);
void ExpectMagic(std::istream &is, const char magic[8]);

std::string ReadTextFile(const std::string &path);
void WriteTextFile(const std::string &path, const std::string &content);

// Opens for binary read/write, throwing IoError with the path on failure.
void OpenOrThrow(std::ifstream &is, const std::string &path);
void OpenOrThrow(std::ofstream &os, const std::string &path);

}  // namespace cllab

#endif  // CLLAB_BASE_IO_H_
