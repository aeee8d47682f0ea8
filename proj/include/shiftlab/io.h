// Copyright 2026 The ShiftLab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHIFTLAB_IO_H_
#define SHIFTLAB_IO_H_

#include <filesystem>
#include <string>
#include <string_view>

namespace shiftlab {

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file. Throws kIoError.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view content);

std::string ReadFile(const std::filesystem::path& path);

// Shortest round-trippable decimal form of a double ("%.17g" family).
std::string FormatExact(double value);
// Fixed number of significant digits ("%.9g" by default).
std::string FormatSig(double value, int digits = 9);

}  // namespace shiftlab

#endif  // SHIFTLAB_IO_H_
