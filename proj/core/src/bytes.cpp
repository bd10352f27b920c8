// Copyright 2026 the atc authors
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

#include "atc/bytes.hpp"

#include <cstdio>
#include <filesystem>

namespace atc {

std::vector<uint8_t> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw_io(Errc::kIoFailure, "cannot open for reading: " + path);
  std::fseek(f, 0, SEEK_END);
  long size = std::ftell(f);
  if (size < 0) {
    std::fclose(f);
    throw_io(Errc::kIoFailure, "cannot stat: " + path);
  }
  std::fseek(f, 0, SEEK_SET);
  std::vector<uint8_t> data(static_cast<size_t>(size));
  size_t got = size ? std::fread(data.data(), 1, data.size(), f) : 0;
  std::fclose(f);
  if (got != data.size()) throw_io(Errc::kIoFailure, "short read: " + path);
  return data;
}

void write_file_atomic(const std::string& path, std::span<const uint8_t> data) {
  const std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw_io(Errc::kIoFailure, "cannot open for writing: " + tmp);
  size_t put = data.empty() ? 0 : std::fwrite(data.data(), 1, data.size(), f);
  bool flushed = std::fflush(f) == 0;
  std::fclose(f);
  if (put != data.size() || !flushed) {
    std::remove(tmp.c_str());
    throw_io(Errc::kIoFailure, "short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw_io(Errc::kIoFailure, "rename failed: " + path + " (" + ec.message() + ")");
  }
}

}  // namespace atc
