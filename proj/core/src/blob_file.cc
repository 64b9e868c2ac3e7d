// Copyright 2026 The CoFlow Authors
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


#include "coflow/blob_file.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "json.hpp"

namespace coflow {
namespace {

using nlohmann::json;

constexpr char kFormat[] = "coflow-blob-v1";

std::uint32_t ToLittle(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) |
           (v >> 24);
  }
  return v;
}

}  // namespace

double ToStored(double v) { return static_cast<double>(static_cast<float>(v)); }

void WriteBlobFile(const std::string& path, const BlobFile& file) {
  json manifest;
  manifest["format"] = kFormat;
  manifest["kind"] = file.kind;
  manifest["meta"] = file.meta_json.empty() ? json::object()
                                            : json::parse(file.meta_json);
  json table = json::array();
  std::int64_t offset = 0;
  for (const BlobTensor& t : file.tensors) {
    if (NumElements(t.shape) != static_cast<std::int64_t>(t.values.size())) {
      throw std::runtime_error("blob tensor " + t.name +
                               ": values do not match shape");
    }
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += static_cast<std::int64_t>(t.values.size());
  }
  manifest["tensors"] = table;
  manifest["blob_bytes"] = offset * 4;

  std::string blob(static_cast<std::size_t>(offset) * 4, '\0');
  std::size_t pos = 0;
  for (const BlobTensor& t : file.tensors) {
    for (double v : t.values) {
      const std::uint32_t bits = ToLittle(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      std::memcpy(blob.data() + pos, &bits, 4);
      pos += 4;
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << manifest.dump() << '\n';
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

BlobFile ReadBlobFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error(path + ": missing manifest line");
  }
  json manifest;
  try {
    manifest = json::parse(header);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": malformed manifest: " + e.what());
  }
  if (manifest.value("format", "") != kFormat) {
    throw std::runtime_error(path + ": unknown format");
  }
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const std::int64_t expected = manifest.at("blob_bytes").get<std::int64_t>();
  if (static_cast<std::int64_t>(blob.size()) != expected) {
    throw std::runtime_error(path + ": blob length " +
                             std::to_string(blob.size()) +
                             " does not match manifest " +
                             std::to_string(expected));
  }
  BlobFile file;
  file.kind = manifest.value("kind", "");
  file.meta_json = manifest.at("meta").dump();
  for (const json& entry : manifest.at("tensors")) {
    BlobTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<Shape>();
    const std::int64_t offset = entry.at("offset").get<std::int64_t>();
    const std::int64_t n = NumElements(t.shape);
    if (offset < 0 || (offset + n) * 4 > expected) {
      throw std::runtime_error(path + ": tensor " + t.name +
                               " extends past the blob");
    }
    t.values.resize(n);
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, blob.data() + (offset + i) * 4, 4);
      t.values[i] = std::bit_cast<float>(ToLittle(bits));
    }
    file.tensors.push_back(std::move(t));
  }
  return file;
}

}  // namespace coflow
