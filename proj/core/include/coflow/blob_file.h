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


// Tensor container file: one line of compact JSON manifest, a newline, then
// a little-endian float32 blob. The manifest carries the tensor table
// (name, shape, element offset) and the blob length for validation.

#ifndef COFLOW_BLOB_FILE_H_
#define COFLOW_BLOB_FILE_H_

#include <string>
#include <vector>

#include "coflow/tensor.h"

namespace coflow {

struct BlobTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;  // narrowed to float32 on write
};

struct BlobFile {
  std::string kind;       // e.g. "checkpoint", "dataset"
  std::string meta_json;  // free-form JSON object, stored verbatim
  std::vector<BlobTensor> tensors;
};

// Throws std::runtime_error on I/O failure.
void WriteBlobFile(const std::string& path, const BlobFile& file);
// Throws std::runtime_error on I/O failure, malformed manifest, or a blob
// whose length disagrees with the manifest.
BlobFile ReadBlobFile(const std::string& path);

// Rounds through float32, the storage precision.
double ToStored(double v);

}  // namespace coflow

#endif  // COFLOW_BLOB_FILE_H_
