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


#include "coflow/checkpoint.h"

#include <stdexcept>

#include "coflow/blob_file.h"

namespace coflow {

void SaveCheckpoint(const ParameterSet& params, const std::string& path,
                    const std::string& meta_json) {
  BlobFile file;
  file.kind = "checkpoint";
  file.meta_json = meta_json;
  for (const auto& e : params.entries()) {
    file.tensors.push_back({e.name, e.value.shape(), e.value.values()});
  }
  WriteBlobFile(path, file);
}

std::string LoadCheckpoint(ParameterSet& params, const std::string& path) {
  BlobFile file = ReadBlobFile(path);
  if (file.kind != "checkpoint") {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  if (file.tensors.size() != params.size()) {
    throw std::runtime_error(path + ": checkpoint holds " +
                             std::to_string(file.tensors.size()) +
                             " tensors, model has " +
                             std::to_string(params.size()));
  }
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < file.tensors.size(); ++i) {
    const auto& want = params.entries()[i];
    const BlobTensor& got = file.tensors[i];
    if (got.name != want.name || got.shape != want.value.shape()) {
      throw std::runtime_error(path + ": tensor " + got.name + " " +
                               ShapeString(got.shape) + " does not match " +
                               want.name + " " +
                               ShapeString(want.value.shape()));
    }
    values.push_back(got.values);
  }
  params.Restore(values);
  return file.meta_json;
}

}  // namespace coflow
