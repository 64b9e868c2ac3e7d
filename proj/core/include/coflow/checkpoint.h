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


#ifndef COFLOW_CHECKPOINT_H_
#define COFLOW_CHECKPOINT_H_

#include <string>

#include "coflow/nn.h"

namespace coflow {

void SaveCheckpoint(const ParameterSet& params, const std::string& path,
                    const std::string& meta_json = "{}");

// Loads values into `params`, which must have the saved names and shapes.
// Returns the stored metadata JSON.
std::string LoadCheckpoint(ParameterSet& params, const std::string& path);

}  // namespace coflow

#endif  // COFLOW_CHECKPOINT_H_
