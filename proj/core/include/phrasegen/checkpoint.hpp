// Copyright (c) 2026, The phrasegen Authors. All rights reserved.
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

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <torch/torch.h>

namespace phrasegen {

inline constexpr const char* kCheckpointFormat = "phrasegen-ckpt-1";

/// Writer for a single checkpoint file: named module sub-archives, raw
/// tensors and string metadata. The format tag is always written.
class CheckpointWriter {
 public:
  explicit CheckpointWriter(std::string kind);
  CheckpointWriter& meta(const std::string& key, const std::string& value);
  CheckpointWriter& module(const std::string& name, const torch::nn::Module& m);
  CheckpointWriter& tensor(const std::string& name, const torch::Tensor& t);
  CheckpointWriter& optimizer(const std::string& name, const torch::optim::Optimizer& opt);
  /// Writes to a temporary file then renames, so a crash never leaves a
  /// truncated checkpoint under the final name.
  void save(const std::filesystem::path& path);

 private:
  torch::serialize::OutputArchive archive_;
  std::map<std::string, std::string> meta_;
};

class CheckpointReader {
 public:
  /// Throws CheckpointError when the file is missing, unreadable, has a
  /// different format tag or a different kind.
  CheckpointReader(const std::filesystem::path& path, const std::string& expected_kind);

  std::string meta(const std::string& key) const;
  bool has_meta(const std::string& key) const;
  void module(const std::string& name, torch::nn::Module& m);
  torch::Tensor tensor(const std::string& name);
  void optimizer(const std::string& name, torch::optim::Optimizer& opt);
  /// Throws CheckpointError unless meta(key) == expected.
  void require(const std::string& key, const std::string& expected, const std::string& what) const;

 private:
  std::filesystem::path path_;
  torch::serialize::InputArchive archive_;
  std::map<std::string, std::string> meta_;
};

}  // namespace phrasegen
