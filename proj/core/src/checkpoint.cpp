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

#include "phrasegen/checkpoint.hpp"

#include <json.hpp>

#include "phrasegen/common.hpp"

namespace fs = std::filesystem;

namespace phrasegen {

CheckpointWriter::CheckpointWriter(std::string kind) {
  meta_["format"] = kCheckpointFormat;
  meta_["kind"] = std::move(kind);
}

CheckpointWriter& CheckpointWriter::meta(const std::string& key, const std::string& value) {
  meta_[key] = value;
  return *this;
}

CheckpointWriter& CheckpointWriter::module(const std::string& name, const torch::nn::Module& m) {
  torch::serialize::OutputArchive sub;
  m.save(sub);
  archive_.write("module." + name, sub);
  return *this;
}

CheckpointWriter& CheckpointWriter::tensor(const std::string& name, const torch::Tensor& t) {
  archive_.write("tensor." + name, t, /*is_buffer=*/true);
  return *this;
}

CheckpointWriter& CheckpointWriter::optimizer(const std::string& name,
                                              const torch::optim::Optimizer& opt) {
  torch::serialize::OutputArchive sub;
  opt.save(sub);
  archive_.write("optim." + name, sub);
  return *this;
}

void CheckpointWriter::save(const fs::path& path) {
  nlohmann::json j(meta_);
  archive_.write("meta", c10::IValue(j.dump()));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  try {
    archive_.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot write checkpoint '" + path.string() + "': " + e.what_without_backtrace());
  }
  fs::rename(tmp, path);
}

CheckpointReader::CheckpointReader(const fs::path& path, const std::string& expected_kind)
    : path_(path) {
  if (!fs::exists(path)) throw CheckpointError("checkpoint '" + path.string() + "' does not exist");
  try {
    archive_.load_from(path.string());
    c10::IValue v;
    archive_.read("meta", v);
    meta_ = nlohmann::json::parse(v.toStringRef()).get<std::map<std::string, std::string>>();
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint '" + path.string() + "' is corrupt or unreadable: " + e.what());
  }
  if (meta("format") != kCheckpointFormat) {
    throw CheckpointError("checkpoint '" + path.string() + "' has unsupported format '" +
                          meta("format") + "'");
  }
  if (meta("kind") != expected_kind) {
    throw CheckpointError("checkpoint '" + path.string() + "' holds '" + meta("kind") +
                          "', expected '" + expected_kind + "'");
  }
}

bool CheckpointReader::has_meta(const std::string& key) const { return meta_.count(key) > 0; }

std::string CheckpointReader::meta(const std::string& key) const {
  auto it = meta_.find(key);
  return it == meta_.end() ? std::string() : it->second;
}

void CheckpointReader::module(const std::string& name, torch::nn::Module& m) {
  torch::serialize::InputArchive sub;
  try {
    if (!archive_.try_read("module." + name, sub)) {
      throw CheckpointError("checkpoint '" + path_.string() + "' has no module '" + name + "'");
    }
    m.load(sub);
  } catch (const c10::Error& e) {
    throw CheckpointError("checkpoint '" + path_.string() + "': module '" + name +
                          "' does not match: " + e.what_without_backtrace());
  }
}

torch::Tensor CheckpointReader::tensor(const std::string& name) {
  torch::Tensor t;
  if (!archive_.try_read("tensor." + name, t, /*is_buffer=*/true)) {
    throw CheckpointError("checkpoint '" + path_.string() + "' has no tensor '" + name + "'");
  }
  return t;
}

void CheckpointReader::optimizer(const std::string& name, torch::optim::Optimizer& opt) {
  torch::serialize::InputArchive sub;
  if (!archive_.try_read("optim." + name, sub)) {
    throw CheckpointError("checkpoint '" + path_.string() + "' has no optimizer '" + name + "'");
  }
  try {
    opt.load(sub);
  } catch (const c10::Error& e) {
    throw CheckpointError("checkpoint '" + path_.string() + "': optimizer '" + name +
                          "' does not match: " + e.what_without_backtrace());
  }
}

void CheckpointReader::require(const std::string& key, const std::string& expected,
                               const std::string& what) const {
  if (meta(key) != expected) {
    throw CheckpointError("checkpoint '" + path_.string() + "' was written for a different " + what +
                          " (" + key + " " + meta(key) + " != " + expected + ")");
  }
}

}  // namespace phrasegen
