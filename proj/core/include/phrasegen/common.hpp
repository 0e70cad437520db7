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

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace phrasegen {

/// Base class for all errors raised by the library. `kind()` is a short,
/// machine-parseable error class used by the command line front end.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error("data", w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error("shape", w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error("numeric", w) {}
};
struct CheckpointError : Error {
  explicit CheckpointError(const std::string& w) : Error("checkpoint", w) {}
};
/// A pipeline stage was invoked before the stage it depends on produced its
/// artifact. `stage()` names the command that has to run first.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(std::string stage, const std::string& w)
      : Error("prerequisite", w), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

namespace log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

void set_level(Level level);
Level level();
void write(Level level, std::string_view message);

template <typename... Args>
void info(const Args&... args) {
  if (level() > Level::kInfo) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::kInfo, os.str());
}
template <typename... Args>
void warn(const Args&... args) {
  if (level() > Level::kWarn) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::kWarn, os.str());
}
template <typename... Args>
void debug(const Args&... args) {
  if (level() > Level::kDebug) return;
  std::ostringstream os;
  (os << ... << args);
  write(Level::kDebug, os.str());
}

}  // namespace log

/// 64-bit FNV-1a. Stable across platforms; used for config and vocabulary
/// fingerprints stored inside checkpoints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Mixes a base seed with a stream identifier (step, epoch, record id).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Fingerprint of every parameter and buffer of a module: hashes the raw
/// bytes, so any change to any element is detected.
std::string parameter_checksum(const torch::nn::Module& module);
std::string tensors_checksum(const std::vector<std::pair<std::string, torch::Tensor>>& tensors);

/// Marks every parameter as non-trainable and puts the module in eval mode.
void freeze(torch::nn::Module& module);

/// A torch generator seeded deterministically.
at::Generator make_generator(std::uint64_t seed);

}  // namespace phrasegen
