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

#include "phrasegen/common.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <atomic>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <mutex>

namespace phrasegen {

namespace log {
namespace {
std::atomic<int> g_level{static_cast<int>(Level::kInfo)};
std::mutex g_mutex;
}  // namespace

void set_level(Level l) { g_level = static_cast<int>(l); }
Level level() { return static_cast<Level>(g_level.load()); }

void write(Level l, std::string_view message) {
  static constexpr const char* kTags[] = {"D", "I", "W", "E"};
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[" << kTags[static_cast<int>(l)] << "] " << message << '\n';
}
}  // namespace log

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string tensors_checksum(const std::vector<std::pair<std::string, torch::Tensor>>& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : tensors) {
    h = fnv1a(name, h);
    auto c = t.detach().contiguous().to(torch::kCPU);
    h = fnv1a(std::string_view(static_cast<const char*>(c.data_ptr()), c.nbytes()), h);
  }
  return hex64(h);
}

std::string parameter_checksum(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> all;
  for (const auto& p : module.named_parameters(true)) all.emplace_back(p.key(), p.value());
  for (const auto& b : module.named_buffers(true)) all.emplace_back(b.key(), b.value());
  return tensors_checksum(all);
}

void freeze(torch::nn::Module& module) {
  for (auto& p : module.parameters(true)) p.set_requires_grad(false);
  module.eval();
}

at::Generator make_generator(std::uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

}  // namespace phrasegen
