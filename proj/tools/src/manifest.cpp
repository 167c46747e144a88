// Copyright 2026 The oamil Authors. All Rights Reserved.
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

#include "oamil/tools/manifest.hpp"

#include <fstream>
#include <sstream>

namespace oamil::tools {

void Manifest::Set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n#") != std::string::npos || key.front() == ' ') {
    throw ManifestError("invalid manifest key '" + key + "'");
  }
  if (value.find('\n') != std::string::npos) {
    throw ManifestError("manifest value for '" + key + "' spans lines");
  }
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

const std::string* Manifest::Find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string Manifest::ToString() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

Manifest Manifest::Parse(const std::string& text, const std::string& source) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ManifestError(source + ":" + std::to_string(number) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    if (m.Find(key)) throw ManifestError(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    m.Set(key, line.substr(eq + 1));
  }
  return m;
}

void Manifest::Write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestError(path.string() + ": cannot open manifest for writing");
  out << ToString();
  if (!out) throw ManifestError(path.string() + ": manifest write failed");
}

Manifest Manifest::Read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError(path.string() + ": cannot open manifest");
  std::ostringstream text;
  text << in.rdbuf();
  return Parse(text.str(), path.string());
}

}  // namespace oamil::tools
