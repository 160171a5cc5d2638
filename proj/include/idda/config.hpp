// Copyright 2026 The idda-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IDDA_CONFIG_HPP
#define IDDA_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace idda {

// Key-value config file: one `key = value` per line, `#` starts a comment,
// blank lines ignored. Keys are dotted paths ("model.embed_dim"). Values are
// kept verbatim; typed getters parse on access. Used for manifests and for
// synthetic-domain specs.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& fallback) const;

  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;

  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;

  bool get_bool_or(const std::string& key, bool fallback) const;

  /// Whitespace-separated list value; empty value -> empty list.
  std::vector<std::string> get_list_or(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Keys matching `prefix.` with the prefix stripped, in sorted order.
  std::vector<std::string> keys_under(const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Round-trippable serialization (sorted keys), for echoing configs into runs.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace idda

#endif  // IDDA_CONFIG_HPP
