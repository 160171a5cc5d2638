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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "idda/common.hpp"
#include "idda/config.hpp"

using namespace idda;

TEST_CASE("parse_string reads key = value lines with comments") {
  auto cfg = KvConfig::parse_string(
      "# experiment manifest\n"
      "model.embed_dim = 64\n"
      "model.num_heads = 2\n"
      "idda.lambda = 0.4\n"
      "tags = ted news medical\n"
      "flag = true\n"
      "\n");
  CHECK(cfg.get_int("model.embed_dim") == 64);
  CHECK(cfg.get_int("model.num_heads") == 2);
  CHECK(cfg.get_double("idda.lambda") == doctest::Approx(0.4));
  CHECK(cfg.get_list_or("tags") == std::vector<std::string>{"ted", "news", "medical"});
  CHECK(cfg.get_bool_or("flag", false));
  CHECK_FALSE(cfg.get_bool_or("absent", false));
}

TEST_CASE("missing keys and malformed values raise ConfigError") {
  auto cfg = KvConfig::parse_string("a = hello\n");
  CHECK_THROWS_AS(cfg.get_string("zzz"), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("a"), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("a"), ConfigError);
  CHECK(cfg.get_int_or("zzz", 7) == 7);
  CHECK(cfg.get_double_or("zzz", 2.5) == doctest::Approx(2.5));
  CHECK(cfg.get_string_or("zzz", "dflt") == "dflt");
}

TEST_CASE("keys_under lists sorted suffixes of a prefix") {
  auto cfg = KvConfig::parse_string(
      "domain.news.overlap = 0.6\n"
      "domain.med.overlap = 0.2\n"
      "domain.news.pairs = 2000\n"
      "other = 1\n");
  auto keys = cfg.keys_under("domain");
  REQUIRE(keys.size() == 3);
  CHECK(keys[0] == "med.overlap");
  CHECK(keys[1] == "news.overlap");
  CHECK(keys[2] == "news.pairs");
}

TEST_CASE("to_string round-trips through parse_string") {
  auto cfg = KvConfig::parse_string("b = 2\na = one two\nc.d = -0.5\n");
  auto again = KvConfig::parse_string(cfg.to_string());
  CHECK(again.entries() == cfg.entries());
}

TEST_CASE("parse_file reads a file and reports missing files") {
  const std::string path = "test_config_tmp.cfg";
  {
    std::ofstream out(path);
    out << "seed = 42\n# comment\nname = idda\n";
  }
  auto cfg = KvConfig::parse_file(path);
  CHECK(cfg.get_int("seed") == 42);
  CHECK(cfg.get_string("name") == "idda");
  std::remove(path.c_str());
  CHECK_THROWS_AS(KvConfig::parse_file("does_not_exist.cfg"), IoError);
}

TEST_CASE("malformed lines raise ConfigError") {
  CHECK_THROWS_AS(KvConfig::parse_string("novalue\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse_string("= nokey\n"), ConfigError);
}
