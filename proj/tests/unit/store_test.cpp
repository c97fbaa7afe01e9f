// Copyright 2026 The dascore Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "dascore/store/cache.hpp"
#include "dascore/store/ledger.hpp"
#include "test_support.hpp"

namespace dascore::store {
namespace {

void exercise_cache(Cache& cache) {
  const std::string key = util::sha256_hex("k");
  EXPECT_FALSE(cache.get(key).has_value());
  cache.put(key, "value");
  EXPECT_EQ(cache.get(key), "value");
  EXPECT_NO_THROW(cache.put(key, "value"));  // same bytes again is fine
  EXPECT_THROW(cache.put(key, "other"), IntegrityError);
  EXPECT_EQ(cache.get(key), "value");
  EXPECT_EQ(cache.size(), 1u);
}

TEST(MemoryCache, WriteOnceSemantics) {
  MemoryCache cache;
  exercise_cache(cache);
}

TEST(DirectoryCache, WriteOnceSemanticsAndPersistence) {
  const auto dir = testing::temp_dir("cache");
  {
    DirectoryCache cache(dir);
    exercise_cache(cache);
  }
  DirectoryCache reopened(dir);
  EXPECT_EQ(reopened.get(util::sha256_hex("k")), "value");
  EXPECT_EQ(reopened.prune(), 1u);
  EXPECT_EQ(reopened.size(), 0u);
  EXPECT_FALSE(reopened.get(util::sha256_hex("k")).has_value());
  EXPECT_THROW(reopened.get("../etc"), InvalidArgument);
  std::filesystem::remove_all(dir);
}

TEST(DirectoryCache, BinaryValuesSurvive) {
  const auto dir = testing::temp_dir("cache-bin");
  DirectoryCache cache(dir);
  std::string bytes;
  for (int i = 0; i < 256; ++i) bytes.push_back(static_cast<char>(i));
  cache.put("abcdef", bytes);
  EXPECT_EQ(cache.get("abcdef"), bytes);
  std::filesystem::remove_all(dir);
}

TEST(CacheKey, DependsOnEveryComponent) {
  const Json body{{"q", 1}};
  const auto base = cache_key("b", "/v1/vqa", body);
  EXPECT_EQ(base, cache_key("b", "/v1/vqa", parse_json(R"({ "q" : 1 })")));
  EXPECT_NE(base, cache_key("c", "/v1/vqa", body));
  EXPECT_NE(base, cache_key("b", "/v1/generate", body));
  EXPECT_NE(base, cache_key("b", "/v1/vqa", Json{{"q", 2}}));
  EXPECT_TRUE(util::is_sha256_hex(base));
}

LedgerEntry entry(const std::string& session, int n) {
  LedgerEntry e;
  e.timestamp = utc_timestamp();
  e.session_id = session;
  e.kind = EntryKind::kReport;
  e.payload = Json{{"n", n}};
  return e;
}

TEST(FileLedger, ScansInAppendOrderAcrossReopen) {
  const auto dir = testing::temp_dir("ledger");
  {
    FileLedger ledger(dir, false);
    for (int i = 0; i < 5; ++i) ledger.append(entry(i % 2 ? "odd" : "even", i));
  }
  FileLedger ledger(dir, false);
  ledger.append(entry("even", 5));
  const auto all = ledger.scan();
  ASSERT_EQ(all.size(), 6u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(all[i].payload.at("n"), i);
  const auto odd = ledger.session("odd");
  ASSERT_EQ(odd.size(), 2u);
  EXPECT_EQ(odd[1].payload.at("n"), 3);
  std::filesystem::remove_all(dir);
}

TEST(FileLedger, ConcurrentAppendsStayWholeLines) {
  const auto dir = testing::temp_dir("ledger-mt");
  FileLedger ledger(dir, false);
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&ledger, t] {
      for (int i = 0; i < 50; ++i) ledger.append(entry("t" + std::to_string(t), i));
    });
  }
  threads.clear();
  EXPECT_EQ(ledger.scan().size(), 200u);
  for (int t = 0; t < 4; ++t) {
    const auto mine = ledger.session("t" + std::to_string(t));
    ASSERT_EQ(mine.size(), 50u);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(mine[i].payload.at("n"), i);
  }
  std::filesystem::remove_all(dir);
}

TEST(FileLedger, TornFinalLineIsDropped) {
  const auto dir = testing::temp_dir("ledger-torn");
  {
    FileLedger ledger(dir, false);
    ledger.append(entry("s", 0));
    ledger.append(entry("s", 1));
  }
  {
    std::ofstream out(dir / "ledger.jsonl", std::ios::app | std::ios::binary);
    out << R"({"kind":"report","payload":{"n":)";
  }
  EXPECT_EQ(FileLedger::read_file(dir / "ledger.jsonl").size(), 2u);
  std::filesystem::remove_all(dir);
}

TEST(FileLedger, CorruptMiddleLineIsAnIntegrityError) {
  const auto dir = testing::temp_dir("ledger-bad");
  {
    std::ofstream out(dir / "ledger.jsonl", std::ios::binary);
    out << "garbage\n" << canonical(to_json(entry("s", 1))) << "\n";
  }
  EXPECT_THROW(FileLedger::read_file(dir / "ledger.jsonl"), IntegrityError);
  std::filesystem::remove_all(dir);
}

TEST(LedgerEntry, JsonRoundTrip) {
  auto e = entry("abc", 7);
  e.kind = EntryKind::kVqa;
  e.request_hash = util::sha256_hex("r");
  const auto back = ledger_entry_from_json(parse_json(canonical(to_json(e))));
  EXPECT_EQ(back.session_id, "abc");
  EXPECT_EQ(back.kind, EntryKind::kVqa);
  EXPECT_EQ(back.request_hash, e.request_hash);
  EXPECT_EQ(back.payload, e.payload);
  EXPECT_THROW(parse_entry_kind("nope"), ParseError);
}

}  // namespace
}  // namespace dascore::store
