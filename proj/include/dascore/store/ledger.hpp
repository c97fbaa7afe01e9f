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

#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"

namespace dascore::store {

enum class EntryKind { kDecompose, kVqa, kGenerate, kReport, kOutcome };

inline std::string_view to_string(EntryKind kind) {
  switch (kind) {
    case EntryKind::kDecompose: return "decompose";
    case EntryKind::kVqa: return "vqa";
    case EntryKind::kGenerate: return "generate";
    case EntryKind::kReport: return "report";
    case EntryKind::kOutcome: return "outcome";
  }
  return "report";
}

inline EntryKind parse_entry_kind(std::string_view text) {
  if (text == "decompose") return EntryKind::kDecompose;
  if (text == "vqa") return EntryKind::kVqa;
  if (text == "generate") return EntryKind::kGenerate;
  if (text == "report") return EntryKind::kReport;
  if (text == "outcome") return EntryKind::kOutcome;
  throw ParseError("unknown ledger entry kind", std::string(text));
}

struct LedgerEntry {
  std::string timestamp;
  std::string session_id;
  EntryKind kind = EntryKind::kReport;
  std::string request_hash;
  std::string response_hash;
  Json payload;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto seconds = std::chrono::time_point_cast<std::chrono::seconds>(now);
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(now - seconds).count();
  const std::time_t t = std::chrono::system_clock::to_time_t(seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[40];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[64];
  std::snprintf(out, sizeof(out), "%s.%06lldZ", buffer, static_cast<long long>(micros));
  return out;
}

inline Json to_json(const LedgerEntry& e) {
  return Json{{"ts", e.timestamp},
              {"session_id", e.session_id},
              {"kind", std::string(to_string(e.kind))},
              {"request_hash", e.request_hash},
              {"response_hash", e.response_hash},
              {"payload", e.payload}};
}

inline LedgerEntry ledger_entry_from_json(const Json& j) {
  using namespace json_detail;
  LedgerEntry e;
  e.timestamp = string_at(j, "ts", "", true);
  e.session_id = string_at(j, "session_id", "", true);
  e.kind = parse_entry_kind(string_at(j, "kind", ""));
  e.request_hash = string_at(j, "request_hash", "", true);
  e.response_hash = string_at(j, "response_hash", "", true);
  e.payload = member(j, "payload", "");
  return e;
}

/// Append-only run log. Appends are serialized; scans return entries in
/// insertion order.
class Ledger {
 public:
  virtual ~Ledger() = default;
  virtual void append(const LedgerEntry& entry) = 0;
  virtual std::vector<LedgerEntry> scan() const = 0;

  std::vector<LedgerEntry> session(std::string_view session_id) const {
    std::vector<LedgerEntry> out;
    for (auto& e : scan()) {
      if (e.session_id == session_id) out.push_back(std::move(e));
    }
    return out;
  }
};

class MemoryLedger final : public Ledger {
 public:
  void append(const LedgerEntry& entry) override {
    std::lock_guard lock(mutex_);
    entries_.push_back(entry);
  }

  std::vector<LedgerEntry> scan() const override {
    std::lock_guard lock(mutex_);
    return entries_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<LedgerEntry> entries_;
};

/// JSON Lines file `<dir>/ledger.jsonl`. Each record is written with a single
/// O_APPEND write, so a crash can at worst leave a torn final line, which
/// `scan` drops.
class FileLedger final : public Ledger {
 public:
  explicit FileLedger(const std::filesystem::path& dir, bool sync = true)
      : path_(dir / "ledger.jsonl"), sync_(sync) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create ledger directory " + dir.string() + ": " + ec.message());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open ledger " + path_.string() + ": " + std::strerror(errno));
  }

  FileLedger(const FileLedger&) = delete;
  FileLedger& operator=(const FileLedger&) = delete;

  ~FileLedger() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void append(const LedgerEntry& entry) override {
    std::string line = canonical(to_json(entry));
    line.push_back('\n');
    std::lock_guard lock(mutex_);
    const char* data = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      const ssize_t n = ::write(fd_, data, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("ledger write failed: " + std::string(std::strerror(errno)));
      }
      data += n;
      left -= static_cast<std::size_t>(n);
    }
    if (sync_ && ::fdatasync(fd_) != 0) {
      throw IoError("ledger sync failed: " + std::string(std::strerror(errno)));
    }
  }

  std::vector<LedgerEntry> scan() const override {
    std::lock_guard lock(mutex_);
    return read_file(path_);
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  static std::vector<LedgerEntry> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read ledger " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
    std::vector<LedgerEntry> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      try {
        out.push_back(ledger_entry_from_json(Json::parse(lines[i])));
      } catch (const std::exception& e) {
        if (i + 1 == lines.size()) break;  // torn tail
        throw IntegrityError("ledger " + path.string() + " line " + std::to_string(i + 1) +
                             " is corrupt: " + e.what());
      }
    }
    return out;
  }

 private:
  std::filesystem::path path_;
  bool sync_;
  int fd_ = -1;
  mutable std::mutex mutex_;
};

}  // namespace dascore::store
