#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cotforge/dataset.hpp"

namespace cotforge {

/// Per (sample, strategy) state within one round. `evolved` is an
/// intermediate checkpoint holding the candidate; the rest are terminal.
enum class ItemStatus { pending, evolved, filtered_out, accepted, failed };

std::string_view to_string(ItemStatus s);
std::optional<ItemStatus> parse_item_status(std::string_view name);

struct ManifestItem {
  int round = 1;
  std::string sample_id;
  Strategy strategy = Strategy::complicate;
  ItemStatus status = ItemStatus::pending;
  /// Failure reason for `failed`, empty otherwise.
  std::string reason;
  /// Accepted child sample.
  std::optional<CoTSample> child;
  /// Candidate for `evolved`; ballots and flags for terminal records.
  json detail = json::object();

  bool terminal() const {
    return status == ItemStatus::filtered_out || status == ItemStatus::accepted ||
           status == ItemStatus::failed;
  }
};

json to_json(const ManifestItem& item);
ManifestItem manifest_item_from_json(const json& j);

struct ManifestHeader {
  std::string run_id;
  std::string config_digest;
  std::string seed_digest;
  json config = json::object();
};

/// Append-only run ledger. Each record is one line committed with a single
/// write; a torn last line (crash mid-write) is ignored on reopen.
class RunManifest {
 public:
  using Key = std::tuple<int, std::string, Strategy>;

  /// Starts a new manifest; fails if `path` already exists.
  static RunManifest create(const std::filesystem::path& path, ManifestHeader header);
  /// Reopens an existing manifest for resume.
  static RunManifest open(const std::filesystem::path& path);

  RunManifest(RunManifest&& other) noexcept;

  const ManifestHeader& header() const { return header_; }
  const std::filesystem::path& path() const { return path_; }

  /// Durably records an item state; thread-safe.
  void commit(const ManifestItem& item);
  /// Marks the round complete; later item commits for it are rejected.
  void seal(int round, std::size_t accepted_count);

  bool sealed(int round) const;
  std::optional<std::size_t> sealed_count(int round) const;
  /// Latest record for the key, if any.
  std::optional<ManifestItem> latest(int round, const std::string& sample_id, Strategy strategy) const;
  /// Latest record per key within a round.
  std::vector<ManifestItem> items(int round) const;
  std::map<std::string, std::size_t> status_counts() const;
  std::size_t commit_count() const;

 private:
  RunManifest() = default;
  void apply(const json& record);

  std::filesystem::path path_;
  ManifestHeader header_;
  mutable std::mutex mu_;
  std::map<Key, ManifestItem> latest_;
  std::map<int, std::size_t> seals_;
  std::size_t commits_ = 0;
};

/// Exclusive ownership of a run directory via "<dir>/.lock" holding the owner
/// pid. A lock left by a dead process is taken over.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path file_;
};

}  // namespace cotforge
