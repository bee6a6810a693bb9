#include "cotforge/manifest.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cotforge/errors.hpp"
#include "cotforge/io.hpp"

namespace cotforge {

std::string_view to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::pending: return "pending";
    case ItemStatus::evolved: return "evolved";
    case ItemStatus::filtered_out: return "filtered_out";
    case ItemStatus::accepted: return "accepted";
    case ItemStatus::failed: return "failed";
  }
  return "?";
}

std::optional<ItemStatus> parse_item_status(std::string_view name) {
  for (auto s : {ItemStatus::pending, ItemStatus::evolved, ItemStatus::filtered_out, ItemStatus::accepted,
                 ItemStatus::failed})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

json to_json(const ManifestItem& item) {
  json j{{"type", "item"},
         {"round", item.round},
         {"sample_id", item.sample_id},
         {"strategy", to_string(item.strategy)},
         {"status", to_string(item.status)}};
  if (!item.reason.empty()) j["reason"] = item.reason;
  if (item.child) j["child"] = to_json(*item.child);
  if (!item.detail.empty()) j["detail"] = item.detail;
  return j;
}

ManifestItem manifest_item_from_json(const json& j) {
  ManifestItem item;
  item.round = j.at("round").get<int>();
  item.sample_id = j.at("sample_id").get<std::string>();
  auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  auto status = parse_item_status(j.at("status").get<std::string>());
  if (!strategy || !status) throw DataError("manifest item has an unknown strategy or status");
  item.strategy = *strategy;
  item.status = *status;
  item.reason = j.value("reason", "");
  if (j.contains("child")) item.child = sample_from_json(j.at("child"));
  if (j.contains("detail")) item.detail = j.at("detail");
  return item;
}

RunManifest::RunManifest(RunManifest&& other) noexcept
    : path_(std::move(other.path_)),
      header_(std::move(other.header_)),
      latest_(std::move(other.latest_)),
      seals_(std::move(other.seals_)),
      commits_(other.commits_) {}

RunManifest RunManifest::create(const std::filesystem::path& path, ManifestHeader header) {
  if (std::filesystem::exists(path)) throw ConfigError("manifest already exists: " + path.string());
  RunManifest m;
  m.path_ = path;
  m.header_ = std::move(header);
  io::append_line(path, json{{"type", "header"},
                             {"run_id", m.header_.run_id},
                             {"config_digest", m.header_.config_digest},
                             {"seed_digest", m.header_.seed_digest},
                             {"config", m.header_.config}}
                            .dump());
  return m;
}

RunManifest RunManifest::open(const std::filesystem::path& path) {
  RunManifest m;
  m.path_ = path;
  const std::string text = io::read_file(path);
  const auto lines = io::split_lines(text, /*drop_torn_tail=*/true);
  // Cut a torn tail so later appends start on a fresh line.
  if (!text.empty() && text.back() != '\n') {
    auto keep = text.rfind('\n');
    std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
  }
  if (lines.empty()) throw DataError(path.string() + ": manifest has no header");
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 1) {
      if (rec.value("type", "") != "header") throw DataError(path.string() + ":1: expected a header record");
      m.header_.run_id = rec.at("run_id").get<std::string>();
      m.header_.config_digest = rec.at("config_digest").get<std::string>();
      m.header_.seed_digest = rec.value("seed_digest", "");
      m.header_.config = rec.value("config", json::object());
      continue;
    }
    try {
      m.apply(rec);
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

void RunManifest::apply(const json& rec) {
  const std::string type = rec.at("type").get<std::string>();
  if (type == "item") {
    ManifestItem item = manifest_item_from_json(rec);
    latest_[{item.round, item.sample_id, item.strategy}] = std::move(item);
    ++commits_;
  } else if (type == "seal") {
    seals_[rec.at("round").get<int>()] = rec.at("count").get<std::size_t>();
  } else {
    throw DataError("unknown manifest record type '" + type + "'");
  }
}

void RunManifest::commit(const ManifestItem& item) {
  std::lock_guard lock(mu_);
  if (seals_.count(item.round)) throw InvariantViolation("round " + std::to_string(item.round) + " is sealed");
  Key key{item.round, item.sample_id, item.strategy};
  if (auto it = latest_.find(key); it != latest_.end() && it->second.terminal())
    throw InvariantViolation("item " + item.sample_id + "/" + std::string(to_string(item.strategy)) +
                             " already has a terminal status");
  io::append_line(path_, to_json(item).dump());
  latest_[key] = item;
  ++commits_;
}

void RunManifest::seal(int round, std::size_t accepted_count) {
  std::lock_guard lock(mu_);
  if (seals_.count(round)) throw InvariantViolation("round " + std::to_string(round) + " sealed twice");
  io::append_line(path_, json{{"type", "seal"}, {"round", round}, {"count", accepted_count}}.dump());
  seals_[round] = accepted_count;
}

bool RunManifest::sealed(int round) const {
  std::lock_guard lock(mu_);
  return seals_.count(round) > 0;
}

std::optional<std::size_t> RunManifest::sealed_count(int round) const {
  std::lock_guard lock(mu_);
  auto it = seals_.find(round);
  if (it == seals_.end()) return std::nullopt;
  return it->second;
}

std::optional<ManifestItem> RunManifest::latest(int round, const std::string& sample_id, Strategy strategy) const {
  std::lock_guard lock(mu_);
  auto it = latest_.find({round, sample_id, strategy});
  if (it == latest_.end()) return std::nullopt;
  return it->second;
}

std::vector<ManifestItem> RunManifest::items(int round) const {
  std::lock_guard lock(mu_);
  std::vector<ManifestItem> out;
  for (const auto& [key, item] : latest_)
    if (std::get<0>(key) == round) out.push_back(item);
  return out;
}

std::map<std::string, std::size_t> RunManifest::status_counts() const {
  std::lock_guard lock(mu_);
  std::map<std::string, std::size_t> out;
  for (const auto& [key, item] : latest_) ++out[std::string(to_string(item.status))];
  return out;
}

std::size_t RunManifest::commit_count() const {
  std::lock_guard lock(mu_);
  return commits_;
}

namespace {

bool process_alive(pid_t pid) { return pid > 0 && (::kill(pid, 0) == 0 || errno == EPERM); }

bool try_create_lock(const std::filesystem::path& file) {
  int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) {
    if (errno == EEXIST) return false;
    throw ConfigError("cannot create lock " + file.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  ssize_t n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  if (n != static_cast<ssize_t>(pid.size())) throw ConfigError("cannot write lock " + file.string());
  return true;
}

}  // namespace

RunLock::RunLock(const std::filesystem::path& run_dir) : file_(run_dir / ".lock") {
  std::filesystem::create_directories(run_dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (try_create_lock(file_)) return;
    pid_t owner = 0;
    try {
      owner = static_cast<pid_t>(std::stol(io::read_file(file_)));
    } catch (const std::exception&) {
      owner = 0;
    }
    if (owner == ::getpid() || process_alive(owner))
      throw ConfigError("run directory " + run_dir.string() + " is locked by pid " + std::to_string(owner));
    std::filesystem::remove(file_);
  }
  throw ConfigError("could not acquire lock on " + run_dir.string());
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(file_, ec);
}

}  // namespace cotforge
