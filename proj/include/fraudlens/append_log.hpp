#pragma once

#include <mutex>
#include <string>
#include <string_view>

namespace fraudlens {

/// Current UTC time as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string utc_timestamp();

/// Append-only line file. Each append is written and fsync'ed before it
/// returns, so an acknowledged line survives a crash. Appends from several
/// threads are serialized.
class AppendOnlyFile {
 public:
  explicit AppendOnlyFile(std::string path);
  ~AppendOnlyFile();
  AppendOnlyFile(const AppendOnlyFile&) = delete;
  AppendOnlyFile& operator=(const AppendOnlyFile&) = delete;

  /// Appends `line` plus a newline.
  void append(std::string_view line);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  int fd_ = -1;
  std::mutex mutex_;
};

}  // namespace fraudlens
