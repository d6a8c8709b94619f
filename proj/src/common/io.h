#ifndef LADPROTO_COMMON_IO_H_
#define LADPROTO_COMMON_IO_H_

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace ladproto {

std::string read_file(const std::filesystem::path& path);

// Writes through a temporary file and renames, so readers never observe a
// partially written artifact.
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Git blob hash: sha1("blob <len>\0" + bytes), lowercase hex.
std::string content_fingerprint(std::string_view bytes);
std::string file_fingerprint(const std::filesystem::path& path);

// 64-bit FNV-1a as 16 hex digits; used for short config fingerprints.
std::string short_hash(std::string_view bytes);

// Progress output. Defaults to stdout; the C API lets callers redirect it.
using LogSink = std::function<void(const std::string&)>;
void set_log_sink(LogSink sink);
void log_line(const std::string& line);

}  // namespace ladproto

#endif  // LADPROTO_COMMON_IO_H_
