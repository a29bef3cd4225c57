#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace songsign {

// Throws NotFound when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes via a temporary sibling and rename.
void write_file(const std::filesystem::path& path, std::string_view data);

// FNV-1a 64-bit, rendered as 16 lowercase hex digits. Stable across runs and
// platforms; used for mock keys and artifact input hashes.
std::string stable_hash(std::string_view data);

using Clock = std::function<std::chrono::system_clock::time_point()>;
Clock system_clock();

// "2024-06-11T10:20:30Z" (UTC, second precision).
std::string rfc3339(std::chrono::system_clock::time_point tp);

std::string env_or(const char* name, std::string fallback);

} // namespace songsign
