#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace morphtest {

/// Called between the temp-file write and the rename. Tests use it to
/// simulate a crash at the worst moment.
using BeforeRenameHook = std::function<void(const std::filesystem::path& temp)>;

/// Writes `content` to a temp file in the target directory, then renames it
/// over `path`. Readers see either the old file or the complete new one.
/// Throws IoFailure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content,
                       const BeforeRenameHook& before_rename = {});

/// Throws IoFailure when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

/// UTC, ISO-8601 with milliseconds, e.g. 2025-03-01T10:20:30.123Z.
std::string iso8601_now();

}  // namespace morphtest
