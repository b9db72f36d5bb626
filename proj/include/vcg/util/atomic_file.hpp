#pragma once

#include <filesystem>
#include <string_view>

namespace vcg {

/// Writes bytes to a sibling temp file and renames it over `path`, so readers
/// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace vcg
