#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace fcid {

/// Writes via a sibling temp file and rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view data);

std::string hex64(std::uint64_t v);

}  // namespace fcid
