#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ccg/types.hpp"
#include "json.hpp"

namespace ccg {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace io {

/// Calls `fn(line_number, parsed)` for each non-blank line. Throws on
/// unreadable files; malformed lines throw with the line number attached.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& rows);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const ordered_json& value);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace io

ordered_json to_json(const CitationAttributes& attrs);
CitationAttributes attributes_from_json(const json& j);
ordered_json to_json(const ContextBundle& ctx);
ContextBundle context_from_json(const json& j);

}  // namespace ccg
