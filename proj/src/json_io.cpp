#include "ccg/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ccg {
namespace io {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    fn(lineno, parsed);
  }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> rows;
  for_each_jsonl(path, [&](std::size_t, const json& j) { rows.push_back(j); });
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& row : rows) out << row.dump() << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_json(const std::filesystem::path& path, const ordered_json& value) {
  write_text(path, value.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace io

ordered_json to_json(const CitationAttributes& attrs) {
  ordered_json j;
  j["intent"] = attrs.intent ? std::string(to_string(*attrs.intent)) : std::string();
  j["keywords"] = attrs.keywords;
  j["sentences"] = attrs.sentences;
  return j;
}

CitationAttributes attributes_from_json(const json& j) {
  CitationAttributes attrs;
  if (!j.is_object()) throw std::invalid_argument("attributes must be an object");
  if (auto it = j.find("intent"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw std::invalid_argument("intent must be a string");
    const auto text = it->get<std::string>();
    if (!text.empty()) {
      attrs.intent = parse_intent(text);
      if (!attrs.intent) throw std::invalid_argument("unknown intent '" + text + "'");
    }
  }
  auto read_list = [&](const char* key, std::vector<std::string>& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    if (!it->is_array()) throw std::invalid_argument(std::string(key) + " must be an array");
    for (const auto& v : *it) {
      if (!v.is_string()) throw std::invalid_argument(std::string(key) + " entries must be strings");
      out.push_back(v.get<std::string>());
    }
  };
  read_list("keywords", attrs.keywords);
  read_list("sentences", attrs.sentences);
  return attrs;
}

ordered_json to_json(const ContextBundle& ctx) {
  ordered_json j;
  j["local_context"] = ctx.local_context;
  j["cited_title"] = ctx.cited_title;
  j["cited_abstract"] = ctx.cited_abstract;
  return j;
}

ContextBundle context_from_json(const json& j) {
  ContextBundle ctx;
  ctx.local_context = j.value("local_context", std::vector<std::string>{});
  ctx.cited_title = j.value("cited_title", std::string());
  ctx.cited_abstract = j.value("cited_abstract", std::string());
  return ctx;
}

}  // namespace ccg
