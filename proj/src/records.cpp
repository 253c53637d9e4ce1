#include "taco/records.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace taco {

DataError::DataError(const std::filesystem::path& file, std::size_t line,
                     const std::string& what)
    : std::runtime_error(line > 0 ? fmt::format("{}:{}: {}", file.string(), line, what)
                                  : fmt::format("{}: {}", file.string(), what)) {}

DataError::DataError(const std::string& what) : std::runtime_error(what) {}

Json bbox_to_json(const BBox& b) {
  return Json::array({b.x1(), b.y1(), b.x2(), b.y2()});
}

BBox bbox_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("box must be a 4-element array [x1,y1,x2,y2]");
  }
  for (const auto& v : j) {
    if (!v.is_number()) throw std::invalid_argument("box entries must be numbers");
  }
  return BBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
              j[3].get<double>());
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError(path, 0, "cannot open for reading");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw DataError(path, lineno, fmt::format("invalid JSON: {}", e.what()));
    }
    try {
      fn(j, lineno);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(path, lineno, e.what());
    }
  }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path, 0, "cannot open for writing");
  for (const auto& r : rows) out << dump_line(r) << '\n';
  if (!out) throw DataError(path, 0, "write failed");
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path, 0, "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::exception& e) {
    throw DataError(path, 0, fmt::format("invalid JSON: {}", e.what()));
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path, 0, "cannot open for writing");
  out << dump_line(j) << '\n';
  if (!out) throw DataError(path, 0, "write failed");
}

std::string dump_line(const Json& j) { return j.dump(); }

}  // namespace taco
