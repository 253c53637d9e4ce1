#ifndef TACO_RECORDS_HPP_
#define TACO_RECORDS_HPP_

// Line-delimited JSON plumbing shared by datasets, checkpoints, metrics and
// transcript logs.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "taco/geometry.hpp"

namespace taco {

using Json = nlohmann::ordered_json;

// Malformed input data. Carries the file and (1-based) line when known.
class DataError : public std::runtime_error {
 public:
  DataError(const std::filesystem::path& file, std::size_t line,
            const std::string& what);
  explicit DataError(const std::string& what);
};

Json bbox_to_json(const BBox& b);
BBox bbox_from_json(const Json& j);

// Calls fn(record, line_number) for every non-blank line. Parse failures and
// exceptions thrown by fn are rethrown as DataError naming file and line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t)>& fn);

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

// Compact single-line serialization; stable across runs.
std::string dump_line(const Json& j);

}  // namespace taco

#endif  // TACO_RECORDS_HPP_
