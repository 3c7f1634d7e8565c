#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "robophoto/core.hpp"

namespace robophoto::core {

/// Converts one JSONL object into a record. Face images named by
/// face_image_path are resolved against base_dir and loaded. Structural
/// problems throw ParseError carrying line.
PictureRecord record_from_json(const nlohmann::json& j, std::size_t line,
                               const std::filesystem::path& base_dir);
nlohmann::json record_to_json(const PictureRecord& record);

/// Parses JSON Lines. Blank lines are skipped; a malformed line throws
/// ParseError naming its 1-based line number.
std::vector<PictureRecord> read_records(std::istream& in, const std::filesystem::path& base_dir);

/// read_records + validate_dataset.
ValidationResult load_dataset(const std::filesystem::path& path, const ValidateOptions& options = {});

void write_jsonl(std::ostream& out, const Dataset& dataset);
void write_jsonl(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace robophoto::core
