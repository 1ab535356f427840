#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ensctl/common.hpp"

namespace ensctl::io {

/// Shortest round-trip-safe text for a double: 17 significant digits, '.'
/// decimal separator regardless of locale.
std::string format_number(double v);

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<double> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

/// Writes text to path, creating parent directories. Returns the bytes written.
std::string write_text(const std::filesystem::path& path, const std::string& text);

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string content_hash(std::string_view bytes);

/// Parses a complex number from a JSON number or a [re, im] pair.
Complex complex_from_json(const nlohmann::json& j);
nlohmann::json complex_to_json(Complex z);

}  // namespace ensctl::io
