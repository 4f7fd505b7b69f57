#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace unimoco {

/// Binary container shared by checkpoints and datasets:
///   "UMC1" | u32 LE header length | UTF-8 JSON header | f64 LE arrays
/// The header's "arrays" entry lists {name, shape} in payload order.
struct ArrayEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

struct Container {
  nlohmann::json header;
  std::vector<ArrayEntry> arrays;

  /// Throws FormatError when absent.
  const ArrayEntry& get(const std::string& name) const;
};

std::string encode_container(const Container& c);
/// Throws FormatError on bad magic, version, truncation or trailing bytes.
Container decode_container(const std::string& bytes);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

}  // namespace unimoco
