#include <fstream>
#include <sstream>

#include "pft/dataset.hpp"
#include "pft/errors.hpp"
#include "pft/image_io.hpp"

namespace pft {

namespace {

constexpr const char* kHeader = "path,person_id,camera_id";

std::size_t parse_index(const std::string& field, const std::string& what, std::size_t line) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size() || field.front() == '-') {
    throw DataError("manifest row " + std::to_string(line) + ": invalid " + what + " '" + field + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<DatasetRecord> load_manifest(const std::filesystem::path& path, ImageSize size) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  const std::filesystem::path base = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest '" + path.string() + "' is empty (missing header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw DataError("manifest row 1: header must be exactly '" + std::string(kHeader) + "'");

  std::vector<DatasetRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream s(line);
    std::string f;
    while (std::getline(s, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 3 || fields[0].empty()) {
      throw DataError("manifest row " + std::to_string(row) + ": expected 3 fields path,person_id,camera_id");
    }
    DatasetRecord rec;
    rec.person_id = parse_index(fields[1], "person_id", row);
    rec.camera_id = parse_index(fields[2], "camera_id", row);
    try {
      Tensor img = read_ppm(base / fields[0]);
      rec.image = resize_bilinear(img, size.height, size.width);
    } catch (const DataError& e) {
      throw DataError("manifest row " + std::to_string(row) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const std::filesystem::path& path, std::span<const DatasetRecord> records) {
  const std::filesystem::path dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << kHeader << '\n';
  const std::string stem = path.stem().string();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string name = stem + "_" + std::to_string(i) + ".ppm";
    write_ppm(dir / name, records[i].image);
    out << name << ',' << records[i].person_id << ',' << records[i].camera_id << '\n';
  }
}

}  // namespace pft
