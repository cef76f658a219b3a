#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "nextpoi/graphembed.hpp"

namespace nextpoi::graphembed {

std::span<const double> EmbeddingTable::lookup(std::size_t node) const {
  if (node >= count()) {
    throw std::out_of_range("embedding lookup: node " + std::to_string(node) + " not in table of " +
                            std::to_string(count()));
  }
  return vectors_.row_span(node);
}

std::span<double> EmbeddingTable::mutable_row(std::size_t node) {
  if (node >= count()) throw std::out_of_range("embedding row " + std::to_string(node));
  return vectors_.row_span(node);
}

void write_embedding(const EmbeddingTable& table, std::ostream& out) {
  nlohmann::json j;
  j["format"] = "nextpoi-embedding";
  j["dim"] = table.dim();
  j["count"] = table.count();
  auto& rows = j["vectors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < table.count(); ++i) {
    const auto r = table.lookup(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  out << j.dump() << '\n';
}

EmbeddingTable read_embedding(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "nextpoi-embedding") {
    throw std::runtime_error("not an embedding file (format tag missing)");
  }
  const auto dim = j.at("dim").get<std::size_t>();
  const auto count = j.at("count").get<std::size_t>();
  const auto& rows = j.at("vectors");
  if (rows.size() != count) throw std::runtime_error("embedding file: row count mismatch");
  EmbeddingTable table(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    const auto v = rows[i].get<std::vector<double>>();
    if (v.size() != dim) throw std::runtime_error("embedding file: row " + std::to_string(i) + " has wrong dim");
    std::copy(v.begin(), v.end(), table.mutable_row(i).begin());
  }
  return table;
}

}  // namespace nextpoi::graphembed
