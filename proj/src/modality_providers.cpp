#include "timgen/modality_providers.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "timgen/errors.hpp"
#include "timgen/format.hpp"
#include "timgen/numerics/rng.hpp"

namespace timgen {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::optional<std::vector<double>> MockProvider::lookup(std::string_view item_id,
                                                        ModalityKind kind) const {
  std::uint64_t key = fnv1a(item_id);
  key = fnv1a(modality_name(kind), key ^ 0x1f);
  Rng rng(mix64(key ^ mix64(seed_)));
  std::vector<double> v(dims_[index_of(kind)]);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

void TableProvider::insert(std::string item_id, ModalityKind kind, std::vector<double> values) {
  if (values.size() != dims_[index_of(kind)]) {
    throw InvalidArgument(std::string(modality_name(kind)) + " embedding for " + item_id +
                          " has dimension " + std::to_string(values.size()) + ", expected " +
                          std::to_string(dims_[index_of(kind)]));
  }
  table_[{std::move(item_id), kind}] = std::move(values);
}

std::optional<std::vector<double>> TableProvider::lookup(std::string_view item_id,
                                                         ModalityKind kind) const {
  auto it = table_.find(std::pair<std::string, ModalityKind>(std::string(item_id), kind));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

std::unique_ptr<EmbeddingProvider> mock_provider(std::uint64_t seed, ModalityDims dims) {
  return std::make_unique<MockProvider>(seed, dims);
}

std::unique_ptr<TableProvider> file_provider(const std::filesystem::path& path, ModalityDims dims) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open embedding table " + path.string());
  auto table = std::make_unique<TableProvider>(dims);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw ParseError(line_no, "expected item<TAB>kind<TAB>values");
    const std::string item = line.substr(0, tab1);
    if (item.empty()) throw ParseError(line_no, "empty item id");
    const auto kind = parse_modality(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1));
    if (!kind) throw ParseError(line_no, "unknown modality kind");
    std::vector<double> values;
    try {
      values = parse_double_list(std::string_view(line).substr(tab2 + 1));
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
    if (values.size() != dims[index_of(*kind)]) {
      throw ParseError(line_no, "row has " + std::to_string(values.size()) + " values, expected " +
                                    std::to_string(dims[index_of(*kind)]));
    }
    table->insert(item, *kind, std::move(values));
  }
  return table;
}

void write_embedding_table(const TableProvider& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embedding table " + path.string());
  for (const auto& [key, values] : table.rows()) {
    out << key.first << '\t' << modality_name(key.second) << '\t';
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out << ',';
      out << format_double(values[i]);
    }
    out << '\n';
  }
}

}  // namespace timgen
