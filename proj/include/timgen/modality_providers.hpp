#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "timgen/modality.hpp"

namespace timgen {

/// Source of per-item modality embeddings. Lookups are read-only and
/// deterministic; an absent embedding is reported as std::nullopt.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::optional<std::vector<double>> lookup(std::string_view item_id,
                                                    ModalityKind kind) const = 0;
  virtual std::size_t dimension(ModalityKind kind) const = 0;
};

/// Unit-norm Gaussian vectors keyed by a hash of (seed, item, kind).
class MockProvider final : public EmbeddingProvider {
 public:
  MockProvider(std::uint64_t seed, ModalityDims dims) : seed_(seed), dims_(dims) {}
  std::optional<std::vector<double>> lookup(std::string_view item_id,
                                            ModalityKind kind) const override;
  std::size_t dimension(ModalityKind kind) const override { return dims_[index_of(kind)]; }

 private:
  std::uint64_t seed_;
  ModalityDims dims_;
};

/// Lookup table read from an embedding-table file.
class TableProvider final : public EmbeddingProvider {
 public:
  explicit TableProvider(ModalityDims dims) : dims_(dims) {}

  /// Throws InvalidArgument on a dimension mismatch.
  void insert(std::string item_id, ModalityKind kind, std::vector<double> values);
  std::optional<std::vector<double>> lookup(std::string_view item_id,
                                            ModalityKind kind) const override;
  std::size_t dimension(ModalityKind kind) const override { return dims_[index_of(kind)]; }
  std::size_t entries() const { return table_.size(); }

  /// Rows in (item, kind) order.
  const std::map<std::pair<std::string, ModalityKind>, std::vector<double>, std::less<>>& rows()
      const {
    return table_;
  }

 private:
  ModalityDims dims_;
  std::map<std::pair<std::string, ModalityKind>, std::vector<double>, std::less<>> table_;
};

std::unique_ptr<EmbeddingProvider> mock_provider(std::uint64_t seed, ModalityDims dims);

/// Reads `item<TAB>kind<TAB>v1,...,vd` lines. Throws ParseError with the line
/// number on malformed input or a row whose width disagrees with `dims`.
std::unique_ptr<TableProvider> file_provider(const std::filesystem::path& path, ModalityDims dims);

void write_embedding_table(const TableProvider& table, const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

}  // namespace timgen
