#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "timgen/encoding.hpp"

namespace timgen {

/// One JSON object per line:
///   {"user":"u1","item":"i7","action":"click","device":"pc","platform":"web",
///    "geo":3,"timestamp":1704067200,"text":[...],"img":[...],"score":2.5,"class":1}
/// Modality arrays are optional; an absent key means the modality is missing.
std::string format_record(const Interaction& x);
/// Throws ParseError(line_no, ...) on malformed records.
Interaction parse_record(std::string_view line, std::size_t line_no = 0);

std::vector<Interaction> read_dataset(const std::filesystem::path& path);
std::vector<Interaction> read_dataset(std::istream& in);
void write_dataset(const std::vector<Interaction>& records, const std::filesystem::path& path);

struct UserSequence {
  std::string user_id;
  std::vector<Interaction> history;  ///< sorted by timestamp (stable)
};

/// Groups by user in order of first appearance and sorts each history.
std::vector<UserSequence> group_by_user(const std::vector<Interaction>& records);

struct TruthRecord {
  std::string user_id;
  std::size_t step = 0;
  std::int64_t true_class = 0;
  double true_intensity = 0.0;
};

/// `user<TAB>step<TAB>true_class<TAB>true_intensity` lines.
std::vector<TruthRecord> read_truth(const std::filesystem::path& path);
void write_truth(const std::vector<TruthRecord>& truth, const std::filesystem::path& path);

struct DataSplit {
  std::vector<std::size_t> train, validation, test;
};

/// Seeded shuffle of user indices into train / validation / test by fraction.
DataSplit split_users(std::size_t n_users, double train_fraction, double val_fraction,
                      std::uint64_t seed);

}  // namespace timgen
