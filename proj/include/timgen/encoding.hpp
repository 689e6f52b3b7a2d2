#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timgen/modality.hpp"
#include "timgen/numerics/matrix.hpp"
#include "timgen/numerics/rng.hpp"
#include "timgen/numerics/tape.hpp"

namespace timgen {

enum class ActionType { Click = 0, View = 1, Purchase = 2, Like = 3, Comment = 4 };
enum class Device { PC = 0, Mobile = 1, Tablet = 2 };
enum class Platform { Web = 0, IOS = 1, Android = 2, MiniApp = 3 };

inline constexpr std::size_t kActionCount = 5;
inline constexpr std::size_t kDeviceCount = 3;
inline constexpr std::size_t kPlatformCount = 4;

std::string_view action_name(ActionType a);
std::string_view device_name(Device d);
std::string_view platform_name(Platform p);
std::optional<ActionType> parse_action(std::string_view s);
std::optional<Device> parse_device(std::string_view s);
std::optional<Platform> parse_platform(std::string_view s);

struct Context {
  Device device = Device::PC;
  Platform platform = Platform::Web;
  std::int64_t geo = 0;
};

using ModalityEmbeddings = std::array<std::optional<std::vector<double>>, kModalityCount>;

struct Interaction {
  std::string user_id;
  std::string item_id;
  ActionType action = ActionType::Click;
  Context context;
  std::int64_t timestamp = 0;  ///< seconds since the Unix epoch
  ModalityEmbeddings modalities;
  double score_label = 0.0;
  std::int64_t class_label = 0;
};

struct EncoderConfig {
  std::size_t d_action = 8;
  std::size_t d_device = 4;
  std::size_t d_platform = 4;
  std::size_t d_geo = 8;
  std::size_t geo_vocab = 64;
  std::size_t d_abs = 8;  ///< must be even
  std::size_t d_gap = 8;
  std::size_t gap_buckets = 32;
  std::array<std::size_t, kModalityCount> modality_dims = {16, 16, 16, 16};
  std::size_t max_len = 64;

  static constexpr std::size_t kCycleDim = 2;
  static constexpr double kFrequencyBase = 10000.0;

  /// Throws InvalidArgument when a dimension is zero or d_abs is odd.
  void validate() const;
  std::size_t context_dim() const { return d_device + d_platform + d_geo; }
  std::size_t time_dim() const { return d_abs + d_gap + kCycleDim; }
  /// Width of the concatenated modality block; also the candidate feature width.
  std::size_t modality_dim() const;
  /// Column of `kind` inside the modality block.
  std::size_t modality_offset(ModalityKind kind) const;
  /// Total width D of an encoded interaction.
  std::size_t input_dim() const { return d_action + context_dim() + time_dim() + modality_dim(); }
  /// Column where the modality block starts inside an encoded row.
  std::size_t modality_block_offset() const { return d_action + context_dim() + time_dim(); }
  /// omega_k = base^(-2k / d_abs)
  double frequency(std::size_t k) const;
};

/// Trainable lookup tables of the input layer.
struct EncodingParams {
  ParamId action;
  ParamId device;
  ParamId platform;
  ParamId geo;
  ParamId gap;

  static EncodingParams create(ParamStore& store, const EncoderConfig& cfg, Rng& rng);
};

using ModalityMask = std::array<bool, kModalityCount>;

// ---- per-interaction encoders ---------------------------------------------

std::vector<double> embed_action(ActionType a, const ParamStore& store, const EncodingParams& p);
/// e_dev + e_plat + e_geo. Throws OutOfVocabulary when geo >= geo_vocab.
std::vector<double> encode_context(const Context& c, const ParamStore& store,
                                   const EncodingParams& p, const EncoderConfig& cfg);
/// Interleaved (sin, cos) of omega_k * days for k = 0 .. d_abs/2 - 1.
std::vector<double> encode_abs_time(std::int64_t timestamp, const EncoderConfig& cfg);
/// min(floor(ln(1 + gap_seconds)), B - 1). Throws OrderingError if t_now < t_prev.
std::size_t time_gap_bucket(std::int64_t t_now, std::int64_t t_prev, const EncoderConfig& cfg);
std::vector<double> encode_time_gap(std::int64_t t_now, std::int64_t t_prev,
                                    const ParamStore& store, const EncodingParams& p,
                                    const EncoderConfig& cfg);
/// 0 = Sunday; 1970-01-01 (a Thursday) maps to 4.
int day_of_week(std::int64_t timestamp);
std::array<double, 2> encode_cycle(std::int64_t timestamp);

struct EncodedInteraction {
  std::vector<double> features;  ///< length input_dim()
  ModalityMask present{};
};

/// Full row x_t. Missing modalities are zero-filled and flagged absent.
EncodedInteraction encode_interaction(const Interaction& x, std::int64_t prev_timestamp,
                                      const ParamStore& store, const EncodingParams& p,
                                      const EncoderConfig& cfg);

/// Validates one record against the encoder configuration.
void validate_interaction(const Interaction& x, const EncoderConfig& cfg);

/// Candidate features x*: the concatenated modality block, zeros where missing.
std::vector<double> candidate_features(const Interaction& x, const EncoderConfig& cfg);

// ---- sequences ---------------------------------------------------------------

/// Parameter-free part of a user sequence: lookup indices and fixed features.
struct PreparedSequence {
  std::vector<std::int64_t> action;
  std::vector<std::int64_t> device;
  std::vector<std::int64_t> platform;
  std::vector<std::int64_t> geo;
  std::vector<std::int64_t> gap_bucket;
  Matrix abs_time;  ///< T x d_abs
  Matrix cycle;     ///< T x 2
  std::array<Matrix, kModalityCount> modality;  ///< T x d_m, zero rows where absent
  std::vector<ModalityMask> present;

  std::size_t length() const { return action.size(); }
  /// Concatenated modality block of row t (the candidate features x*).
  std::vector<double> modality_row(std::size_t t) const;
};

/// Throws InvalidArgument on an empty sequence, LengthError beyond max_len and
/// OrderingError when timestamps decrease.
PreparedSequence prepare_sequence(std::span<const Interaction> history, const EncoderConfig& cfg);

/// Rows 0 .. rows-1 of the encoded sequence on a tape. With
/// `zero_modality_block` the modality columns are replaced by zeros.
ad::Var encode_rows(ad::Tape& tape, const PreparedSequence& seq, const EncodingParams& p,
                    std::size_t rows, bool zero_modality_block = false);

struct EncodedSequence {
  Matrix features;  ///< T x D
  std::vector<ModalityMask> present;
};

EncodedSequence encode_sequence(std::span<const Interaction> history, const ParamStore& store,
                                const EncodingParams& p, const EncoderConfig& cfg);

}  // namespace timgen
