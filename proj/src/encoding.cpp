#include "timgen/encoding.hpp"

#include <cmath>
#include <numbers>

#include "timgen/errors.hpp"

namespace timgen {

namespace {

constexpr std::array<std::string_view, kActionCount> kActionNames = {"click", "view", "purchase",
                                                                     "like", "comment"};
constexpr std::array<std::string_view, kDeviceCount> kDeviceNames = {"pc", "mobile", "tablet"};
constexpr std::array<std::string_view, kPlatformCount> kPlatformNames = {"web", "ios", "android",
                                                                         "miniapp"};

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<Enum>(i);
  return std::nullopt;
}

constexpr double kSecondsPerDay = 86400.0;

Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-bound, bound);
  return m;
}

std::vector<double> lookup_row(const ParamStore& store, ParamId table, std::size_t row) {
  return store.value(table).row_copy(row);
}

void append(std::vector<double>& dst, std::span<const double> src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// Appends row t of a prepared sequence for interaction x.
void prepare_row(const Interaction& x, std::int64_t prev_timestamp, const EncoderConfig& cfg,
                 PreparedSequence& seq, std::size_t t) {
  validate_interaction(x, cfg);
  seq.action[t] = static_cast<std::int64_t>(x.action);
  seq.device[t] = static_cast<std::int64_t>(x.context.device);
  seq.platform[t] = static_cast<std::int64_t>(x.context.platform);
  seq.geo[t] = x.context.geo;
  seq.gap_bucket[t] = static_cast<std::int64_t>(time_gap_bucket(x.timestamp, prev_timestamp, cfg));
  const auto abs = encode_abs_time(x.timestamp, cfg);
  std::copy(abs.begin(), abs.end(), seq.abs_time.row(t).begin());
  const auto cyc = encode_cycle(x.timestamp);
  seq.cycle(t, 0) = cyc[0];
  seq.cycle(t, 1) = cyc[1];
  for (auto kind : kAllModalities) {
    const auto m = index_of(kind);
    seq.present[t][m] = x.modalities[m].has_value();
    if (x.modalities[m]) std::copy(x.modalities[m]->begin(), x.modalities[m]->end(), seq.modality[m].row(t).begin());
  }
}

PreparedSequence allocate(std::size_t n, const EncoderConfig& cfg) {
  PreparedSequence seq;
  seq.action.resize(n);
  seq.device.resize(n);
  seq.platform.resize(n);
  seq.geo.resize(n);
  seq.gap_bucket.resize(n);
  seq.abs_time = Matrix(n, cfg.d_abs);
  seq.cycle = Matrix(n, EncoderConfig::kCycleDim);
  for (auto kind : kAllModalities) seq.modality[index_of(kind)] = Matrix(n, cfg.modality_dims[index_of(kind)]);
  seq.present.resize(n);
  return seq;
}

}  // namespace

std::string_view action_name(ActionType a) { return kActionNames[static_cast<std::size_t>(a)]; }
std::string_view device_name(Device d) { return kDeviceNames[static_cast<std::size_t>(d)]; }
std::string_view platform_name(Platform p) { return kPlatformNames[static_cast<std::size_t>(p)]; }
std::optional<ActionType> parse_action(std::string_view s) { return parse_enum<ActionType>(kActionNames, s); }
std::optional<Device> parse_device(std::string_view s) { return parse_enum<Device>(kDeviceNames, s); }
std::optional<Platform> parse_platform(std::string_view s) { return parse_enum<Platform>(kPlatformNames, s); }

void EncoderConfig::validate() const {
  const std::array<std::size_t, 10> dims = {d_action, d_device, d_platform, d_geo,       geo_vocab,
                                            d_abs,    d_gap,    gap_buckets, max_len,    modality_dim()};
  for (auto d : dims)
    if (d == 0) throw InvalidArgument("encoder config: every dimension must be at least 1");
  for (auto d : modality_dims)
    if (d == 0) throw InvalidArgument("encoder config: modality dimensions must be at least 1");
  if (d_abs % 2 != 0) throw InvalidArgument("encoder config: d_abs must be even");
}

std::size_t EncoderConfig::modality_dim() const {
  std::size_t total = 0;
  for (auto d : modality_dims) total += d;
  return total;
}

std::size_t EncoderConfig::modality_offset(ModalityKind kind) const {
  std::size_t offset = 0;
  for (std::size_t m = 0; m < index_of(kind); ++m) offset += modality_dims[m];
  return offset;
}

double EncoderConfig::frequency(std::size_t k) const {
  return std::pow(kFrequencyBase, -2.0 * static_cast<double>(k) / static_cast<double>(d_abs));
}

EncodingParams EncodingParams::create(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  EncodingParams p;
  p.action = store.add("enc.action", uniform_init(kActionCount, cfg.d_action, kActionCount, rng));
  p.device = store.add("enc.device", uniform_init(kDeviceCount, cfg.d_device, kDeviceCount, rng));
  p.platform = store.add("enc.platform", uniform_init(kPlatformCount, cfg.d_platform, kPlatformCount, rng));
  p.geo = store.add("enc.geo", uniform_init(cfg.geo_vocab, cfg.d_geo, cfg.geo_vocab, rng));
  p.gap = store.add("enc.gap", uniform_init(cfg.gap_buckets, cfg.d_gap, cfg.gap_buckets, rng));
  return p;
}

std::vector<double> embed_action(ActionType a, const ParamStore& store, const EncodingParams& p) {
  return lookup_row(store, p.action, static_cast<std::size_t>(a));
}

std::vector<double> encode_context(const Context& c, const ParamStore& store,
                                   const EncodingParams& p, const EncoderConfig& cfg) {
  if (c.geo < 0 || static_cast<std::size_t>(c.geo) >= cfg.geo_vocab) {
    throw OutOfVocabulary("geo id " + std::to_string(c.geo) + " outside vocabulary of size " +
                          std::to_string(cfg.geo_vocab));
  }
  std::vector<double> out = lookup_row(store, p.device, static_cast<std::size_t>(c.device));
  append(out, lookup_row(store, p.platform, static_cast<std::size_t>(c.platform)));
  append(out, lookup_row(store, p.geo, static_cast<std::size_t>(c.geo)));
  return out;
}

std::vector<double> encode_abs_time(std::int64_t timestamp, const EncoderConfig& cfg) {
  const double days = static_cast<double>(timestamp) / kSecondsPerDay;
  std::vector<double> out(cfg.d_abs);
  for (std::size_t k = 0; k < cfg.d_abs / 2; ++k) {
    const double angle = cfg.frequency(k) * days;
    out[2 * k] = std::sin(angle);
    out[2 * k + 1] = std::cos(angle);
  }
  return out;
}

std::size_t time_gap_bucket(std::int64_t t_now, std::int64_t t_prev, const EncoderConfig& cfg) {
  if (t_now < t_prev) {
    throw OrderingError("interaction at " + std::to_string(t_now) + " precedes previous at " +
                        std::to_string(t_prev));
  }
  const double log_gap = std::log1p(static_cast<double>(t_now - t_prev));
  const auto bucket = static_cast<std::size_t>(std::floor(log_gap));
  return std::min(bucket, cfg.gap_buckets - 1);
}

std::vector<double> encode_time_gap(std::int64_t t_now, std::int64_t t_prev,
                                    const ParamStore& store, const EncodingParams& p,
                                    const EncoderConfig& cfg) {
  return lookup_row(store, p.gap, time_gap_bucket(t_now, t_prev, cfg));
}

int day_of_week(std::int64_t timestamp) {
  if (timestamp < 0) throw InvalidArgument("day_of_week: negative timestamp");
  return static_cast<int>((timestamp / 86400 + 4) % 7);
}

std::array<double, 2> encode_cycle(std::int64_t timestamp) {
  const double angle = 2.0 * std::numbers::pi * day_of_week(timestamp) / 7.0;
  return {std::sin(angle), std::cos(angle)};
}

void validate_interaction(const Interaction& x, const EncoderConfig& cfg) {
  if (x.timestamp < 0) throw InvalidArgument("interaction timestamp must be non-negative");
  if (x.context.geo < 0 || static_cast<std::size_t>(x.context.geo) >= cfg.geo_vocab) {
    throw OutOfVocabulary("geo id " + std::to_string(x.context.geo) + " outside vocabulary of size " +
                          std::to_string(cfg.geo_vocab));
  }
  bool any = false;
  for (auto kind : kAllModalities) {
    const auto& emb = x.modalities[index_of(kind)];
    if (!emb) continue;
    any = true;
    if (emb->size() != cfg.modality_dims[index_of(kind)]) {
      throw InvalidArgument("interaction " + x.item_id + ": " + std::string(modality_name(kind)) +
                            " embedding has dimension " + std::to_string(emb->size()) + ", expected " +
                            std::to_string(cfg.modality_dims[index_of(kind)]));
    }
  }
  if (!any) throw InvalidArgument("interaction " + x.item_id + ": no modality present");
}

EncodedInteraction encode_interaction(const Interaction& x, std::int64_t prev_timestamp,
                                      const ParamStore& store, const EncodingParams& p,
                                      const EncoderConfig& cfg) {
  PreparedSequence seq = allocate(1, cfg);
  prepare_row(x, prev_timestamp, cfg, seq, 0);
  ad::Tape tape(&store);
  const Matrix& row = encode_rows(tape, seq, p, 1).value();
  return {row.row_copy(0), seq.present[0]};
}

std::vector<double> PreparedSequence::modality_row(std::size_t t) const {
  std::vector<double> out;
  for (const auto& block : modality) append(out, block.row(t));
  return out;
}

std::vector<double> candidate_features(const Interaction& x, const EncoderConfig& cfg) {
  validate_interaction(x, cfg);
  std::vector<double> out;
  for (auto kind : kAllModalities) {
    const auto& v = x.modalities[index_of(kind)];
    if (v) {
      append(out, *v);
    } else {
      out.resize(out.size() + cfg.modality_dims[index_of(kind)], 0.0);
    }
  }
  return out;
}

PreparedSequence prepare_sequence(std::span<const Interaction> history, const EncoderConfig& cfg) {
  if (history.empty()) throw InvalidArgument("prepare_sequence: empty interaction sequence");
  if (history.size() > cfg.max_len) {
    throw LengthError("sequence length " + std::to_string(history.size()) + " exceeds maximum " +
                      std::to_string(cfg.max_len));
  }
  PreparedSequence seq = allocate(history.size(), cfg);
  for (std::size_t t = 0; t < history.size(); ++t) {
    const std::int64_t prev = t == 0 ? history[0].timestamp : history[t - 1].timestamp;
    prepare_row(history[t], prev, cfg, seq, t);
  }
  return seq;
}

ad::Var encode_rows(ad::Tape& tape, const PreparedSequence& seq, const EncodingParams& p,
                    std::size_t rows, bool zero_modality_block) {
  if (rows == 0 || rows > seq.length()) throw InvalidArgument("encode_rows: row count out of range");
  auto head = [rows](const std::vector<std::int64_t>& v) {
    return std::span<const std::int64_t>(v.data(), rows);
  };
  std::vector<ad::Var> parts = {
      ad::gather_rows(tape.param(p.action), head(seq.action)),
      ad::gather_rows(tape.param(p.device), head(seq.device)),
      ad::gather_rows(tape.param(p.platform), head(seq.platform)),
      ad::gather_rows(tape.param(p.geo), head(seq.geo)),
      tape.constant(seq.abs_time.row_block(0, rows)),
      ad::gather_rows(tape.param(p.gap), head(seq.gap_bucket)),
      tape.constant(seq.cycle.row_block(0, rows)),
  };
  for (const auto& block : seq.modality) {
    parts.push_back(tape.constant(zero_modality_block ? Matrix(rows, block.cols())
                                                      : block.row_block(0, rows)));
  }
  return ad::concat_cols(parts);
}

EncodedSequence encode_sequence(std::span<const Interaction> history, const ParamStore& store,
                                const EncodingParams& p, const EncoderConfig& cfg) {
  const PreparedSequence seq = prepare_sequence(history, cfg);
  ad::Tape tape(&store);
  Matrix features = encode_rows(tape, seq, p, seq.length()).value();
  return {std::move(features), seq.present};
}

}  // namespace timgen
