#include "timgen/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include "json.hpp"

#include "timgen/errors.hpp"
#include "timgen/format.hpp"
#include "timgen/numerics/rng.hpp"

namespace timgen {

using nlohmann::json;

std::string format_record(const Interaction& x) {
  json j = json::object();
  j["user"] = x.user_id;
  j["item"] = x.item_id;
  j["action"] = action_name(x.action);
  j["device"] = device_name(x.context.device);
  j["platform"] = platform_name(x.context.platform);
  j["geo"] = x.context.geo;
  j["timestamp"] = x.timestamp;
  for (auto kind : kAllModalities)
    if (const auto& emb = x.modalities[index_of(kind)]) j[std::string(modality_name(kind))] = *emb;
  j["score"] = x.score_label;
  j["class"] = x.class_label;
  return j.dump();
}

Interaction parse_record(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "record must be a JSON object");
  auto field = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(line_no, std::string("missing field '") + key + "'");
    return *it;
  };
  auto text = [&](const char* key) {
    const json& v = field(key);
    if (!v.is_string()) throw ParseError(line_no, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  };
  auto integer = [&](const char* key) {
    const json& v = field(key);
    if (!v.is_number_integer()) throw ParseError(line_no, std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
  };

  Interaction x;
  x.user_id = text("user");
  x.item_id = text("item");
  const auto action = parse_action(text("action"));
  if (!action) throw ParseError(line_no, "unknown action");
  x.action = *action;
  const auto device = parse_device(text("device"));
  if (!device) throw ParseError(line_no, "unknown device");
  const auto platform = parse_platform(text("platform"));
  if (!platform) throw ParseError(line_no, "unknown platform");
  x.context = {*device, *platform, integer("geo")};
  x.timestamp = integer("timestamp");
  for (auto kind : kAllModalities) {
    auto it = j.find(std::string(modality_name(kind)));
    if (it == j.end() || it->is_null()) continue;
    if (!it->is_array()) throw ParseError(line_no, "modality embedding must be an array");
    std::vector<double> values;
    for (const auto& v : *it) {
      if (!v.is_number()) throw ParseError(line_no, "modality embedding entries must be numbers");
      values.push_back(v.get<double>());
    }
    x.modalities[index_of(kind)] = std::move(values);
  }
  const json& score = field("score");
  if (!score.is_number()) throw ParseError(line_no, "field 'score' must be a number");
  x.score_label = score.get<double>();
  x.class_label = integer("class");
  return x;
}

std::vector<Interaction> read_dataset(std::istream& in) {
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(parse_record(line, line_no));
  }
  return out;
}

std::vector<Interaction> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open dataset " + path.string());
  return read_dataset(in);
}

void write_dataset(const std::vector<Interaction>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset " + path.string());
  for (const auto& r : records) out << format_record(r) << '\n';
}

std::vector<UserSequence> group_by_user(const std::vector<Interaction>& records) {
  std::vector<UserSequence> users;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.user_id, users.size());
    if (inserted) users.push_back({r.user_id, {}});
    users[it->second].history.push_back(r);
  }
  for (auto& u : users) {
    std::stable_sort(u.history.begin(), u.history.end(),
                     [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
  }
  return users;
}

std::vector<TruthRecord> read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open ground-truth file " + path.string());
  std::vector<TruthRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 4) throw ParseError(line_no, "expected user<TAB>step<TAB>class<TAB>intensity");
    try {
      TruthRecord t;
      t.user_id = std::string(fields[0]);
      const auto step = parse_int(fields[1]);
      if (step < 0) throw ParseError(0, "negative step");
      t.step = static_cast<std::size_t>(step);
      t.true_class = parse_int(fields[2]);
      t.true_intensity = parse_double(fields[3]);
      out.push_back(std::move(t));
    } catch (const ParseError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

void write_truth(const std::vector<TruthRecord>& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write ground-truth file " + path.string());
  for (const auto& t : truth) {
    out << t.user_id << '\t' << t.step << '\t' << t.true_class << '\t' << format_double(t.true_intensity) << '\n';
  }
}

DataSplit split_users(std::size_t n_users, double train_fraction, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n_users);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).derive(0x5711);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_users)));
  const auto n_val = std::min(n_users - std::min(n_train, n_users),
                              static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n_users))));
  DataSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n_users)));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(split.train.size()),
                          order.begin() + static_cast<std::ptrdiff_t>(split.train.size() + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(split.train.size() + n_val), order.end());
  return split;
}

}  // namespace timgen
