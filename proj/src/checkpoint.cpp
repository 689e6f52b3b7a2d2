#include "timgen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "timgen/errors.hpp"

namespace timgen {

namespace {

void write_le(std::ostream& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double read_le(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw CheckpointTruncatedError("tensor data ends early");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw CheckpointTruncatedError(std::string("missing ") + what);
  return line;
}

std::size_t read_count(std::istream& in, std::string_view keyword) {
  const auto line = read_line(in, keyword.data());
  std::istringstream ss(line);
  std::string word;
  long long n = -1;
  if (!(ss >> word >> n) || word != keyword || n < 0) {
    throw CheckpointTruncatedError("malformed '" + std::string(keyword) + "' header");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

void save_checkpoint(const Model& model, const Config& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  Config snapshot = cfg;
  snapshot.model = model.config();
  const std::string config_text = render_config(snapshot);
  std::size_t config_lines = 0;
  for (char c : config_text) config_lines += c == '\n' ? 1 : 0;

  out << kCheckpointMagic;
  out << "config " << config_lines << '\n' << config_text;
  const auto& store = model.params();
  out << "tensors " << store.size() << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto id = store.id(i);
    out << store.name(id) << ' ' << store.value(id).rows() << ' ' << store.value(id).cols() << '\n';
  }
  out << "data\n";
  for (std::size_t i = 0; i < store.size(); ++i)
    for (double v : store.value(store.id(i)).data()) write_le(out, v);
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string magic(kCheckpointMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kCheckpointMagic) {
    throw CheckpointVersionError("not a TIMGEN1 checkpoint: " + path.string());
  }

  const std::size_t config_lines = read_count(in, "config");
  std::string config_text;
  for (std::size_t i = 0; i < config_lines; ++i) config_text += read_line(in, "config line") + "\n";
  Config cfg;
  try {
    cfg = parse_config(config_text);
    cfg.validate();
  } catch (const Error& e) {
    throw CheckpointManifestError(std::string("config snapshot rejected: ") + e.what());
  }

  const std::size_t tensor_count = read_count(in, "tensors");
  struct Entry {
    std::string name;
    std::size_t rows, cols;
  };
  std::vector<Entry> manifest;
  for (std::size_t i = 0; i < tensor_count; ++i) {
    std::istringstream ss(read_line(in, "manifest line"));
    Entry e;
    long long rows = -1, cols = -1;
    if (!(ss >> e.name >> rows >> cols) || rows < 0 || cols < 0) {
      throw CheckpointTruncatedError("malformed manifest line " + std::to_string(i + 1));
    }
    e.rows = static_cast<std::size_t>(rows);
    e.cols = static_cast<std::size_t>(cols);
    manifest.push_back(std::move(e));
  }
  if (read_line(in, "data marker") != "data") throw CheckpointTruncatedError("missing data marker");

  Model model(cfg.model, 0);
  const ParamStore& expected = model.params();
  if (manifest.size() != expected.size()) {
    throw CheckpointManifestError("checkpoint lists " + std::to_string(manifest.size()) + " tensors, model has " +
                                  std::to_string(expected.size()));
  }
  for (const auto& e : manifest) {
    const auto id = expected.find(e.name);
    if (!id) throw CheckpointManifestError("unexpected tensor " + e.name);
    const Matrix& m = expected.value(*id);
    if (m.rows() != e.rows || m.cols() != e.cols) throw CheckpointManifestError("shape mismatch for " + e.name);
  }

  ParamStore stored;
  for (const auto& e : manifest) {
    std::vector<double> values(e.rows * e.cols);
    for (double& v : values) v = read_le(in);
    stored.add(e.name, Matrix(e.rows, e.cols, std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointManifestError("trailing bytes after tensor data");

  model.assign(stored);
  return {cfg, std::move(model)};
}

}  // namespace timgen
