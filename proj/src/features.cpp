#include "framerepeat/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "framerepeat/errors.hpp"

namespace framerepeat::features {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Kind = LoadError::Kind;

namespace {

std::vector<char> read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(Kind::MissingFile, what + ": cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<double> load_blob(const fs::path& dir, const json& blobs, const char* name,
                              std::size_t expected_values) {
  if (!blobs.contains(name) || !blobs[name].is_string()) {
    throw LoadError(Kind::Format, std::string("manifest: missing blob entry '") + name + "'");
  }
  const fs::path path = dir / blobs[name].get<std::string>();
  std::vector<char> bytes = read_file(path, std::string("blob '") + name + "'");
  if (bytes.size() != 4 * expected_values) {
    throw LoadError(Kind::ByteLength, std::string("blob '") + name + "' (" + path.string() +
                                          "): expected " + std::to_string(4 * expected_values) +
                                          " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<double> values = decode_f32(bytes);
  if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
    throw LoadError(Kind::NonFinite, std::string("blob '") + name + "' contains non-finite values");
  }
  return values;
}

std::size_t positive_extent(const json& manifest, const char* key) {
  if (!manifest.contains(key) || !manifest[key].is_number_integer() ||
      manifest[key].get<long long>() < 0) {
    throw LoadError(Kind::Shape, std::string("manifest: '") + key + "' must be a non-negative integer");
  }
  return manifest[key].get<std::size_t>();
}

}  // namespace

std::vector<char> encode_f32(std::span<const double> values) {
  std::vector<char> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  return out;
}

std::vector<double> decode_f32(std::span<const char> bytes) {
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = numerics::norm(a);
  const double nb = numerics::norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine: zero-norm input");
  return std::clamp(numerics::dot(a, b) / (na * nb), -1.0, 1.0);
}

void validate(const SampleRecord& r) {
  const std::size_t n = r.n_frames();
  const std::size_t d = r.dim();
  if (r.features.frames.rank() != 2 || n < 1) throw LoadError(Kind::Shape, "n_frames must be >= 1");
  if (d < 2) throw LoadError(Kind::Shape, "dim must be >= 2");
  if (r.question.tokens.rank() != 2 || r.question.n_tokens() < 1)
    throw LoadError(Kind::Shape, "n_tokens must be >= 1");
  if (r.question.dim() != d || r.question.pooled.size() != d)
    throw LoadError(Kind::Shape, "question dim does not match frame dim");
  if (r.features.sims.size() != n) throw LoadError(Kind::Shape, "sims length != n_frames");
  if (r.n_options < 2) throw LoadError(Kind::Range, "n_options must be >= 2");
  if (r.answer_id < 0 || r.answer_id >= r.n_options)
    throw LoadError(Kind::Range, "answer_id outside [0, n_options)");
  auto finite = [](std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
  };
  if (!finite(r.features.frames.data()) || !finite(r.features.sims) ||
      !finite(r.question.tokens.data()) || !finite(r.question.pooled)) {
    throw LoadError(Kind::NonFinite, "sample '" + r.sample_id + "' has non-finite values");
  }
  if (numerics::norm(r.question.pooled) == 0.0)
    throw LoadError(Kind::Range, "pooled question embedding has zero norm");
  for (std::size_t i = 0; i < n; ++i) {
    const double s = r.features.sims[i];
    if (s < -1.0 || s > 1.0)
      throw LoadError(Kind::Range, "sims[" + std::to_string(i) + "] outside [-1, 1]");
    const double expected = cosine(r.features.frames.row(i), r.question.pooled);
    if (std::abs(expected - s) > kSimConsistencyTol) {
      throw LoadError(Kind::Range, "sims[" + std::to_string(i) +
                                       "] disagrees with cosine(frame, pooled)");
    }
  }
}

SampleRecord load_sample(const fs::path& manifest_path) {
  const fs::path manifest_file =
      fs::is_directory(manifest_path) ? manifest_path / "manifest.json" : manifest_path;
  const std::vector<char> text = read_file(manifest_file, "manifest");
  json m;
  try {
    m = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw LoadError(Kind::Format, "manifest " + manifest_file.string() + ": " + e.what());
  }
  if (!m.is_object()) throw LoadError(Kind::Format, "manifest must be a JSON object");
  if (m.value("format_version", -1) != kSampleFormatVersion) {
    throw LoadError(Kind::Version, "manifest: unsupported format_version");
  }
  const std::size_t n = positive_extent(m, "n_frames");
  const std::size_t l = positive_extent(m, "n_tokens");
  const std::size_t d = positive_extent(m, "dim");
  if (n < 1 || l < 1 || d < 2) throw LoadError(Kind::Shape, "manifest: degenerate extents");
  if (!m.contains("blobs") || !m["blobs"].is_object())
    throw LoadError(Kind::Format, "manifest: missing 'blobs'");
  if (!m.contains("sample_id") || !m["sample_id"].is_string())
    throw LoadError(Kind::Format, "manifest: missing 'sample_id'");

  const fs::path dir = manifest_file.parent_path();
  const json& blobs = m["blobs"];
  SampleRecord r;
  r.sample_id = m["sample_id"].get<std::string>();
  r.n_options = m.value("n_options", 0);
  r.answer_id = m.value("answer_id", -1);
  r.features.frames = DenseArray({n, d}, load_blob(dir, blobs, "frames", n * d));
  r.question.tokens = DenseArray({l, d}, load_blob(dir, blobs, "tokens", l * d));
  r.question.pooled = load_blob(dir, blobs, "pooled", d);
  r.features.sims = load_blob(dir, blobs, "sims", n);
  validate(r);
  return r;
}

fs::path save_sample(const SampleRecord& record, const fs::path& dir) {
  validate(record);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json m;
  m["format_version"] = kSampleFormatVersion;
  m["sample_id"] = record.sample_id;
  m["n_frames"] = record.n_frames();
  m["n_tokens"] = record.question.n_tokens();
  m["dim"] = record.dim();
  m["n_options"] = record.n_options;
  m["answer_id"] = record.answer_id;
  m["blobs"] = {{"frames", "frames.f32"},
                {"tokens", "tokens.f32"},
                {"pooled", "pooled.f32"},
                {"sims", "sims.f32"}};

  write_file(dir / "frames.f32", encode_f32(record.features.frames.data()));
  write_file(dir / "tokens.f32", encode_f32(record.question.tokens.data()));
  write_file(dir / "pooled.f32", encode_f32(record.question.pooled));
  write_file(dir / "sims.f32", encode_f32(record.features.sims));
  const std::string text = m.dump(2) + "\n";
  write_file(dir / "manifest.json", text);
  return dir / "manifest.json";
}

void quantize_to_f32(SampleRecord& record) {
  auto q = [](std::span<double> xs) {
    for (double& v : xs) v = static_cast<double>(static_cast<float>(v));
  };
  q(record.features.frames.data());
  q(record.features.sims);
  q(record.question.tokens.data());
  q(record.question.pooled);
}

}  // namespace framerepeat::features
