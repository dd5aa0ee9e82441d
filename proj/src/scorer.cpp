#include "framerepeat/scorer.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include <json.hpp>

#include "framerepeat/errors.hpp"

namespace framerepeat::scorer {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum ParamIndex : std::size_t {
  kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
  kLn1Gain, kLn1Bias,
  kFfnW1, kFfnB1, kFfnW2, kFfnB2,
  kLn2Gain, kLn2Bias,
  kHeadW1, kHeadB1, kHeadW2, kHeadB2,
  kParamCount
};

struct TensorShape {
  const char* name;
  std::vector<std::size_t> shape;
};

std::vector<TensorShape> expected_shapes(const ScorerConfig& c) {
  const std::size_t d = c.dim, f = c.ffn_hidden, h = c.score_hidden();
  return {
      {"attn.w_q", {d, d}}, {"attn.b_q", {d}}, {"attn.w_k", {d, d}}, {"attn.b_k", {d}},
      {"attn.w_v", {d, d}}, {"attn.b_v", {d}}, {"attn.w_o", {d, d}}, {"attn.b_o", {d}},
      {"ln1.gain", {d}},    {"ln1.bias", {d}},
      {"ffn.w1", {d, f}},   {"ffn.b1", {f}},   {"ffn.w2", {f, d}},   {"ffn.b2", {d}},
      {"ln2.gain", {d}},    {"ln2.bias", {d}},
      {"head.w1", {d, h}},  {"head.b1", {h}},  {"head.w2", {h, 1}},  {"head.b2", {1}},
  };
}

Var attend(Tape& t, Var frames, Var tokens, const std::vector<Var>& p, const ScorerConfig& c) {
  const Var q = t.add_row(t.matmul(frames, p[kWq]), p[kBq]);
  const Var k = t.add_row(t.matmul(tokens, p[kWk]), p[kBk]);
  const Var v = t.add_row(t.matmul(tokens, p[kWv]), p[kBv]);
  const std::size_t dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(c.n_heads);
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const Var qh = t.slice_cols(q, h * dh, dh);
    const Var kh = t.slice_cols(k, h * dh, dh);
    const Var vh = t.slice_cols(v, h * dh, dh);
    const Var weights = t.softmax_rows(t.scale(t.matmul_nt(qh, kh), scale));
    heads.push_back(t.matmul(weights, vh));
  }
  const Var joined = heads.size() == 1 ? heads.front() : t.concat_cols(heads);
  return t.add_row(t.matmul(joined, p[kWo]), p[kBo]);
}

std::vector<Var> push_params(Tape& t, const ScorerParams& params) {
  std::vector<Var> vars;
  for (const auto& [name, tensor] : params.named()) vars.push_back(t.parameter(*tensor));
  return vars;
}

json config_to_json(const ScorerConfig& c) {
  return {{"dim", c.dim},
          {"n_heads", c.n_heads},
          {"ffn_hidden", c.ffn_hidden},
          {"prior_weight", c.prior_weight},
          {"ln_eps", c.ln_eps},
          {"seed", c.seed},
          {"positional_encoding", c.positional_encoding}};
}

ScorerConfig config_from_json(const json& j) {
  ScorerConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
  c.prior_weight = j.at("prior_weight").get<double>();
  c.ln_eps = j.at("ln_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.positional_encoding = j.value("positional_encoding", true);
  return c;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

std::uint64_t get_u64(const std::vector<char>& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return v;
}

}  // namespace

void ScorerConfig::validate() const {
  if (n_heads == 0 || dim % n_heads != 0) throw ConfigError("dim must be divisible by n_heads");
  if (dim < 4) throw ConfigError("dim must be at least 4");
  if (positional_encoding && dim % 2 != 0)
    throw ConfigError("sinusoidal positional encoding needs an even dim");
  if (ffn_hidden < 1) throw ConfigError("ffn_hidden must be >= 1");
  if (!(prior_weight >= 0.0)) throw ConfigError("prior_weight must be >= 0");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be > 0");
}

std::vector<std::pair<std::string, DenseArray*>> ScorerParams::named() {
  return {{"attn.w_q", &w_q},     {"attn.b_q", &b_q},     {"attn.w_k", &w_k},
          {"attn.b_k", &b_k},     {"attn.w_v", &w_v},     {"attn.b_v", &b_v},
          {"attn.w_o", &w_o},     {"attn.b_o", &b_o},     {"ln1.gain", &ln1_gain},
          {"ln1.bias", &ln1_bias}, {"ffn.w1", &ffn_w1},   {"ffn.b1", &ffn_b1},
          {"ffn.w2", &ffn_w2},    {"ffn.b2", &ffn_b2},    {"ln2.gain", &ln2_gain},
          {"ln2.bias", &ln2_bias}, {"head.w1", &head_w1}, {"head.b1", &head_b1},
          {"head.w2", &head_w2},  {"head.b2", &head_b2}};
}

std::vector<std::pair<std::string, const DenseArray*>> ScorerParams::named() const {
  std::vector<std::pair<std::string, const DenseArray*>> out;
  for (auto& [name, ptr] : const_cast<ScorerParams*>(this)->named()) out.emplace_back(name, ptr);
  return out;
}

std::vector<DenseArray> ScorerParams::tensors() const {
  std::vector<DenseArray> out;
  for (const auto& [name, ptr] : named()) out.push_back(*ptr);
  return out;
}

void ScorerParams::assign(std::vector<DenseArray> values) {
  auto slots = named();
  if (values.size() != slots.size()) throw DimensionError("ScorerParams::assign: tensor count");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].second->same_shape(values[i]))
      throw DimensionError("ScorerParams::assign: shape of " + slots[i].first);
    *slots[i].second = std::move(values[i]);
  }
}

std::size_t ScorerParams::count() const {
  std::size_t total = 0;
  for (const auto& [name, ptr] : named()) total += ptr->size();
  return total;
}

bool operator==(const ScorerParams& a, const ScorerParams& b) {
  const auto na = a.named();
  const auto nb = b.named();
  for (std::size_t i = 0; i < na.size(); ++i)
    if (!(*na[i].second == *nb[i].second)) return false;
  return true;
}

std::size_t count_params(const ScorerConfig& config) {
  std::size_t total = 0;
  for (const auto& t : expected_shapes(config)) {
    std::size_t n = 1;
    for (std::size_t e : t.shape) n *= e;
    total += n;
  }
  return total;
}

ScorerParams init_params(const ScorerConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ScorerParams p;
  auto shapes = expected_shapes(config);
  auto slots = p.named();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& shape = shapes[i].shape;
    DenseArray t(shape, 0.0);
    if (i == kLn1Gain || i == kLn2Gain) {
      t = DenseArray(shape, 1.0);
    } else if (shape.size() == 2 && i != kHeadW2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : t.data()) v = dist(rng);
    }
    *slots[i].second = std::move(t);
  }
  return p;
}

DenseArray positional_table(std::size_t n, std::size_t dim) {
  if (dim % 2 != 0) throw ConfigError("positional encoding needs an even dim");
  DenseArray pe = DenseArray::zeros(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; 2 * j < dim; ++j) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(2 * j) / static_cast<double>(dim));
      const double angle = static_cast<double>(i) * freq;
      pe(i, 2 * j) = std::sin(angle);
      pe(i, 2 * j + 1) = std::cos(angle);
    }
  }
  return pe;
}

DenseArray positional_encode(const DenseArray& frames) {
  DenseArray out = positional_table(frames.rows(), frames.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += frames[i];
  return out;
}

DenseArray cross_attention(const DenseArray& frames_pe, const DenseArray& tokens,
                           const ScorerParams& params, const ScorerConfig& config) {
  config.validate();
  if (frames_pe.cols() != config.dim || tokens.cols() != config.dim)
    throw DimensionError("cross_attention: feature dim does not match config");
  Tape t;
  const auto vars = push_params(t, params);
  const Var out = attend(t, t.constant(frames_pe), t.constant(tokens), vars, config);
  return t.value(out);
}

std::vector<double> similarity_prior(std::span<const double> sims, double prior_weight) {
  const double mu = numerics::mean(sims);
  std::vector<double> out(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) out[i] = prior_weight * (sims[i] - mu);
  return out;
}

ScoreGraph build_scores(Tape& t, const features::SampleRecord& sample,
                        const ScorerParams& params, const ScorerConfig& config) {
  config.validate();
  if (sample.dim() != config.dim || sample.question.dim() != config.dim) {
    throw DimensionError("sample '" + sample.sample_id + "' has dim " +
                         std::to_string(sample.dim()) + ", scorer expects " +
                         std::to_string(config.dim));
  }
  const std::size_t n = sample.n_frames();
  ScoreGraph g;
  g.params = push_params(t, params);
  const auto& p = g.params;

  const Var frames = t.constant(config.positional_encoding
                                    ? positional_encode(sample.features.frames)
                                    : sample.features.frames);
  const Var tokens = t.constant(sample.question.tokens);

  const Var attended = attend(t, frames, tokens, p, config);
  const Var x1 = t.layer_norm_rows(t.add(frames, attended), p[kLn1Gain], p[kLn1Bias], config.ln_eps);
  const Var hidden = t.gelu(t.add_row(t.matmul(x1, p[kFfnW1]), p[kFfnB1]));
  const Var ffn = t.add_row(t.matmul(hidden, p[kFfnW2]), p[kFfnB2]);
  const Var x2 = t.layer_norm_rows(t.add(x1, ffn), p[kLn2Gain], p[kLn2Bias], config.ln_eps);
  const Var z = t.relu(t.add_row(t.matmul(x2, p[kHeadW1]), p[kHeadB1]));
  const Var learned = t.reshape(t.add_row(t.matmul(z, p[kHeadW2]), p[kHeadB2]), {n});

  const Var prior = t.constant(
      DenseArray::vector(similarity_prior(sample.features.sims, config.prior_weight)));
  g.scores = t.add(learned, prior);
  return g;
}

std::vector<double> forward(const features::SampleRecord& sample, const ScorerParams& params,
                            const ScorerConfig& config) {
  Tape t;
  const ScoreGraph g = build_scores(t, sample, params, config);
  const auto values = t.value(g.scores).data();
  return {values.begin(), values.end()};
}

// Layout: u64 little-endian header length, JSON header, then the tensors'
// little-endian IEEE-754 values back to back in header order.
void save_checkpoint(const ScorerParams& params, const ScorerConfig& config, const fs::path& path) {
  json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["dtype"] = "f64";
  header["config"] = config_to_json(config);
  header["param_count"] = params.count();
  json index = json::array();
  std::size_t offset = 0;
  std::string data;
  for (const auto& [name, ptr] : params.named()) {
    const std::size_t nbytes = ptr->size() * 8;
    index.push_back({{"name", name}, {"shape", ptr->shape()}, {"offset", offset}, {"nbytes", nbytes}});
    for (double v : ptr->data()) put_u64(data, std::bit_cast<std::uint64_t>(v));
    offset += nbytes;
  }
  header["tensors"] = index;
  const std::string header_text = header.dump();
  std::string out;
  put_u64(out, header_text.size());
  out += header_text;
  out += data;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to checkpoint " + path.string());
}

std::pair<ScorerParams, ScorerConfig> load_checkpoint(const fs::path& path) {
  using Kind = LoadError::Kind;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError(Kind::MissingFile, "cannot open checkpoint " + path.string());
  const std::vector<char> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  if (bytes.size() < 8) throw LoadError(Kind::Format, "checkpoint too short");
  const std::uint64_t header_len = get_u64(bytes, 0);
  if (header_len > bytes.size() - 8) throw LoadError(Kind::Format, "checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw LoadError(Kind::Format, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format_version", -1) != kCheckpointFormatVersion)
    throw LoadError(Kind::Version, "checkpoint format_version mismatch");
  const std::string dtype = header.value("dtype", "");
  if (dtype != "f64" && dtype != "f32") throw LoadError(Kind::Format, "checkpoint dtype " + dtype);
  const std::size_t width = dtype == "f64" ? 8 : 4;

  ScorerConfig config;
  try {
    config = config_from_json(header.at("config"));
    config.validate();
  } catch (const json::exception& e) {
    throw LoadError(Kind::Format, std::string("checkpoint config: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(Kind::Format, std::string("checkpoint config: ") + e.what());
  }

  const std::size_t data_start = 8 + header_len;
  const std::size_t data_len = bytes.size() - data_start;
  const auto shapes = expected_shapes(config);
  const json& index = header.at("tensors");
  if (!index.is_array() || index.size() != shapes.size())
    throw LoadError(Kind::Format, "checkpoint tensor index has the wrong number of entries");

  std::vector<DenseArray> tensors;
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const json& e = index[i];
    const auto name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    const auto offset = e.at("offset").get<std::size_t>();
    const auto nbytes = e.at("nbytes").get<std::size_t>();
    if (name != shapes[i].name || shape != shapes[i].shape)
      throw LoadError(Kind::Shape, "checkpoint tensor " + std::to_string(i) + " is " + name +
                                       ", expected " + shapes[i].name);
    std::size_t count = 1;
    for (std::size_t s : shape) count *= s;
    if (nbytes != count * width || offset != expected_offset || offset + nbytes > data_len)
      throw LoadError(Kind::ByteLength, "checkpoint blob for " + name + " has a bad length/offset");
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t at = data_start + offset + k * width;
      if (width == 8) {
        values[k] = std::bit_cast<double>(get_u64(bytes, at));
      } else {
        values[k] = features::decode_f32(std::span<const char>(bytes.data() + at, 4))[0];
      }
    }
    tensors.emplace_back(shape, std::move(values));
    expected_offset += nbytes;
  }
  if (expected_offset != data_len)
    throw LoadError(Kind::ByteLength, "checkpoint data length " + std::to_string(data_len) +
                                          " != indexed " + std::to_string(expected_offset));

  ScorerParams params = init_params(config, 0);
  params.assign(std::move(tensors));
  const std::size_t count = params.count();
  if (count != count_params(config) || header.value("param_count", std::size_t{0}) != count)
    throw LoadError(Kind::Shape, "checkpoint parameter count mismatch");
  for (const auto& [name, ptr] : params.named())
    if (!ptr->all_finite()) throw LoadError(Kind::NonFinite, "checkpoint tensor " + name + " is not finite");
  return {std::move(params), config};
}

}  // namespace framerepeat::scorer
