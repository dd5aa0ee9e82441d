#include "framerepeat/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "framerepeat/errors.hpp"
#include "parallel.hpp"

namespace framerepeat::oracles {

namespace fs = std::filesystem;
using json = nlohmann::json;
using numerics::DenseArray;

std::size_t SyntheticOracleSpec::key_frames() const noexcept {
  return n_key_frames != 0 ? n_key_frames : std::max<std::size_t>(1, n_frames / 8);
}

double SyntheticOracleSpec::scale() const noexcept {
  return feature_scale > 0.0 ? feature_scale : std::sqrt(static_cast<double>(dim));
}

void SyntheticOracleSpec::validate() const {
  if (n_frames < 1) throw ConfigError("synthetic spec: n_frames must be >= 1");
  if (dim < 2) throw ConfigError("synthetic spec: dim must be >= 2");
  if (n_tokens < 2) throw ConfigError("synthetic spec: n_tokens must be >= 2");
  if (key_frames() > n_frames) throw ConfigError("synthetic spec: more key frames than frames");
  if (!(gain_scale > 0.0)) throw ConfigError("synthetic spec: gain_scale must be > 0");
  if (!(noise >= 0.0) || !(sample_offset >= 0.0)) throw ConfigError("synthetic spec: noise must be >= 0");
  if (saturation < 2) throw ConfigError("synthetic spec: saturation cap must be >= 2");
  if (alignment < 0.0 || alignment > 1.0) throw ConfigError("synthetic spec: alignment in [0, 1]");
  if (n_options < 2) throw ConfigError("synthetic spec: n_options must be >= 2");
}

json to_json(const SyntheticOracleSpec& s) {
  return {{"seed", s.seed},
          {"n_frames", s.n_frames},
          {"dim", s.dim},
          {"n_tokens", s.n_tokens},
          {"n_key_frames", s.key_frames()},
          {"gain_scale", s.gain_scale},
          {"noise", s.noise},
          {"sample_offset", s.sample_offset},
          {"saturation", s.saturation},
          {"temperature", s.temperature},
          {"key_strength", s.key_strength},
          {"alignment", s.alignment},
          {"token_noise", s.token_noise},
          {"feature_scale", s.scale()},
          {"n_options", s.n_options}};
}

SyntheticOracleSpec spec_from_json(const json& j) {
  SyntheticOracleSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.n_frames = j.at("n_frames").get<std::size_t>();
  s.dim = j.at("dim").get<std::size_t>();
  s.n_tokens = j.at("n_tokens").get<std::size_t>();
  s.n_key_frames = j.at("n_key_frames").get<std::size_t>();
  s.gain_scale = j.at("gain_scale").get<double>();
  s.noise = j.at("noise").get<double>();
  s.sample_offset = j.at("sample_offset").get<double>();
  s.saturation = j.at("saturation").get<int>();
  s.temperature = j.at("temperature").get<double>();
  s.key_strength = j.at("key_strength").get<double>();
  s.alignment = j.at("alignment").get<double>();
  s.token_noise = j.at("token_noise").get<double>();
  s.feature_scale = j.at("feature_scale").get<double>();
  s.n_options = j.at("n_options").get<int>();
  return s;
}

json to_json(const SampleTruth& t) {
  return {{"sample_id", t.sample_id},
          {"base_logprob", t.base_logprob},
          {"gains", t.gains},
          {"key_frames", t.key_frames},
          {"answer_id", t.answer_id}};
}

SampleTruth truth_from_json(const json& j) {
  SampleTruth t;
  t.sample_id = j.at("sample_id").get<std::string>();
  t.base_logprob = j.at("base_logprob").get<double>();
  t.gains = j.at("gains").get<std::vector<double>>();
  t.key_frames = j.at("key_frames").get<std::vector<std::size_t>>();
  t.answer_id = j.at("answer_id").get<int>();
  return t;
}

std::string synthetic_sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "syn-%06zu", index);
  return buf;
}

namespace {

std::vector<double> gaussian_vector(std::mt19937_64& rng, std::size_t d, double sd) {
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> v(d);
  for (double& x : v) x = dist(rng);
  return v;
}

void normalize(std::vector<double>& v) {
  const double n = numerics::norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticOracleSpec& spec, std::size_t n_samples,
                                            std::size_t first_index) {
  spec.validate();
  const std::size_t n = spec.n_frames, d = spec.dim, l = spec.n_tokens;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double scale = spec.scale();

  // Quantities shared by every sample: the question-to-importance map M and a
  // fixed leading token (the encoder's start-of-text embedding).
  std::mt19937_64 world(detail::mix_seed(spec.seed, 0x5EEDULL));
  DenseArray m = DenseArray::zeros(d, d);
  {
    const auto r = gaussian_vector(world, d * d, inv_sqrt_d);
    const double rest = std::sqrt(1.0 - spec.alignment * spec.alignment);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        m(i, j) = rest * r[i * d + j] + (i == j ? spec.alignment : 0.0);
  }
  std::vector<double> start_token = gaussian_vector(world, d, 1.0);
  normalize(start_token);

  SyntheticDataset out;
  out.samples.reserve(n_samples);
  out.truth.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t index = first_index + s;
    std::mt19937_64 rng(detail::mix_seed(spec.seed, index + 1));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uniform01(0.0, 1.0);

    std::vector<double> q = gaussian_vector(rng, d, 1.0);
    normalize(q);
    std::vector<double> u(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) u[i] += m(i, j) * q[j];
    normalize(u);

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::vector<std::size_t> keys = aoi::sample_without_replacement(all, spec.key_frames(), rng());
    std::sort(keys.begin(), keys.end());
    std::vector<bool> is_key(n, false);
    for (std::size_t k : keys) is_key[k] = true;

    SampleTruth truth;
    truth.sample_id = synthetic_sample_id(index);
    truth.key_frames = keys;
    truth.gains.resize(n);
    const double offset = spec.sample_offset * unit(rng);

    features::SampleRecord rec;
    rec.sample_id = truth.sample_id;
    rec.n_options = spec.n_options;
    rec.features.frames = DenseArray::zeros(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v = gaussian_vector(rng, d, inv_sqrt_d);
      if (is_key[i])
        for (std::size_t j = 0; j < d; ++j) v[j] += spec.key_strength * u[j];
      normalize(v);
      truth.gains[i] = spec.gain_scale * numerics::dot(u, v) + offset + spec.noise * unit(rng);
      for (std::size_t j = 0; j < d; ++j) rec.features.frames(i, j) = scale * v[j];
    }
    const double max_gain = *std::max_element(truth.gains.begin(), truth.gains.end());
    // Single repeats never touch the clamp at zero.
    truth.base_logprob = std::min(-0.5 - 2.5 * uniform01(rng), -std::max(0.0, max_gain) - 1e-3);

    rec.question.tokens = DenseArray::zeros(l, d);
    for (std::size_t j = 0; j < d; ++j) rec.question.tokens(0, j) = scale * start_token[j];
    for (std::size_t t = 1; t < l; ++t) {
      std::vector<double> tok = gaussian_vector(rng, d, spec.token_noise * inv_sqrt_d);
      for (std::size_t j = 0; j < d; ++j) tok[j] += q[j];
      normalize(tok);
      for (std::size_t j = 0; j < d; ++j) rec.question.tokens(t, j) = scale * tok[j];
    }
    rec.question.pooled.resize(d);
    for (std::size_t j = 0; j < d; ++j) rec.question.pooled[j] = scale * q[j];
    truth.answer_id = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.n_options));
    rec.answer_id = truth.answer_id;

    features::quantize_to_f32(rec);
    rec.features.sims.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      rec.features.sims[i] = features::cosine(rec.features.frames.row(i), rec.question.pooled);
    features::quantize_to_f32(rec);

    out.samples.push_back(std::move(rec));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

SyntheticOracle::SyntheticOracle(SyntheticOracleSpec spec, const std::vector<SampleTruth>& truth)
    : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& t : truth) samples_.emplace(t.sample_id, t);
}

std::string SyntheticOracle::oracle_id() const {
  return "synthetic:seed=" + std::to_string(spec_.seed);
}

const SampleTruth& SyntheticOracle::truth(const std::string& sample_id) const {
  auto it = samples_.find(sample_id);
  if (it == samples_.end()) throw OracleError("synthetic oracle: unknown sample_id '" + sample_id + "'");
  return it->second;
}

double SyntheticOracle::raw_logprob(const std::string& sample_id,
                                    std::span<const std::size_t> sequence) const {
  const SampleTruth& t = truth(sample_id);
  const std::size_t n = t.gains.size();
  std::vector<int> counts(n, 0);
  for (std::size_t f : sequence) {
    if (f >= n) throw OracleError("synthetic oracle: frame index out of range for '" + sample_id + "'");
    ++counts[f];
  }
  double value = t.base_logprob;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] == 0) continue;
    value += t.gains[i] * static_cast<double>(std::min(counts[i] - 1, spec_.saturation - 1));
  }
  return value;
}

double SyntheticOracle::logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                                int /*answer_id*/) {
  if (sequence.empty()) throw OracleError("synthetic oracle: empty frame sequence");
  return std::min(0.0, raw_logprob(sample_id, sequence));
}

int SyntheticOracle::sample_answer(const std::string& sample_id, std::span<const std::size_t> sequence,
                                   double temperature) {
  const SampleTruth& t = truth(sample_id);
  const double lp = logprob(sample_id, sequence, t.answer_id);
  std::uint64_t draw = 0;
  {
    std::lock_guard lock(draw_mutex_);
    draw = draws_[sample_id]++;
  }
  std::uint64_t key = detail::mix_seed(spec_.seed, detail::fnv1a(sample_id));
  for (std::size_t f : sequence) key = detail::mix_seed(key, f);
  std::mt19937_64 rng(detail::mix_seed(key, draw));
  // 2 * sigmoid(lp / T) maps logprob 0 to certainty and -inf to never.
  const double p_correct =
      temperature > 0.0 ? 2.0 / (1.0 + std::exp(-lp / temperature)) : (lp > -std::log(2.0) ? 1.0 : 0.0);
  const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (r < p_correct) return t.answer_id;
  const int other = static_cast<int>(rng() % static_cast<std::uint64_t>(spec_.n_options - 1));
  return other >= t.answer_id ? other + 1 : other;
}

ReplayOracle::ReplayOracle(std::vector<aoi::RepeatGainRecord> records) {
  for (auto& r : records) {
    if (oracle_id_.empty()) oracle_id_ = r.oracle_id;
    else if (oracle_id_ != r.oracle_id) oracle_id_ = "replay";
    auto [it, inserted] = records_.emplace(r.sample_id, r);
    if (!inserted) it->second.merge(r);
  }
  if (oracle_id_.empty()) oracle_id_ = "replay";
}

ReplayOracle ReplayOracle::from_directory(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw LoadError(LoadError::Kind::MissingFile, "replay records directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<aoi::RepeatGainRecord> records;
  for (const auto& f : files) records.push_back(aoi::load_record(f));
  return ReplayOracle(std::move(records));
}

double ReplayOracle::logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                             int /*answer_id*/) {
  auto it = records_.find(sample_id);
  if (it == records_.end()) throw CacheMissError("replay oracle: no record for sample '" + sample_id + "'");
  const aoi::RepeatGainRecord& r = it->second;
  if (sequence.size() == r.n_frames &&
      std::equal(sequence.begin(), sequence.end(), aoi::baseline_multiset(r.n_frames).begin())) {
    return r.baseline_logprob;
  }
  if (const auto frame = aoi::repeated_frame(sequence, r.n_frames)) {
    if (const auto* e = r.find(*frame)) return e->logprob;
    throw CacheMissError("replay oracle: frame " + std::to_string(*frame) +
                         " was never scanned for sample '" + sample_id + "'");
  }
  throw CacheMissError("replay oracle: only baseline and single-repeat sequences are recorded ('" +
                       sample_id + "')");
}

int ReplayOracle::sample_answer(const std::string& sample_id, std::span<const std::size_t>, double) {
  throw OracleError("replay oracle: answer sampling is not recorded ('" + sample_id + "')");
}

}  // namespace framerepeat::oracles
