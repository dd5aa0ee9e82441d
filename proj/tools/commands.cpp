#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "framerepeat/aoi.hpp"
#include "framerepeat/errors.hpp"
#include "framerepeat/features.hpp"
#include "framerepeat/oracles.hpp"
#include "framerepeat/planner.hpp"
#include "framerepeat/remote_oracle.hpp"
#include "framerepeat/scorer.hpp"
#include "framerepeat/trainer.hpp"

namespace framerepeat::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "framerepeat-dataset";
constexpr int kDatasetVersion = 1;

std::string num(double v) { return format_number(v); }

void declare_io(RunConfig& c, bool needs_data) {
  c.declare("io.out", "");
  if (needs_data) c.declare("io.data", "");
}

void declare_synth(RunConfig& c) {
  const oracles::SyntheticOracleSpec s;
  c.declare("synth.n_samples", "100");
  c.declare("synth.first_index", "0");
  c.declare("synth.seed", std::to_string(s.seed));
  c.declare("synth.frames", std::to_string(s.n_frames));
  c.declare("synth.dim", std::to_string(s.dim));
  c.declare("synth.tokens", std::to_string(s.n_tokens));
  c.declare("synth.key_frames", std::to_string(s.n_key_frames));
  c.declare("synth.gain_scale", num(s.gain_scale));
  c.declare("synth.noise", num(s.noise));
  c.declare("synth.sample_offset", num(s.sample_offset));
  c.declare("synth.saturation", std::to_string(s.saturation));
  c.declare("synth.temperature", num(s.temperature));
  c.declare("synth.key_strength", num(s.key_strength));
  c.declare("synth.alignment", num(s.alignment));
  c.declare("synth.token_noise", num(s.token_noise));
  c.declare("synth.feature_scale", num(s.feature_scale));
  c.declare("synth.n_options", std::to_string(s.n_options));
}

void declare_oracle(RunConfig& c, const std::string& default_kind) {
  const oracles::RemoteOracleConfig r;
  c.declare("oracle.kind", default_kind);
  c.declare("oracle.records", "");
  c.declare("oracle.endpoint", "");
  c.declare("oracle.auth_token", "");
  c.declare("oracle.in_flight", std::to_string(r.in_flight_budget));
  c.declare("oracle.timeout", num(r.timeout_seconds));
  c.declare("oracle.retries", std::to_string(r.retries));
}

void declare_scorer(RunConfig& c) {
  const scorer::ScorerConfig s;
  c.declare("scorer.n_heads", std::to_string(s.n_heads));
  c.declare("scorer.ffn_hidden", "0");  // 0: same as the feature dim
  c.declare("scorer.prior_weight", num(s.prior_weight));
  c.declare("scorer.init_seed", "0");
}

oracles::SyntheticOracleSpec synth_spec(const RunConfig& c) {
  oracles::SyntheticOracleSpec s;
  s.seed = c.u64("synth.seed");
  s.n_frames = c.count("synth.frames");
  s.dim = c.count("synth.dim");
  s.n_tokens = c.count("synth.tokens");
  s.n_key_frames = c.count("synth.key_frames");
  s.gain_scale = c.real("synth.gain_scale");
  s.noise = c.real("synth.noise");
  s.sample_offset = c.real("synth.sample_offset");
  s.saturation = c.integer("synth.saturation");
  s.temperature = c.real("synth.temperature");
  s.key_strength = c.real("synth.key_strength");
  s.alignment = c.real("synth.alignment");
  s.token_noise = c.real("synth.token_noise");
  s.feature_scale = c.real("synth.feature_scale");
  s.n_options = c.integer("synth.n_options");
  s.validate();
  return s;
}

fs::path require_path(const RunConfig& c, const std::string& key) {
  const std::string& v = c.str(key);
  if (v.empty()) throw ConfigError(key + " is required (--" + key.substr(key.find('.') + 1) + ")");
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::MissingFile, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::Format, path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& out, const std::string& command, const RunConfig& c,
                    const std::vector<std::string>& argv, const json& outputs, const json& stats) {
  write_json(out / "run.json", {{"command", command},
                                {"argv", argv},
                                {"config", c.to_json()},
                                {"outputs", outputs},
                                {"stats", stats}});
}

// Dataset directory: dataset.json (index + synthetic spec), samples/<id>/,
// ground_truth.jsonl (synthetic only). Without dataset.json every
// subdirectory of samples/ (or of the directory itself) holding a
// manifest.json is a sample.
struct Dataset {
  std::vector<features::SampleRecord> samples;
  std::optional<oracles::SyntheticOracleSpec> spec;
  std::vector<oracles::SampleTruth> truth;

  std::size_t dim() const { return samples.front().dim(); }
};

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError(LoadError::Kind::MissingFile, "no dataset at " + dir.string());
  Dataset d;
  std::vector<fs::path> sample_dirs;
  if (fs::exists(dir / "dataset.json")) {
    const json index = read_json(dir / "dataset.json");
    if (index.value("format", "") != kDatasetFormat)
      throw LoadError(LoadError::Kind::Format, "dataset.json: unexpected format");
    if (index.value("version", 0) != kDatasetVersion)
      throw LoadError(LoadError::Kind::Version, "dataset.json: unsupported version");
    for (const auto& id : index.at("samples")) sample_dirs.push_back(dir / "samples" / id.get<std::string>());
    if (!index.at("synthetic").is_null()) d.spec = oracles::spec_from_json(index.at("synthetic"));
  } else {
    const fs::path root = fs::is_directory(dir / "samples") ? dir / "samples" : dir;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) sample_dirs.push_back(e.path());
    std::sort(sample_dirs.begin(), sample_dirs.end());
  }
  if (sample_dirs.empty()) throw LoadError(LoadError::Kind::MissingFile, "dataset has no samples: " + dir.string());
  for (const auto& p : sample_dirs) d.samples.push_back(features::load_sample(p));
  for (const auto& s : d.samples)
    if (s.dim() != d.samples.front().dim())
      throw LoadError(LoadError::Kind::Shape, "dataset mixes feature dims (" + s.sample_id + ")");

  const fs::path truth_path = dir / "ground_truth.jsonl";
  if (fs::exists(truth_path)) {
    std::ifstream in(truth_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        d.truth.push_back(oracles::truth_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw LoadError(LoadError::Kind::Format, "ground_truth.jsonl: " + std::string(e.what()));
      }
    }
  }
  return d;
}

std::unique_ptr<Oracle> make_oracle(const RunConfig& c, const Dataset& d) {
  const std::string& kind = c.str("oracle.kind");
  if (kind == "synthetic") {
    if (!d.spec || d.truth.empty())
      throw ConfigError("--oracle synthetic needs a synthetic dataset with ground_truth.jsonl");
    return std::make_unique<oracles::SyntheticOracle>(*d.spec, d.truth);
  }
  if (kind == "replay") {
    return std::make_unique<oracles::ReplayOracle>(
        oracles::ReplayOracle::from_directory(require_path(c, "oracle.records")));
  }
  if (kind == "remote") {
    oracles::RemoteOracleConfig r;
    r.endpoint = require_path(c, "oracle.endpoint").string();
    r.auth_token = c.str("oracle.auth_token");
    r.in_flight_budget = c.count("oracle.in_flight");
    r.timeout_seconds = c.real("oracle.timeout");
    r.retries = c.integer("oracle.retries");
    return std::make_unique<oracles::RemoteOracle>(r);
  }
  if (kind == "none") return nullptr;
  throw ConfigError("oracle.kind must be synthetic, replay, remote or none (got '" + kind + "')");
}

scorer::ScorerConfig scorer_config(const RunConfig& c, std::size_t dim) {
  scorer::ScorerConfig s;
  s.dim = dim;
  s.n_heads = c.count("scorer.n_heads");
  s.ffn_hidden = c.count("scorer.ffn_hidden") ? c.count("scorer.ffn_hidden") : dim;
  s.prior_weight = c.real("scorer.prior_weight");
  s.seed = c.u64("scorer.init_seed");
  s.validate();
  return s;
}

// Checkpoint if one is named, a fresh scorer otherwise.
std::pair<scorer::ScorerParams, scorer::ScorerConfig> load_model(const RunConfig& c,
                                                                 const std::string& key,
                                                                 const Dataset& d) {
  const std::string& path = c.str(key);
  if (path.empty()) {
    const auto sc = scorer_config(c, d.dim());
    return {scorer::init_params(sc, sc.seed), sc};
  }
  auto model = scorer::load_checkpoint(path);
  if (model.second.dim != d.dim())
    throw DimensionError("checkpoint dim " + std::to_string(model.second.dim) + " != feature dim " +
                         std::to_string(d.dim()));
  return model;
}

std::size_t resolve_k(const std::string& value, std::size_t n_frames) {
  if (value == "auto") return planner::default_k(n_frames);
  char* end = nullptr;
  const long long k = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || *end != '\0') throw ConfigError("k: expected an integer or 'auto', got '" + value + "'");
  if (k < 1 || static_cast<std::size_t>(k) > n_frames)
    throw ConfigError("k must be in [1, N] (got " + value + ", N = " + std::to_string(n_frames) + ")");
  return static_cast<std::size_t>(k);
}

std::uint64_t mix(std::uint64_t seed, const std::string& id) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : id) h = (h ^ ch) * 1099511628211ull;
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull + h;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------- synth

void cmd_synth(const RunConfig& c, const std::vector<std::string>& argv) {
  const fs::path out = require_path(c, "io.out");
  const auto spec = synth_spec(c);
  const std::size_t n = c.count("synth.n_samples");
  if (n == 0) throw ConfigError("synth.n_samples must be >= 1");
  const auto ds = oracles::generate_synthetic_dataset(spec, n, c.count("synth.first_index"));

  json ids = json::array();
  std::string truth_lines;
  for (std::size_t i = 0; i < n; ++i) {
    features::save_sample(ds.samples[i], out / "samples" / ds.samples[i].sample_id);
    ids.push_back(ds.samples[i].sample_id);
    truth_lines += oracles::to_json(ds.truth[i]).dump() + "\n";
  }
  write_json(out / "dataset.json", {{"format", kDatasetFormat},
                                    {"version", kDatasetVersion},
                                    {"synthetic", oracles::to_json(spec)},
                                    {"first_index", c.count("synth.first_index")},
                                    {"samples", ids}});
  write_text(out / "ground_truth.jsonl", truth_lines);
  write_manifest(out, "synth", c, argv,
                 {{"dataset", "dataset.json"}, {"samples", "samples"}, {"ground_truth", "ground_truth.jsonl"}},
                 {{"samples", n}});
  std::cout << "wrote " << n << " samples (N=" << spec.n_frames << ", d=" << spec.dim << ") to "
            << out.string() << "\n";
}

// ---------------------------------------------------------------- scan

void cmd_scan(const RunConfig& c, const std::vector<std::string>& argv) {
  const fs::path out = require_path(c, "io.out");
  const Dataset d = load_dataset(require_path(c, "io.data"));
  auto oracle = make_oracle(c, d);
  if (!oracle) throw ConfigError("scan needs an oracle");
  oracles::CountingOracle counter(*oracle);

  const std::string mode = c.str("scan.mode");
  if (mode != "all" && mode != "random" && mode != "hybrid")
    throw ConfigError("scan.mode must be all, random or hybrid");
  std::optional<std::pair<scorer::ScorerParams, scorer::ScorerConfig>> model;
  if (mode == "hybrid") model = load_model(c, "scan.checkpoint", d);
  const std::uint64_t seed = c.u64("scan.seed");
  const std::size_t stop_after = c.count("scan.stop_after");
  aoi::ScanOptions opts;
  opts.max_in_flight = c.count("scan.max_in_flight");
  if (opts.max_in_flight < 1) throw ConfigError("scan.max_in_flight must be >= 1");

  std::size_t scanned = 0, resumed = 0, reused = 0, incomplete = 0;
  for (const auto& sample : d.samples) {
    if (stop_after && scanned + resumed >= stop_after) break;
    const std::size_t n = sample.n_frames();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> frames;
    if (mode == "all") {
      frames = all;
    } else if (mode == "random") {
      frames = aoi::sample_without_replacement(all, std::min(c.count("scan.random_frames"), n), mix(seed, sample.sample_id));
      std::sort(frames.begin(), frames.end());
    } else {
      const auto scores = scorer::forward(sample, model->first, model->second);
      frames = aoi::select_candidates(scores, std::min(c.count("scan.k"), n), mix(seed, sample.sample_id)).all();
    }

    const fs::path path = out / "records" / (sample.sample_id + ".json");
    aoi::RepeatGainRecord record;
    std::optional<aoi::RepeatGainRecord> existing;
    if (fs::exists(path)) {
      existing = aoi::load_record(path);
      if (existing->oracle_id != oracle->oracle_id()) existing.reset();
    }
    if (existing && existing->complete && existing->covers(frames)) {
      ++reused;
      continue;
    }
    if (existing) {
      aoi::RepeatGainRecord partial = *existing;
      std::vector<std::size_t> wanted = partial.candidates;
      wanted.insert(wanted.end(), frames.begin(), frames.end());
      std::sort(wanted.begin(), wanted.end());
      wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
      partial.candidates = wanted;
      record = aoi::resume_scan(partial, sample, counter, opts);
      ++resumed;
    } else {
      record = aoi::scan_repeat_gains(sample, frames, counter, opts);
      ++scanned;
    }
    aoi::save_record(record, path);
    if (!record.complete) ++incomplete;
  }

  const json stats = {{"samples", d.samples.size()},
                      {"scanned", scanned},
                      {"resumed", resumed},
                      {"reused", reused},
                      {"incomplete", incomplete},
                      {"oracle_calls", counter.logprob_calls()},
                      {"oracle_id", oracle->oracle_id()}};
  write_manifest(out, "scan", c, argv, {{"records", "records"}}, stats);
  std::cout << "scan: " << scanned << " scanned, " << resumed << " resumed, " << reused
            << " already complete, " << incomplete << " incomplete, " << counter.logprob_calls()
            << " oracle calls\n";
  if (incomplete > 0)
    throw OracleError(std::to_string(incomplete) + " record(s) incomplete; rerun the same command to resume");
}

// ---------------------------------------------------------------- train

trainer::TrainConfig train_config(const RunConfig& c) {
  trainer::TrainConfig t;
  t.lr = c.real("train.lr");
  t.lr_reference_dim = c.count("train.lr_reference_dim");
  t.epochs = c.count("train.epochs");
  t.accumulation = c.count("train.accumulation");
  t.k = c.count("train.k");
  t.seed = c.u64("train.seed");
  t.shuffle = c.boolean("train.shuffle");
  t.freeze_candidates = c.boolean("train.freeze_candidates");
  t.max_in_flight = c.count("train.max_in_flight");
  t.checkpoint_every = c.count("train.checkpoint_every");
  t.loss.reg_weight = c.real("train.reg_weight");
  t.loss.rank_weight = c.real("train.rank_weight");
  t.loss.margin = c.real("train.margin");
  t.loss.eps = c.real("train.eps");
  t.loss.extra_negatives = c.count("train.extra_negatives");
  t.validate();
  return t;
}

void cmd_train(const RunConfig& c, const std::vector<std::string>& argv) {
  const fs::path out = require_path(c, "io.out");
  const Dataset d = load_dataset(require_path(c, "io.data"));
  auto oracle = make_oracle(c, d);
  trainer::TrainConfig tc = train_config(c);
  if (tc.checkpoint_every) tc.checkpoint_dir = out / "checkpoints";

  scorer::ScorerConfig sc;
  scorer::ScorerParams init;
  if (!c.str("train.init").empty()) {
    std::tie(init, sc) = load_model(c, "train.init", d);
  } else {
    sc = scorer_config(c, d.dim());
    init = scorer::init_params(sc, sc.seed);
  }
  const fs::path cache_dir = c.str("train.cache").empty() ? out / "records" : fs::path(c.str("train.cache"));
  trainer::RecordCache cache(cache_dir);

  fs::create_directories(out);
  scorer::save_checkpoint(init, sc, out / "init.ckpt");
  std::cout << "training " << init.count() << " parameters on " << d.samples.size()
            << " samples, effective lr " << tc.effective_lr(sc.dim) << "\n";
  const auto result = trainer::train(d.samples, oracle.get(), init, sc, tc, cache);
  scorer::save_checkpoint(result.params, sc, out / "checkpoint.ckpt");
  result.log.write_jsonl(out / "train_log.jsonl");

  std::optional<double> final_loss;
  for (const auto& e : result.log.entries)
    if (e.loss) final_loss = e.loss;
  json stats = {{"steps", result.log.entries.size()},
                {"oracle_calls", result.log.oracle_calls},
                {"cache_hits", result.log.cache_hits},
                {"skipped", result.log.skipped},
                {"effective_lr", tc.effective_lr(sc.dim)},
                {"parameters", init.count()},
                {"final_loss", final_loss ? json(*final_loss) : json(nullptr)},
                {"train_config", trainer::to_json(tc)}};
  write_manifest(out, "train", c, argv,
                 {{"checkpoint", "checkpoint.ckpt"},
                  {"init", "init.ckpt"},
                  {"log", "train_log.jsonl"},
                  {"records", cache_dir.string()}},
                 stats);
  std::cout << "train: " << result.log.entries.size() << " steps, " << result.log.oracle_calls
            << " oracle calls, " << result.log.cache_hits << " cache hits, " << result.log.skipped
            << " skipped";
  if (final_loss) std::cout << ", final loss " << *final_loss;
  std::cout << "\n";
}

// ---------------------------------------------------------------- plan

void cmd_plan(const RunConfig& c, const std::vector<std::string>& argv) {
  const fs::path out = require_path(c, "io.out");
  const Dataset d = load_dataset(require_path(c, "io.data"));
  const auto [params, sc] = load_model(c, "plan.checkpoint", d);
  const bool select_only = c.boolean("plan.select_only");

  json plans = json::array();
  for (const auto& sample : d.samples) {
    const std::size_t k = resolve_k(c.str("plan.k"), sample.n_frames());
    const auto scores = scorer::forward(sample, params, sc);
    const auto p = planner::plan_from_scores(sample.sample_id, scores, k);
    planner::check_plan(p);
    json j = planner::to_json(p);
    if (select_only) j["select_only"] = planner::select_only_from_scores(scores, k);
    plans.push_back(std::move(j));
  }
  write_json(out / "plans.json", {{"k", c.str("plan.k")}, {"plans", plans}});
  write_manifest(out, "plan", c, argv, {{"plans", "plans.json"}}, {{"samples", d.samples.size()}});
  std::cout << "plan: " << d.samples.size() << " plans written to " << (out / "plans.json").string() << "\n";
}

// ---------------------------------------------------------------- eval

void cmd_eval(const RunConfig& c, const std::vector<std::string>& argv) {
  const fs::path out = require_path(c, "io.out");
  const Dataset d = load_dataset(require_path(c, "io.data"));

  std::map<std::string, trainer::FrameTruth> truth;
  const std::string records = c.str("eval.truth_records");
  if (!records.empty()) {
    for (const auto& e : fs::directory_iterator(records)) {
      if (e.path().extension() != ".json") continue;
      const auto r = aoi::load_record(e.path());
      truth[r.sample_id] = trainer::truth_from_record(r);
    }
  } else {
    if (d.truth.empty())
      throw LoadError(LoadError::Kind::MissingFile,
                      "no ground truth: dataset has no ground_truth.jsonl and eval.truth_records is unset");
    for (const auto& t : d.truth) truth[t.sample_id] = trainer::truth_from_synthetic(t);
  }

  const std::string source = c.str("eval.scores");
  std::vector<std::vector<double>> scores;
  if (source == "model") {
    const auto [params, sc] = load_model(c, "eval.checkpoint", d);
    for (const auto& s : d.samples) scores.push_back(scorer::forward(s, params, sc));
  } else if (source == "prior") {
    for (const auto& s : d.samples)
      scores.push_back(scorer::similarity_prior(s.features.sims, c.real("scorer.prior_weight")));
  } else if (source == "truth") {
    for (const auto& s : d.samples) {
      auto it = truth.find(s.sample_id);
      if (it == truth.end()) throw LoadError(LoadError::Kind::MissingFile, "no ground truth for " + s.sample_id);
      scores.push_back(it->second.gains);
    }
  } else {
    throw ConfigError("eval.scores must be model, prior or truth");
  }

  const std::size_t k = resolve_k(c.str("eval.k"), d.samples.front().n_frames());
  const auto m = trainer::evaluate_scores(d.samples, scores, truth, k, c.u64("eval.seed"),
                                          c.count("eval.random_trials"));
  json metrics = trainer::to_json(m);
  metrics["scores"] = source;
  write_json(out / "metrics.json", metrics);
  write_manifest(out, "eval", c, argv, {{"metrics", "metrics.json"}}, metrics);

  char line[160];
  std::cout << "eval over " << m.n_samples << " samples, k = " << m.k << " (" << source << " scores)\n";
  std::snprintf(line, sizeof(line), "  %-16s %10.4f\n", "spearman", m.spearman);
  std::cout << line;
  if (m.recall_at_k) {
    std::snprintf(line, sizeof(line), "  %-16s %10.4f\n", "recall@k", *m.recall_at_k);
    std::cout << line;
  }
  std::snprintf(line, sizeof(line), "  %-16s %10.4f\n  %-16s %10.4f +- %.4f\n  %-16s %10.4f\n",
                "top-k gain", m.mean_topk_gain, "random-k gain", m.mean_randomk_gain,
                m.randomk_gain_sem, "bottom-k gain", m.mean_bottomk_gain);
  std::cout << line;
}

}  // namespace

void declare_settings(const std::string& command, RunConfig& c) {
  if (command == "synth") {
    declare_io(c, false);
    declare_synth(c);
  } else if (command == "scan") {
    declare_io(c, true);
    declare_oracle(c, "synthetic");
    declare_scorer(c);
    c.declare("scan.mode", "hybrid");
    c.declare("scan.k", "16");
    c.declare("scan.random_frames", "32");
    c.declare("scan.seed", "0");
    c.declare("scan.checkpoint", "");
    c.declare("scan.max_in_flight", "1");
    c.declare("scan.stop_after", "0");
  } else if (command == "train") {
    declare_io(c, true);
    declare_oracle(c, "synthetic");
    declare_scorer(c);
    const trainer::TrainConfig t;
    c.declare("train.lr", num(t.lr));
    c.declare("train.lr_reference_dim", std::to_string(t.lr_reference_dim));
    c.declare("train.epochs", std::to_string(t.epochs));
    c.declare("train.accumulation", std::to_string(t.accumulation));
    c.declare("train.k", std::to_string(t.k));
    c.declare("train.seed", std::to_string(t.seed));
    c.declare("train.shuffle", t.shuffle ? "true" : "false");
    c.declare("train.freeze_candidates", t.freeze_candidates ? "true" : "false");
    c.declare("train.max_in_flight", std::to_string(t.max_in_flight));
    c.declare("train.checkpoint_every", std::to_string(t.checkpoint_every));
    c.declare("train.reg_weight", num(t.loss.reg_weight));
    c.declare("train.rank_weight", num(t.loss.rank_weight));
    c.declare("train.margin", num(t.loss.margin));
    c.declare("train.eps", num(t.loss.eps));
    c.declare("train.extra_negatives", std::to_string(t.loss.extra_negatives));
    c.declare("train.cache", "");
    c.declare("train.init", "");
  } else if (command == "plan") {
    declare_io(c, true);
    declare_scorer(c);
    c.declare("plan.checkpoint", "");
    c.declare("plan.k", "auto");
    c.declare("plan.select_only", "false");
  } else if (command == "eval") {
    declare_io(c, true);
    declare_scorer(c);
    c.declare("eval.checkpoint", "");
    c.declare("eval.k", "auto");
    c.declare("eval.seed", "0");
    c.declare("eval.random_trials", "3");
    c.declare("eval.scores", "model");
    c.declare("eval.truth_records", "");
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
}

void run_command(const std::string& command, const RunConfig& c, const std::vector<std::string>& argv) {
  if (command == "synth") cmd_synth(c, argv);
  else if (command == "scan") cmd_scan(c, argv);
  else if (command == "train") cmd_train(c, argv);
  else if (command == "plan") cmd_plan(c, argv);
  else if (command == "eval") cmd_eval(c, argv);
  else throw ConfigError("unknown command '" + command + "'");
}

}  // namespace framerepeat::cli
