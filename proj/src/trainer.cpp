#include "framerepeat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "framerepeat/errors.hpp"
#include "parallel.hpp"

namespace framerepeat::trainer {

namespace fs = std::filesystem;
using json = nlohmann::json;
using numerics::DenseArray;

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (accumulation < 1) throw ConfigError("accumulation must be >= 1");
  if (k < 1) throw ConfigError("K must be >= 1");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  loss.validate();
}

double TrainConfig::effective_lr(std::size_t dim) const {
  if (lr_reference_dim == 0 || dim == 0) return lr;
  return lr * static_cast<double>(lr_reference_dim) / static_cast<double>(dim);
}

json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"lr_reference_dim", c.lr_reference_dim},
          {"epochs", c.epochs},
          {"accumulation", c.accumulation},
          {"k", c.k},
          {"seed", c.seed},
          {"shuffle", c.shuffle},
          {"freeze_candidates", c.freeze_candidates},
          {"max_in_flight", c.max_in_flight},
          {"loss",
           {{"reg_weight", c.loss.reg_weight},
            {"rank_weight", c.loss.rank_weight},
            {"margin", c.loss.margin},
            {"eps", c.loss.eps},
            {"extra_negatives", c.loss.extra_negatives}}}};
}

json to_json(const TrainLogEntry& e) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"step", e.step},
          {"epoch", e.epoch},
          {"loss", opt(e.loss)},
          {"regression", opt(e.regression)},
          {"ranking", opt(e.ranking)},
          {"score_std", e.score_std},
          {"samples", e.samples},
          {"skipped", e.skipped},
          {"wall_seconds", e.wall_seconds},
          {"oracle_calls", e.oracle_calls},
          {"cache_hits", e.cache_hits}};
}

void TrainLog::write_jsonl(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : entries) out << to_json(e).dump() << "\n";
}

RecordCache::RecordCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(*dir_);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(*dir_))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    aoi::RepeatGainRecord r = aoi::load_record(f);
    records_[{r.sample_id, r.oracle_id}] = std::move(r);
  }
}

const aoi::RepeatGainRecord* RecordCache::find(const std::string& sample_id,
                                               const std::string& oracle_id) const {
  auto it = records_.find({sample_id, oracle_id});
  return it == records_.end() ? nullptr : &it->second;
}

const aoi::RepeatGainRecord* RecordCache::find_any(const std::string& sample_id) const {
  auto it = records_.lower_bound({sample_id, std::string()});
  return it != records_.end() && it->first.first == sample_id ? &it->second : nullptr;
}

void RecordCache::store(const aoi::RepeatGainRecord& record) {
  auto key = std::make_pair(record.sample_id, record.oracle_id);
  auto it = records_.find(key);
  if (it == records_.end()) {
    it = records_.emplace(key, record).first;
  } else if (it->second.baseline_logprob == record.baseline_logprob) {
    it->second.merge(record);
  } else {
    it->second = record;
  }
  if (dir_) {
    const std::string stem = record.sample_id + "." + std::to_string(detail::fnv1a(record.oracle_id) & 0xFFFFFFFFu);
    aoi::save_record(it->second, *dir_ / (stem + ".json"));
  }
}

namespace {

std::uint64_t sample_seed(std::uint64_t seed, std::size_t epoch, const std::string& sample_id) {
  return detail::mix_seed(detail::mix_seed(seed, epoch), detail::fnv1a(sample_id));
}

}  // namespace

TrainResult train(std::span<const features::SampleRecord> dataset, Oracle* oracle,
                  scorer::ScorerParams params, const scorer::ScorerConfig& scorer_config,
                  const TrainConfig& config, RecordCache& cache) {
  config.validate();
  scorer_config.validate();
  if (dataset.empty()) throw ConfigError("train: dataset is empty");

  std::optional<oracles::CountingOracle> counter;
  if (oracle) counter.emplace(*oracle);
  const std::string oracle_id = oracle ? oracle->oracle_id() : std::string();

  numerics::AdamConfig adam;
  adam.lr = config.effective_lr(scorer_config.dim);
  std::vector<DenseArray> tensors = params.tensors();
  numerics::AdamState state = numerics::AdamState::zeros_like(tensors);

  TrainLog log;
  std::map<std::string, std::vector<std::size_t>> frozen;
  std::size_t contributed_total = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) {
      order = aoi::sample_without_replacement(order, order.size(), detail::mix_seed(config.seed, 0xE90C + epoch));
    }

    std::vector<DenseArray> grad_sum;
    for (const auto& t : tensors) grad_sum.push_back(DenseArray::zeros_like(t));
    TrainLogEntry window;
    double loss_sum = 0.0, reg_sum = 0.0, rank_sum = 0.0, std_sum = 0.0;
    std::size_t contributed = 0;

    auto flush = [&] {
      if (window.samples == 0) return;
      window.epoch = epoch;
      window.score_std = std_sum / static_cast<double>(window.samples);
      if (contributed > 0) {
        const double inv = 1.0 / static_cast<double>(contributed);
        for (auto& g : grad_sum)
          for (double& v : g.data()) v *= inv;
        numerics::adam_step(tensors, grad_sum, state, adam);
        window.loss = loss_sum * inv;
        window.regression = reg_sum * inv;
        window.ranking = rank_sum * inv;
      }
      window.step = log.entries.size() + 1;
      window.oracle_calls = counter ? counter->logprob_calls() : 0;
      window.cache_hits = log.cache_hits;
      window.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log.entries.push_back(window);
      if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() &&
          window.step % config.checkpoint_every == 0) {
        params.assign(tensors);
        char name[32];
        std::snprintf(name, sizeof(name), "step_%06zu.ckpt", window.step);
        scorer::save_checkpoint(params, scorer_config, config.checkpoint_dir / name);
      }
      for (auto& g : grad_sum) std::fill(g.data().begin(), g.data().end(), 0.0);
      window = TrainLogEntry{};
      loss_sum = reg_sum = rank_sum = std_sum = 0.0;
      contributed = 0;
    };

    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const features::SampleRecord& sample = dataset[order[pos]];
      const std::size_t n = sample.n_frames();
      params.assign(tensors);

      numerics::Tape tape;
      const scorer::ScoreGraph graph = scorer::build_scores(tape, sample, params, scorer_config);
      const auto score_values = tape.value(graph.scores).data();
      std_sum += numerics::stddev(score_values);
      ++window.samples;

      const std::uint64_t sseed = sample_seed(config.seed, epoch, sample.sample_id);
      std::vector<std::size_t> candidates;
      if (config.freeze_candidates && frozen.contains(sample.sample_id)) {
        candidates = frozen[sample.sample_id];
      } else {
        candidates = aoi::select_candidates(score_values, std::min(config.k, n), sseed).all();
        if (config.freeze_candidates) frozen[sample.sample_id] = candidates;
      }

      // Repeat gains: cached entries first, then the oracle for what is missing.
      std::optional<aoi::RepeatGainRecord> record;
      const aoi::RepeatGainRecord* cached =
          oracle ? cache.find(sample.sample_id, oracle_id) : cache.find_any(sample.sample_id);
      if (cached && cached->covers(candidates)) {
        record = *cached;
        ++log.cache_hits;
      } else if (counter) {
        try {
          aoi::ScanOptions opts;
          opts.max_in_flight = config.max_in_flight;
          if (cached) {
            aoi::RepeatGainRecord partial = *cached;
            partial.candidates = candidates;
            record = aoi::resume_scan(partial, sample, *counter, opts);
          } else {
            record = aoi::scan_repeat_gains(sample, candidates, *counter, opts);
          }
          cache.store(*record);
          if (!record->complete) record.reset();
        } catch (const OracleError&) {
          record.reset();
        }
      }
      if (!record) {
        ++window.skipped;
        ++log.skipped;
        if (window.samples == config.accumulation) flush();
        continue;
      }

      std::vector<double> gains;
      gains.reserve(candidates.size());
      for (std::size_t f : candidates) gains.push_back(record->find(f)->gain);

      std::vector<bool> in_c(n, false);
      for (std::size_t f : candidates) in_c[f] = true;
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < n; ++i)
        if (!in_c[i]) pool.push_back(i);
      const std::size_t budget = config.loss.extra_negatives ? config.loss.extra_negatives : config.k;
      const auto extra = aoi::sample_without_replacement(pool, std::min(budget, pool.size()),
                                                         detail::mix_seed(sseed, 2));

      const losses::LossTerms terms =
          losses::total_loss(tape, graph.scores, candidates, gains, extra, config.loss);
      const auto grads = tape.gradients(terms.total, graph.params);
      for (std::size_t t = 0; t < grads.size(); ++t) {
        auto dst = grad_sum[t].data();
        auto src = grads[t].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      loss_sum += tape.value(terms.total)[0];
      reg_sum += tape.value(terms.regression)[0];
      rank_sum += tape.value(terms.ranking)[0];
      ++contributed;
      ++contributed_total;
      if (window.samples == config.accumulation) flush();
    }
    flush();
  }

  if (contributed_total == 0) {
    throw OracleError("train: every sample was skipped (no oracle answers and no cached records)");
  }
  log.oracle_calls = counter ? counter->logprob_calls() : 0;
  params.assign(std::move(tensors));
  return {std::move(params), std::move(log)};
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double mean_at(std::span<const double> values, std::span<const std::size_t> idx) {
  double total = 0.0;
  for (std::size_t i : idx) total += values[i];
  return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: length mismatch");
  if (a.size() < 2) return 0.0;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = numerics::mean(ra), mb = numerics::mean(rb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

json to_json(const RankingMetrics& m) {
  return {{"n_samples", m.n_samples},
          {"k", m.k},
          {"spearman", m.spearman},
          {"recall_at_k", m.recall_at_k ? json(*m.recall_at_k) : json(nullptr)},
          {"mean_topk_gain", m.mean_topk_gain},
          {"mean_randomk_gain", m.mean_randomk_gain},
          {"randomk_gain_sem", m.randomk_gain_sem},
          {"mean_bottomk_gain", m.mean_bottomk_gain}};
}

FrameTruth truth_from_synthetic(const oracles::SampleTruth& truth) {
  return {truth.gains, truth.key_frames};
}

FrameTruth truth_from_record(const aoi::RepeatGainRecord& record) {
  if (!record.complete || record.entries.size() != record.n_frames || record.n_frames == 0) {
    throw LoadError(LoadError::Kind::Range,
                    "record '" + record.sample_id + "' is not a complete full-frame scan");
  }
  FrameTruth t;
  for (const auto& e : record.entries) t.gains.push_back(e.gain);
  return t;
}

RankingMetrics evaluate_scores(std::span<const features::SampleRecord> dataset,
                               std::span<const std::vector<double>> scores,
                               const std::map<std::string, FrameTruth>& truth, std::size_t k,
                               std::uint64_t seed, std::size_t random_trials) {
  if (dataset.empty()) throw ConfigError("evaluate: dataset is empty");
  if (scores.size() != dataset.size()) throw DimensionError("evaluate: one score vector per sample");
  if (random_trials < 1) throw ConfigError("evaluate: random_trials must be >= 1");
  RankingMetrics m;
  m.n_samples = dataset.size();
  m.k = k;
  double recall_sum = 0.0;
  std::size_t recall_n = 0;
  std::vector<double> random_means;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const auto& sample = dataset[s];
    auto it = truth.find(sample.sample_id);
    if (it == truth.end())
      throw LoadError(LoadError::Kind::MissingFile, "evaluate: no ground truth for '" + sample.sample_id + "'");
    const FrameTruth& t = it->second;
    const auto& sc = scores[s];
    if (t.gains.size() != sample.n_frames() || sc.size() != sample.n_frames())
      throw DimensionError("evaluate: truth/score length differs from N for '" + sample.sample_id + "'");
    if (k < 1 || k > sc.size()) throw ConfigError("evaluate: k outside [1, N]");

    m.spearman += spearman(sc, t.gains);
    const auto top = aoi::top_k_indices(sc, k);
    m.mean_topk_gain += mean_at(t.gains, top);
    std::vector<double> negated(sc.size());
    for (std::size_t i = 0; i < sc.size(); ++i) negated[i] = -sc[i];
    m.mean_bottomk_gain += mean_at(t.gains, aoi::top_k_indices(negated, k));

    std::vector<std::size_t> all(sc.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    double rnd = 0.0;
    for (std::size_t r = 0; r < random_trials; ++r) {
      const auto pick = aoi::sample_without_replacement(
          all, k, detail::mix_seed(detail::mix_seed(seed, detail::fnv1a(sample.sample_id)), r));
      rnd += mean_at(t.gains, pick);
    }
    random_means.push_back(rnd / static_cast<double>(random_trials));

    if (!t.key_frames.empty()) {
      std::size_t hit = 0;
      for (std::size_t f : top)
        if (std::find(t.key_frames.begin(), t.key_frames.end(), f) != t.key_frames.end()) ++hit;
      recall_sum += static_cast<double>(hit) / static_cast<double>(std::min(k, t.key_frames.size()));
      ++recall_n;
    }
  }
  const double n = static_cast<double>(dataset.size());
  m.spearman /= n;
  m.mean_topk_gain /= n;
  m.mean_bottomk_gain /= n;
  m.mean_randomk_gain = numerics::mean(random_means);
  m.randomk_gain_sem = random_means.size() > 1
                           ? numerics::stddev(random_means) *
                                 std::sqrt(n / (n - 1.0)) / std::sqrt(n)
                           : 0.0;
  if (recall_n > 0) m.recall_at_k = recall_sum / static_cast<double>(recall_n);
  return m;
}

RankingMetrics evaluate_ranking(std::span<const features::SampleRecord> dataset,
                                const std::map<std::string, FrameTruth>& truth,
                                const scorer::ScorerParams& params,
                                const scorer::ScorerConfig& config, std::size_t k,
                                std::uint64_t seed, std::size_t random_trials) {
  std::vector<std::vector<double>> scores;
  scores.reserve(dataset.size());
  for (const auto& sample : dataset) scores.push_back(scorer::forward(sample, params, config));
  return evaluate_scores(dataset, scores, truth, k, seed, random_trials);
}

}  // namespace framerepeat::trainer
