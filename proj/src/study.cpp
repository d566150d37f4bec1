#include "eleatt/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "binary_io.hpp"
#include "eleatt/analysis.hpp"
#include "eleatt/error.hpp"

namespace eleatt {
namespace {

double mean_modulation(const RelativeAttention& rel, const std::vector<std::size_t>& elements) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t e : elements) {
    if (std::isnan(rel.static_modulation[e])) continue;
    sum += rel.static_modulation[e];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

StudyRun run_one(const StudySpec& spec, const StudyVariant& variant, std::uint64_t seed,
                 const Dataset& data) {
  TrainConfig tc = spec.train;
  tc.seed = seed;
  for (LayerSpec& layer : tc.network.layers) {
    layer.gated = variant.gated;
    layer.gate_activation = variant.activation;
  }
  const TrainResult result = train(tc, data);

  StudyRun run;
  run.variant = variant.name;
  run.seed = seed;
  run.log = result.log;
  if (!result.log.epochs.empty()) run.final_train_loss = result.log.epochs.back().train_loss;
  const EvalResult test = evaluate(result.model, data.test);
  run.test_accuracy = test.accuracy;
  run.test_loss = test.loss;

  if (result.model.has_gated_layer()) {
    const AttentionTrace trace = extract_attention(result.model, data.test);
    const RelativeAttention rel = relative_attention(trace, 0);
    std::vector<std::size_t> informative = data.test.informative;
    std::vector<std::size_t> distractors;
    for (std::size_t d = 0; d < data.test.dims; ++d) {
      if (std::find(informative.begin(), informative.end(), d) == informative.end()) distractors.push_back(d);
    }
    run.informative_attention = mean_over(rel, informative);
    run.distractor_attention = mean_over(rel, distractors);
    run.informative_modulation = mean_modulation(rel, informative);
    run.distractor_modulation = mean_modulation(rel, distractors);
  }
  return run;
}

}  // namespace

std::vector<StudyRun> run_study(const StudySpec& spec, const std::function<void(const StudyRun&)>& on_run) {
  if (spec.variants.empty()) throw ConfigError("study: no variants");
  if (spec.seeds == 0) throw ConfigError("study: seeds must be positive");

  std::vector<Dataset> data(spec.seeds);
  for (std::size_t s = 0; s < spec.seeds; ++s) {
    DistractorTaskSpec task = spec.task;
    task.seed = spec.base_seed + s;
    data[s] = gen_distractor(task);
  }

  const std::size_t jobs = spec.seeds * spec.variants.size();
  std::vector<StudyRun> runs(jobs);
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t s = job / spec.variants.size();
      const StudyVariant& variant = spec.variants[job % spec.variants.size()];
      try {
        runs[job] = run_one(spec, variant, spec.base_seed + s, data[s]);
        std::lock_guard lock(report_mutex);
        if (on_run) on_run(runs[job]);
      } catch (...) {
        std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(spec.threads, 1, jobs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return runs;
}

std::vector<StudyRun> runs_of(const std::vector<StudyRun>& runs, const std::string& variant) {
  std::vector<StudyRun> out;
  for (const StudyRun& r : runs) {
    if (r.variant == variant) out.push_back(r);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<std::size_t> epochs_to_reach(const RunLog& log, double target) {
  for (const EpochRecord& r : log.epochs) {
    if (r.train_loss <= target) return r.epoch;
  }
  return std::nullopt;
}

std::string study_csv(const std::vector<StudyRun>& runs) {
  std::string out = "variant,seed,epochs,final_train_loss,test_acc,test_loss,informative_attention,distractor_attention,"
                    "informative_modulation,distractor_modulation\n";
  auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("NA"); };
  for (const StudyRun& r : runs) {
    out += r.variant + "," + std::to_string(r.seed) + "," + std::to_string(r.log.epochs.size()) + "," +
           io::format_double(r.final_train_loss) + "," + io::format_double(r.test_accuracy) + "," +
           io::format_double(r.test_loss) + "," + opt(r.informative_attention) + "," +
           opt(r.distractor_attention) + "," + opt(r.informative_modulation) + "," +
           opt(r.distractor_modulation) + "\n";
  }
  return out;
}

}  // namespace eleatt
