#include "dlcz/sequencer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fmt/core.h>
#include <numeric>
#include <thread>

#include "dlcz/error.hpp"
#include "dlcz/rng.hpp"

namespace dlcz::sequencer {

namespace {

constexpr std::uint64_t kScanTag = 0x5CA7;
constexpr std::uint64_t kFreeTag = 0xF4EE;
constexpr double kTickResolution = analysis::kDefaultResolution;
constexpr int kJitterGrid = 61;
constexpr double kJitterSpan = 5.0;  // grid covers +-5 sigma

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

std::int64_t to_tick(double t) { return std::llround(t / kTickResolution); }

// One write slot of a trial: its offset from the first write pulse and the
// overlap of its spin-wave at the readout, tabulated over the jitter grid.
struct Slot {
  double offset = 0.0;
  std::vector<double> overlap;
};

// Everything one ensemble needs that is shared by the whole scan point.
struct PointContext {
  const SequenceConfig* config = nullptr;
  const PhysicsSetup* physics = nullptr;
  const StatsSetup* stats = nullptr;
  photon::EmissionModel emission;
  const physics::GradientWaveform* waveform = nullptr;
  const physics::OverlapEvaluator* evaluator = nullptr;
  double readout_time = 0.0;
  int trials = 0;
  double noise_mean = 0.0;
  double jitter_area_slope = 0.0;  // area offset per second of peak shift
  std::vector<Slot> slots;
  std::uint64_t key = 0;
  bool record_clicks = false;
  bool record_trace = false;

  double jitter_step() const { return 2.0 * kJitterSpan * physics->peak_jitter / (kJitterGrid - 1); }

  double slot_overlap(const Slot& slot, double jitter) const {
    if (slot.overlap.size() == 1) return slot.overlap.front();
    const double x = std::clamp((jitter + kJitterSpan * physics->peak_jitter) / jitter_step(), 0.0,
                                static_cast<double>(kJitterGrid - 1));
    const auto i = std::min(static_cast<std::size_t>(x), slot.overlap.size() - 2);
    const double f = x - static_cast<double>(i);
    return (1.0 - f) * slot.overlap[i] + f * slot.overlap[i + 1];
  }

  double efficiency(double overlap, double elapsed) const {
    double eta = physics->eta0 * overlap;
    if (std::isfinite(physics->motional_lifetime)) eta *= std::exp(-elapsed / physics->motional_lifetime);
    return std::clamp(eta, 0.0, 1.0);
  }

  // Spin-wave written `age` before the readout, outside the tabulated slots.
  double carried_efficiency(double creation, double jitter) const {
    const double gamma = waveform->zeeman_coefficient();
    const double area = waveform->area(creation, readout_time) + jitter_area_slope * jitter;
    const double moment = physics->motion == physics::MotionModel::kMovingAtoms
                              ? waveform->first_moment(creation, readout_time)
                              : 0.0;
    const double overlap =
        evaluator->evaluate(gamma * area, gamma * moment, readout_time - creation, false).value;
    return efficiency(overlap, readout_time - creation);
  }
};

struct EnsembleResult {
  photon::CoincidenceStats stats;
  bool heralded = false;
  std::vector<analysis::DetectionRecord> records;
  std::vector<TrialRecord> trace;
};

struct Carried {
  double creation;  // in the frame of the current trial
  int excitations;
};

EnsembleResult simulate_ensemble(const PointContext& ctx, std::uint64_t ensemble_id) {
  const SequenceConfig& cfg = *ctx.config;
  CounterRng rng(ctx.key, ensemble_id);
  EnsembleResult result;
  const double jitter = ctx.physics->peak_jitter > 0.0 ? ctx.physics->peak_jitter * rng.normal() : 0.0;
  const double cycle_start = static_cast<double>(ensemble_id) * cfg.cycle_period();
  const double first_trial = cfg.interrogation_start();

  std::vector<int> numbers(ctx.slots.size());
  std::vector<bool> clicks(ctx.slots.size());
  std::vector<Carried> carried;
  std::vector<photon::SpinWaveReadout> readouts;

  for (int k = 0; k < ctx.trials; ++k) {
    const double trial_time = first_trial + k * cfg.trial_period;
    bool herald = false;
    for (std::size_t s = 0; s < ctx.slots.size(); ++s) {
      numbers[s] = photon::sample_pair_numbers(ctx.emission, rng).spinwave;
      clicks[s] = photon::detect_write(numbers[s], ctx.stats->chain, rng);
      herald = herald || clicks[s];
    }

    TrialRecord* record = nullptr;
    if (ctx.record_trace) {
      record = &result.trace.emplace_back();
      record->ensemble_id = ensemble_id;
      record->trial_index = static_cast<std::uint32_t>(k);
      for (std::size_t s = 0; s < ctx.slots.size(); ++s) {
        const double t = trial_time + ctx.slots[s].offset;
        record->write_times.push_back(t);
        if (clicks[s]) record->write_clicks.push_back({t, static_cast<int>(s)});
      }
    }

    if (!herald) {
      result.stats.add({});
      if (record) record->gradient_events.push_back({trial_time + ctx.slots.back().offset, TrialAction::kCleaning});
      if (cfg.residual_excitation > 0.0) {
        for (Carried& c : carried) c.excitations = photon::thin(c.excitations, cfg.residual_excitation, rng);
        for (std::size_t s = 0; s < ctx.slots.size(); ++s) {
          const int kept = photon::thin(numbers[s], cfg.residual_excitation, rng);
          // creation times are stored relative to trial 0 and shifted at readout
          if (kept > 0) carried.push_back({k * cfg.trial_period + ctx.slots[s].offset, kept});
        }
        std::erase_if(carried, [](const Carried& c) { return c.excitations == 0; });
      }
      continue;
    }

    readouts.clear();
    for (std::size_t s = 0; s < ctx.slots.size(); ++s) {
      if (numbers[s] == 0) continue;
      const double eta = ctx.efficiency(ctx.slot_overlap(ctx.slots[s], jitter),
                                        ctx.readout_time - ctx.slots[s].offset);
      readouts.push_back({numbers[s], eta});
    }
    for (const Carried& c : carried) {
      const double creation = c.creation - k * cfg.trial_period;
      readouts.push_back({c.excitations, ctx.carried_efficiency(creation, jitter)});
    }
    const photon::ReadClicks read = photon::detect_read(readouts, ctx.stats->chain, ctx.noise_mean, rng);
    result.stats.add({true, read.read1, read.read2});
    result.heralded = true;

    const double read_time = trial_time + ctx.readout_time;
    if (record) {
      if (!ctx.waveform->is_off() && ctx.waveform->segments().size() > 0) {
        record->gradient_events.push_back({trial_time + cfg.reversal_latency, TrialAction::kGradientReversal});
      }
      record->gradient_events.push_back({read_time, TrialAction::kReadPulse});
      if (read.read1) record->read_clicks.push_back({read_time, 1});
      if (read.read2) record->read_clicks.push_back({read_time, 2});
    }
    if (ctx.record_clicks) {
      const auto trial = static_cast<std::uint32_t>(k);
      for (std::size_t s = 0; s < ctx.slots.size(); ++s) {
        if (!clicks[s]) continue;
        result.records.push_back({to_tick(cycle_start + trial_time + ctx.slots[s].offset),
                                  analysis::Channel::kWrite, ensemble_id, trial});
      }
      const std::int64_t tick = to_tick(cycle_start + read_time);
      if (read.read1) result.records.push_back({tick, analysis::Channel::kRead1, ensemble_id, trial});
      if (read.read2) result.records.push_back({tick, analysis::Channel::kRead2, ensemble_id, trial});
    }
    break;  // a herald ends the interrogation of this ensemble
  }
  return result;
}

std::uint64_t offsets_tag(std::span<const double> offsets) {
  std::uint64_t tag = offsets.size();
  for (double o : offsets) tag = splitmix64(tag ^ std::bit_cast<std::uint64_t>(o));
  return tag;
}

ScanPoint run_point(const PointContext& ctx, const RunControl& control) {
  ScanPoint point;
  point.readout_time = ctx.readout_time;
  std::uint64_t heralds = 0;
  std::uint64_t next = 0;
  const unsigned threads = std::max(1u, control.threads);
  const std::size_t batch = std::max<std::size_t>(1, control.batch);
  std::vector<EnsembleResult> results(batch);

  while (heralds < control.target_heralds) {
    if (next >= control.max_ensembles) {
      throw Error(ErrorCode::kBudgetExceeded,
                  fmt::format("only {} of {} heralds after {} ensembles at readout time {} s",
                              heralds, control.target_heralds, next, ctx.readout_time));
    }
    const std::size_t count = static_cast<std::size_t>(
        std::min<std::uint64_t>(batch, control.max_ensembles - next));
    auto work = [&](unsigned worker) {
      for (std::size_t i = worker; i < count; i += threads) results[i] = simulate_ensemble(ctx, next + i);
    };
    if (threads == 1 || count == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    }
    for (std::size_t i = 0; i < count && heralds < control.target_heralds; ++i) {
      EnsembleResult& r = results[i];
      point.stats.merge(r.stats);
      ++point.ensembles;
      heralds += r.heralded;
      point.records.insert(point.records.end(), r.records.begin(), r.records.end());
      std::move(r.trace.begin(), r.trace.end(), std::back_inserter(point.trace));
    }
    next += count;
  }
  return point;
}

}  // namespace

// ----------------------------------------------------------------- config

void SequenceConfig::validate() const {
  require(positive(mot_load), "sequence.mot_load must be > 0");
  require(positive(molasses), "sequence.molasses must be > 0");
  require(positive(pumping), "sequence.pumping must be > 0");
  require(positive(interrogation_max), "sequence.interrogation_max must be > 0");
  require(max_trials >= 1, "sequence.max_trials must be >= 1");
  require(positive(trial_period), "sequence.trial_period must be > 0");
  require(positive(reversal_latency), "sequence.reversal_latency must be > 0");
  require(positive(readout_delay), "sequence.readout_delay must be > 0");
  require(positive(repetition_rate), "sequence.repetition_rate must be > 0");
  require(residual_excitation >= 0.0 && residual_excitation <= 1.0,
          "sequence.residual_excitation must be in [0, 1]");
  require(max_trials * trial_period <= interrogation_max * (1.0 + 1e-9),
          "sequence.max_trials * trial_period exceeds interrogation_max");
  require(molasses + pumping + interrogation_max < cycle_period(),
          "molasses, pumping and interrogation do not fit in one repetition period");
}

double SequenceConfig::effective_mot_load() const {
  return std::min(mot_load, cycle_period() - molasses - pumping - interrogation_max);
}

double SequenceConfig::interrogation_start() const {
  return effective_mot_load() + molasses + pumping;
}

int SequenceConfig::trials_per_ensemble(double readout_time) const {
  if (readout_time > interrogation_max) {
    throw_invalid(fmt::format("readout time {} s lies beyond the interrogation window", readout_time));
  }
  const auto fit = static_cast<int>(std::floor((interrogation_max - readout_time) / trial_period + 1e-9)) + 1;
  return std::min(max_trials, fit);
}

void MultiplexPlan::validate() const {
  require(!write_offsets.empty(), "multiplex plan needs at least one write offset");
  require(write_offsets.front() == 0.0, "the first write offset must be 0");
  for (std::size_t i = 1; i < write_offsets.size(); ++i) {
    require(write_offsets[i] > write_offsets[i - 1], "write offsets must be strictly increasing");
  }
  require(background.end > background.begin, "background window must have end > begin");
}

void PhysicsSetup::validate() const {
  ensemble.validate();
  require(positive(wavelength), "wavelength must be > 0");
  require(std::isfinite(crossing_angle) && crossing_angle >= 0.0, "crossing angle must be >= 0");
  require(std::isfinite(gradient_amplitude), "gradient amplitude must be finite");
  require(std::isfinite(coil_tau) && coil_tau >= 0.0, "coil response tau must be >= 0");
  require(std::isfinite(zeeman_coefficient), "zeeman coefficient must be finite");
  require(eta0 > 0.0 && eta0 <= 1.0, "eta0 must be in (0, 1]");
  require(motional_lifetime > 0.0, "motional lifetime must be > 0");
  require(std::isfinite(peak_jitter) && peak_jitter >= 0.0, "peak jitter must be >= 0");
}

physics::SpinWaveMode PhysicsSetup::mode(double creation_time) const {
  return physics::SpinWaveMode::from_geometry(wavelength, crossing_angle, misalignment, creation_time);
}

physics::GradientWaveform PhysicsSetup::waveform(GradientMode mode, double reversal_latency) const {
  switch (mode) {
    case GradientMode::kOff:
      return physics::GradientWaveform::off(zeeman_coefficient);
    case GradientMode::kStatic:
      return physics::GradientWaveform({}, coil_tau, zeeman_coefficient, gradient_amplitude);
    case GradientMode::kReversal:
      return physics::GradientWaveform::reversal(gradient_amplitude, reversal_latency, coil_tau,
                                                 zeeman_coefficient, reversed_ratio);
  }
  throw_invalid("unknown gradient mode");
}

void StatsSetup::validate() const {
  require(p_w > 0.0 && p_w < 1.0, "source.p_w must be in (0, 1)");
  chain.validate();
  noise.validate();
}

photon::EmissionModel StatsSetup::emission() const {
  return photon::emission_for_write_probability(p_w, chain, fock_cutoff);
}

// -------------------------------------------------------------------- runs

double rephasing_time(const SequenceConfig& config, const PhysicsSetup& physics, double creation_time) {
  const physics::GradientWaveform wf = physics.waveform(GradientMode::kReversal, config.reversal_latency);
  return physics::solve_rephasing_time(wf, std::max(creation_time, config.reversal_latency),
                                       config.interrogation_max, creation_time);
}

std::vector<CurvePoint> CurveRun::eta() const {
  std::vector<CurvePoint> curve;
  for (const ScanPoint& p : points) {
    const auto e = p.stats.eta_ret();
    curve.push_back({p.readout_time, e ? e->value : 0.0, e ? e->standard_error : 0.0});
  }
  return curve;
}

std::vector<CurvePoint> CurveRun::coincidence() const {
  std::vector<CurvePoint> curve;
  for (const ScanPoint& p : points) {
    const Estimate e = p.stats.p_wr();
    curve.push_back({p.readout_time, e.value, e.standard_error});
  }
  return curve;
}

photon::CoincidenceStats CurveRun::total() const {
  photon::CoincidenceStats sum;
  for (const ScanPoint& p : points) sum.merge(p.stats);
  return sum;
}

CurveRun run_scan(const SequenceConfig& config, const PhysicsSetup& physics, const StatsSetup& stats,
                  GradientMode mode, std::span<const double> write_offsets,
                  std::span<const double> readout_times, const RunControl& control) {
  config.validate();
  physics.validate();
  stats.validate();
  require(!write_offsets.empty(), "at least one write pulse per trial is required");
  require(!readout_times.empty(), "readout scan is empty");
  require(control.target_heralds >= 1, "target heralds must be >= 1");
  for (std::size_t i = 1; i < write_offsets.size(); ++i) {
    require(write_offsets[i] > write_offsets[i - 1], "write offsets must be strictly increasing");
  }
  for (double t : readout_times) {
    require(t > write_offsets.back(), fmt::format("readout time {} s precedes the last write pulse", t));
  }

  const std::vector<physics::AtomSample> atoms = physics::sample_ensemble(physics.ensemble);
  const physics::OverlapEvaluator evaluator(atoms, physics.mode(0.0), physics.mixture, physics.motion);
  const physics::GradientWaveform waveform = physics.waveform(mode, config.reversal_latency);
  const bool jittered = mode == GradientMode::kReversal && physics.peak_jitter > 0.0;

  PointContext ctx;
  ctx.config = &config;
  ctx.physics = &physics;
  ctx.stats = &stats;
  ctx.emission = stats.emission();
  ctx.waveform = &waveform;
  ctx.evaluator = &evaluator;
  ctx.noise_mean = stats.noise.read_noise_mean(
      1.0 - std::pow(1.0 - stats.chain.write_click_probability(ctx.emission),
                     static_cast<double>(write_offsets.size())));
  ctx.record_clicks = control.record_clicks;
  ctx.record_trace = control.record_trace;
  if (jittered) {
    // a rephasing-time shift dt moves the zero of the area by dt
    const double t_r = rephasing_time(config, physics, 0.0);
    ctx.jitter_area_slope = -waveform.amplitude(t_r);
  }

  CurveRun run;
  for (std::size_t i = 0; i < readout_times.size(); ++i) {
    const double t_read = readout_times[i];
    ctx.readout_time = t_read;
    ctx.trials = config.trials_per_ensemble(t_read);
    ctx.key = derive_key(control.seed, {kScanTag, static_cast<std::uint64_t>(mode),
                                        offsets_tag(write_offsets), std::bit_cast<std::uint64_t>(t_read)});
    ctx.slots.clear();
    for (double offset : write_offsets) {
      Slot slot;
      slot.offset = offset;
      const double gamma = waveform.zeeman_coefficient();
      const double area = waveform.area(offset, t_read);
      const double moment =
          physics.motion == physics::MotionModel::kMovingAtoms ? waveform.first_moment(offset, t_read) : 0.0;
      if (jittered) {
        for (int m = 0; m < kJitterGrid; ++m) {
          const double dt = -kJitterSpan * physics.peak_jitter + m * ctx.jitter_step();
          const double a = area + ctx.jitter_area_slope * dt;
          slot.overlap.push_back(evaluator.evaluate(gamma * a, gamma * moment, t_read - offset, false).value);
        }
      } else {
        slot.overlap.push_back(evaluator.evaluate(gamma * area, gamma * moment, t_read - offset, false).value);
      }
      ctx.slots.push_back(std::move(slot));
    }
    run.points.push_back(run_point(ctx, control));
  }
  return run;
}

CurveRun run_standard_dlcz(const SequenceConfig& config, const PhysicsSetup& physics,
                           const StatsSetup& stats, std::span<const double> storage_times,
                           const RunControl& control) {
  const double offsets[] = {0.0};
  return run_scan(config, physics, stats, GradientMode::kOff, offsets, storage_times, control);
}

CurveRun run_rephasing(const SequenceConfig& config, const PhysicsSetup& physics,
                       const StatsSetup& stats, std::span<const double> readout_scan,
                       const RunControl& control) {
  const double offsets[] = {0.0};
  return run_scan(config, physics, stats, GradientMode::kReversal, offsets, readout_scan, control);
}

std::vector<double> selectivity(std::span<const double> peak_probabilities) {
  require(!peak_probabilities.empty(), "selectivity needs at least one peak");
  double sum = 0.0;
  for (double p : peak_probabilities) {
    require(std::isfinite(p) && p >= 0.0, "peak probabilities must be >= 0");
    sum += p;
  }
  if (sum == 0.0) throw Error(ErrorCode::kInsufficientStatistics, "selectivity: all peak probabilities are zero");
  std::vector<double> s;
  for (double p : peak_probabilities) s.push_back(p / sum);
  return s;
}

MultiplexResult run_multiplex(const SequenceConfig& config, const MultiplexPlan& plan,
                              const PhysicsSetup& physics, const StatsSetup& stats,
                              const RunControl& control) {
  plan.validate();
  require(!plan.readout_scan.empty(), "multiplex readout scan is empty");
  const std::vector<double>& offsets = plan.write_offsets;
  MultiplexResult result;

  for (double offset : offsets) {
    const double single[] = {offset};
    result.peak_times.push_back(rephasing_time(config, physics, offset));
    result.per_write.push_back(
        run_scan(config, physics, stats, GradientMode::kReversal, single, plan.readout_scan, control));
  }
  result.combined = run_scan(config, physics, stats, GradientMode::kReversal, offsets, plan.readout_scan, control);

  // start-stop histograms with the read pulse on each rephasing peak
  RunControl recorded = control;
  recorded.record_clicks = true;
  recorded.record_trace = false;
  const CurveRun at_peaks =
      run_scan(config, physics, stats, GradientMode::kReversal, offsets, result.peak_times, recorded);
  double spacing = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < offsets.size(); ++i) spacing = std::min(spacing, offsets[i] - offsets[i - 1]);
  if (!std::isfinite(spacing)) spacing = 1e-6;
  const analysis::Channel stops[] = {analysis::Channel::kRead1, analysis::Channel::kRead2};

  double mean = 0.0, mean_var = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const ScanPoint& point = at_peaks.points[i];
    PeakSelectivity peak;
    peak.readout_time = point.readout_time;
    // bin k holds delays around readout - offset_k; bins run in increasing delay
    const double lowest = point.readout_time - offsets.back();
    const double begin = lowest - 0.5 * spacing;
    const double end = point.readout_time + 0.5 * spacing;
    peak.histogram = analysis::start_stop_histogram(point.records, analysis::Channel::kWrite, stops, spacing,
                                                    begin, end, analysis::Normalization::kRaw, kTickResolution);
    const double trials = static_cast<double>(point.stats.trials);
    std::vector<double> counts;
    for (double offset : offsets) {
      const double delay = point.readout_time - offset;
      const double c = peak.histogram.sum_between(delay - 0.5 * spacing, delay + 0.5 * spacing);
      counts.push_back(c);
      const double p = c / trials;
      peak.coincidence.push_back({p, std::sqrt(p * (1.0 - p) / trials)});
    }
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total == 0.0) throw Error(ErrorCode::kInsufficientStatistics, "no coincidences in the selectivity bins");
    const double s = selectivity(counts)[i];
    peak.selectivity = {s, std::sqrt(s * (1.0 - s) / total)};
    mean += s;
    mean_var += peak.selectivity.standard_error * peak.selectivity.standard_error;
    result.peaks.push_back(std::move(peak));
  }
  const double k = static_cast<double>(offsets.size());
  result.mean_selectivity = {mean / k, std::sqrt(mean_var) / k};

  // flat-background coincidence ratio, combined over the mean single-write run
  double combined = 0.0, combined_var = 0.0, single = 0.0, single_var = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < plan.readout_scan.size(); ++j) {
    if (!plan.background.contains(plan.readout_scan[j])) continue;
    ++used;
    const Estimate c = result.combined.points[j].stats.p_wr();
    combined += c.value;
    combined_var += c.standard_error * c.standard_error;
    for (const CurveRun& run : result.per_write) {
      const Estimate s1 = run.points[j].stats.p_wr();
      single += s1.value / k;
      single_var += s1.standard_error * s1.standard_error / (k * k);
    }
  }
  if (used == 0) {
    result.background_ratio = {std::nan(""), std::nan("")};
  } else if (single > 0.0 && combined > 0.0) {
    const double ratio = combined / single;
    const double rel = std::sqrt(combined_var / (combined * combined) + single_var / (single * single));
    result.background_ratio = {ratio, ratio * rel};
  } else {
    result.background_ratio = {std::nan(""), std::nan("")};
  }
  return result;
}

photon::CoincidenceStats run_free_trials(const StatsSetup& stats, double eta, std::uint64_t trials,
                                         std::uint64_t seed, unsigned threads) {
  stats.validate();
  require(eta >= 0.0 && eta <= 1.0, "retrieval efficiency must be in [0, 1]");
  const photon::EmissionModel emission = stats.emission();
  const double noise_mean = stats.noise.read_noise_mean(stats.chain.write_click_probability(emission));
  const std::uint64_t key = derive_key(seed, {kFreeTag});
  // fixed blocks of trials, one RNG stream per block
  constexpr std::uint64_t kBlock = 1u << 16;
  const std::uint64_t blocks = (trials + kBlock - 1) / kBlock;
  const unsigned workers = std::max(1u, threads);
  std::vector<photon::CoincidenceStats> partial(blocks);
  auto work = [&](unsigned w) {
    for (std::uint64_t b = w; b < blocks; b += workers) {
      CounterRng rng(key, b);
      const std::uint64_t n = std::min(kBlock, trials - b * kBlock);
      for (std::uint64_t i = 0; i < n; ++i) {
        partial[b].add(photon::detect_trial(photon::sample_pair_numbers(emission, rng), stats.chain, eta,
                                            noise_mean, rng));
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  photon::CoincidenceStats total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace dlcz::sequencer
