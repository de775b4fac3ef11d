#include "passifi/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "passifi/errors.hpp"
#include "passifi/random.hpp"
#include "passifi/smoothing.hpp"

namespace passifi {

namespace {

// seed stream tags, one per independent random decision
constexpr std::uint64_t kStreamChannel = 0x6368616eull;
constexpr std::uint64_t kStreamClocks = 0x636c6f63ull;
constexpr std::uint64_t kStreamSplit = 0x73706c69ull;
constexpr std::uint64_t kStreamScans = 0x7363616eull;
constexpr std::uint64_t kStreamAugment = 0x61756776ull;
constexpr std::uint64_t kStreamModel = 0x6d6f646cull;
constexpr std::uint64_t kStreamSubsample = 0x73756273ull;
constexpr std::uint64_t kStreamDropAps = 0x64726f70ull;
constexpr std::uint64_t kStreamAttackPoint = 0x61746b70ull;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (grid_spacing_m <= 0.0) throw DataError("grid spacing must be > 0");
  if (samples_per_point < 1) throw DataError("samples per point must be >= 1");
  if (train_split <= 0.0 || train_split >= 1.0) throw DataError("train split must be in (0, 1)");
  if (smoothing_v < 1 || smoothing_v > 100) throw DataError("smoothing window must be in [1, 100]");
  if (augment.sigma_s < 0.0) throw DataError("augmentation sigma must be >= 0");
  if (augment.copies < 0) throw DataError("augmentation copies must be >= 0");
  if (channel.jitter_sigma_s < 0.0) throw DataError("jitter sigma must be >= 0");
  if (channel.drop_probability < 0.0 || channel.drop_probability > 1.0)
    throw DataError("drop probability must be in [0, 1]");
  if (channel.nlos_excess_min_m < 0.0 || channel.nlos_excess_max_m < channel.nlos_excess_min_m)
    throw DataError("NLoS excess range is invalid");
  session.validate();
  ModelConfig m = model;
  m.input_size = std::max(1, m.input_size);  // the layout supplies the real value later
  m.validate();
}

namespace {

void parse_session(const nlohmann::json& j, SessionConfig& s) {
  s.burst_size = j.value("burst_size", s.burst_size);
  if (j.contains("delta_ns")) s.delta_s = j.at("delta_ns").get<double>() * 1e-9;
  if (j.contains("delta_jitter_ns")) s.delta_jitter_sigma_s = j.at("delta_jitter_ns").get<double>() * 1e-9;
  if (j.contains("exchange_spacing_ns"))
    s.exchange_spacing_s = j.at("exchange_spacing_ns").get<double>() * 1e-9;
}

void parse_channel(const nlohmann::json& j, ChannelConfig& c) {
  if (j.contains("jitter_sigma_ns")) c.jitter_sigma_s = j.at("jitter_sigma_ns").get<double>() * 1e-9;
  c.drop_probability = j.value("drop_probability", c.drop_probability);
  c.nlos_excess_min_m = j.value("nlos_excess_min_m", c.nlos_excess_min_m);
  c.nlos_excess_max_m = j.value("nlos_excess_max_m", c.nlos_excess_max_m);
  if (j.contains("wall")) {
    const auto& w = j.at("wall");
    if (w.is_null()) {
      c.wall.reset();
    } else {
      c.wall = Rect{w.at("x").get<double>(), w.at("y").get<double>(), w.at("w").get<double>(),
                    w.at("h").get<double>()};
    }
  }
}

void parse_model(const nlohmann::json& j, ModelConfig& m) {
  m.hidden_layers = j.value("hidden_layers", m.hidden_layers);
  m.hidden_width = j.value("hidden_width", m.hidden_width);
  m.dropout_rate = j.value("dropout_rate", m.dropout_rate);
  m.learning_rate = j.value("learning_rate", m.learning_rate);
  m.patience = j.value("patience", m.patience);
  m.max_epochs = j.value("max_epochs", m.max_epochs);
  m.batch_size = j.value("batch_size", m.batch_size);
  m.validation_fraction = j.value("validation_fraction", m.validation_fraction);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.grid_spacing_m = j.value("grid_spacing_m", cfg.grid_spacing_m);
    cfg.samples_per_point = j.value("samples_per_point", cfg.samples_per_point);
    cfg.train_split = j.value("train_split", cfg.train_split);
    cfg.smoothing_v = j.value("smoothing_v", cfg.smoothing_v);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("session")) parse_session(j.at("session"), cfg.session);
    if (j.contains("channel")) parse_channel(j.at("channel"), cfg.channel);
    if (j.contains("clocks")) {
      const auto& c = j.at("clocks");
      if (c.contains("offset_range_ms"))
        cfg.clocks.offset_range_s = c.at("offset_range_ms").get<double>() * 1e-3;
      cfg.clocks.drift_ppm = c.value("drift_ppm", cfg.clocks.drift_ppm);
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      if (a.contains("sigma_ns")) cfg.augment.sigma_s = a.at("sigma_ns").get<double>() * 1e-9;
      cfg.augment.copies = a.value("copies", cfg.augment.copies);
    }
    if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

StationLayout default_layout() {
  StationLayout layout;
  layout.bounds = Rect{0.0, 0.0, 50.0, 30.0};
  layout.initiator = Station{"I", {25.0, 15.0}};
  layout.responders = {
      Station{"AP-1", {4.0, 4.0}},   Station{"AP-2", {25.0, 2.0}},
      Station{"AP-3", {46.0, 4.0}},  Station{"AP-4", {4.0, 26.0}},
      Station{"AP-5", {25.0, 28.0}}, Station{"AP-6", {46.0, 26.0}},
      Station{"AP-7", {10.0, 15.0}}, Station{"AP-8", {40.0, 15.0}},
      Station{"AP-9", {17.0, 22.0}}, Station{"AP-10", {33.0, 8.0}},
      Station{"AP-11", {14.0, 8.0}},
  };
  layout.validate();
  return layout;
}

Rect default_wall() {
  return Rect{15.0, 11.0, 6.0, 8.0};
}

std::vector<Point2D> reference_points(const Rect& bounds, double spacing_m) {
  if (spacing_m <= 0.0) throw DataError("grid spacing must be > 0");
  const auto nx = static_cast<std::size_t>(std::floor(bounds.w / spacing_m));
  const auto ny = static_cast<std::size_t>(std::floor(bounds.h / spacing_m));
  std::vector<Point2D> points;
  points.reserve(nx * ny);
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix)
      points.push_back({bounds.x + spacing_m * (0.5 + static_cast<double>(ix)),
                        bounds.y + spacing_m * (0.5 + static_cast<double>(iy))});
  return points;
}

ChannelModel derive_channel(const StationLayout& layout, const ChannelConfig& cfg,
                            std::uint64_t seed) {
  ChannelModel channel;
  channel.los_jitter_sigma_s = cfg.jitter_sigma_s;
  channel.drop_probability = cfg.drop_probability;
  if (cfg.wall) {
    rng::Engine eng(rng::derive_seed(seed, kStreamChannel));
    for (const auto& r : layout.responders) {
      const double excess =
          rng::uniform(eng, cfg.nlos_excess_min_m, cfg.nlos_excess_max_m);
      // one draw per responder keeps the NLoS assignment stable under wall edits
      if (segment_intersects(*cfg.wall, r.position, layout.initiator.position))
        channel.nlos_excess_m[r.id] = excess;
    }
  }
  channel.validate();
  return channel;
}

ClockModel derive_clocks(const StationLayout& layout, const ClockConfig& cfg, std::uint64_t seed) {
  ClockModel clocks;
  rng::Engine eng(rng::derive_seed(seed, kStreamClocks));
  const auto draw = [&]() {
    ClockSpec spec;
    spec.offset_s = rng::uniform(eng, -cfg.offset_range_s, cfg.offset_range_s);
    spec.drift_ppm = cfg.drift_ppm == 0.0 ? 0.0 : rng::uniform(eng, -cfg.drift_ppm, cfg.drift_ppm);
    return spec;
  };
  for (const auto& r : layout.responders) clocks.stations[r.id] = draw();
  clocks.stations[layout.initiator.id] = draw();
  clocks.passive = draw();
  clocks.validate();
  return clocks;
}

MethodSummary summarize_errors(std::vector<double> errors) {
  MethodSummary s;
  s.samples = errors.size();
  if (errors.empty()) return s;
  std::sort(errors.begin(), errors.end());
  const auto percentile = [&](double p) {
    const double h = p * static_cast<double>(errors.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, errors.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return errors[lo] + (errors[hi] - errors[lo]) * frac;
  };
  s.mean_m = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
  s.p25 = percentile(0.25);
  s.p50 = percentile(0.50);
  s.p75 = percentile(0.75);
  s.p90 = percentile(0.90);
  s.median_m = s.p50;
  s.cdf.reserve(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i)
    s.cdf.emplace_back(errors[i],
                       static_cast<double>(i + 1) / static_cast<double>(errors.size()));
  return s;
}

namespace {

nlohmann::json summary_to_json(const MethodSummary& s) {
  return nlohmann::json{{"samples", s.samples}, {"median_m", s.median_m}, {"mean_m", s.mean_m},
                        {"p25", s.p25},        {"p50", s.p50},           {"p75", s.p75},
                        {"p90", s.p90}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["smoothing_v"] = report.smoothing_v;
  nlohmann::json methods;
  for (const auto& [name, summary] : report.methods) methods[name] = summary_to_json(summary);
  j["methods"] = methods;
  if (report.ratio) j["ratio_multilateration_over_fingerprint"] = *report.ratio;
  return j.dump(2) + "\n";
}

void write_cdf_csv(const std::string& path, const MethodSummary& summary) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CDF file: " + path);
  out << "error_m,cumulative_probability\n";
  for (const auto& [error, prob] : summary.cdf)
    out << format_double(error) << "," << format_double(prob) << "\n";
}

namespace {

struct Dataset {
  std::vector<ScanRecord> train;
  std::vector<ScanRecord> test;
  std::size_t train_points{0};
  std::size_t test_points{0};
};

Dataset generate_dataset(const StationLayout& layout, const ExperimentConfig& cfg) {
  layout.validate();
  cfg.validate();
  const auto points = reference_points(layout.bounds, cfg.grid_spacing_m);
  if (points.empty()) throw DataError("grid spacing leaves no reference points");

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  rng::Engine split_eng(rng::derive_seed(cfg.seed, kStreamSplit));
  std::shuffle(order.begin(), order.end(), split_eng);
  const auto n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(cfg.train_split * static_cast<double>(points.size()))));
  std::vector<bool> is_train(points.size(), false);
  for (std::size_t i = 0; i < n_train && i < order.size(); ++i) is_train[order[i]] = true;

  const ChannelModel channel = derive_channel(layout, cfg.channel, cfg.seed);
  const ClockModel clocks = derive_clocks(layout, cfg.clocks, cfg.seed);
  const std::uint64_t scan_root = rng::derive_seed(cfg.seed, kStreamScans);

  Dataset ds;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    auto& sink = is_train[pi] ? ds.train : ds.test;
    (is_train[pi] ? ds.train_points : ds.test_points) += 1;
    for (int si = 0; si < cfg.samples_per_point; ++si) {
      const std::uint64_t scan_seed =
          rng::derive_seed(scan_root, pi * 1000003ull + static_cast<std::uint64_t>(si));
      const auto results = run_scan(layout, points[pi], cfg.session, channel, clocks, scan_seed);
      ScanRecord rec;
      rec.point = points[pi];
      rec.seed = scan_seed;
      rec.observations.reserve(results.size());
      for (const auto& r : results) rec.observations.push_back(r.observation);
      sink.push_back(std::move(rec));
    }
  }
  return ds;
}

std::vector<FingerprintRecord> records_from_scans(std::span<const ScanRecord> scans,
                                                  const StationLayout& layout) {
  std::vector<FingerprintRecord> records;
  records.reserve(scans.size());
  for (const auto& scan : scans) {
    FingerprintRecord rec;
    rec.features = build_feature_vector(scan.observations, layout);
    rec.label = scan.point;
    records.push_back(std::move(rec));
  }
  return records;
}

struct TrainedPipeline {
  TrainedModel model;
  TrainResult stats;
};

TrainedPipeline train_from_scans(std::span<const ScanRecord> scans, const StationLayout& layout,
                                 const ExperimentConfig& cfg, double train_fraction) {
  if (scans.empty()) throw DataError("training scan set is empty");
  if (train_fraction <= 0.0 || train_fraction > 1.0)
    throw DataError("train fraction must be in (0, 1]");

  auto base = records_from_scans(scans, layout);
  if (train_fraction < 1.0) {
    std::vector<std::size_t> order(base.size());
    std::iota(order.begin(), order.end(), 0);
    rng::Engine eng(rng::derive_seed(cfg.seed, kStreamSubsample));
    std::shuffle(order.begin(), order.end(), eng);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(base.size()))));
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<FingerprintRecord> subset;
    subset.reserve(keep);
    for (auto i : order) subset.push_back(std::move(base[i]));
    base = std::move(subset);
  }

  std::vector<FingerprintRecord> all = base;
  const std::uint64_t aug_root = rng::derive_seed(cfg.seed, kStreamAugment);
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto copies = augment(base[i], cfg.augment.sigma_s, cfg.augment.copies,
                          rng::derive_seed(aug_root, i));
    std::move(copies.begin(), copies.end(), std::back_inserter(all));
  }

  const Normalizer nz = fit_normalizer(all);
  for (auto& rec : all) rec.features = normalize(rec.features, nz);

  ModelConfig mcfg = cfg.model;
  mcfg.input_size = static_cast<int>(layout.responders.size());
  mcfg.seed = rng::derive_seed(cfg.seed, kStreamModel);
  TrainedModel model = init_model(mcfg);
  model.feature_min = nz.min_s;
  model.feature_max = nz.max_s;
  model = train(std::move(model), all, mcfg);

  TrainedPipeline out{std::move(model), {}};
  out.stats.base_records = base.size();
  out.stats.augmented_records = all.size() - base.size();
  out.stats.epochs_trained = static_cast<int>(out.model.history.size());
  double best_val = std::numeric_limits<double>::infinity();
  for (const auto& h : out.model.history) best_val = std::min(best_val, h.validation_loss);
  out.stats.best_validation_loss = best_val;
  return out;
}

// Scans grouped by ground-truth point; generation writes them consecutively.
std::vector<std::pair<Point2D, std::vector<const ScanRecord*>>> group_by_point(
    std::span<const ScanRecord> scans) {
  std::vector<std::pair<Point2D, std::vector<const ScanRecord*>>> groups;
  for (const auto& scan : scans) {
    if (groups.empty() || !(groups.back().first == scan.point))
      groups.push_back({scan.point, {}});
    groups.back().second.push_back(&scan);
  }
  return groups;
}

std::vector<double> windowed_errors(const std::vector<Point2D>& estimates, const Point2D& truth,
                                    int v) {
  std::vector<double> errors;
  if (estimates.empty()) return errors;
  const std::size_t window = std::min<std::size_t>(std::max(v, 1), estimates.size());
  for (std::size_t start = 0; start + window <= estimates.size(); start += window) {
    const std::span<const Point2D> chunk(estimates.data() + start, window);
    errors.push_back(distance(smooth(chunk).smoothed, truth));
  }
  return errors;
}

Normalizer model_normalizer(const TrainedModel& model) {
  if (model.feature_min.empty()) throw DataError("model file carries no normalizer");
  return Normalizer{model.feature_min, model.feature_max};
}

std::vector<double> fingerprint_errors(const TrainedModel& model,
                                       std::span<const ScanRecord> scans,
                                       const StationLayout& layout, int v) {
  if (static_cast<int>(layout.responders.size()) != model.config.input_size)
    throw DataError("model input size does not match layout responder count");
  const Normalizer nz = model_normalizer(model);
  std::vector<double> errors;
  for (const auto& [point, group] : group_by_point(scans)) {
    std::vector<Point2D> estimates;
    estimates.reserve(group.size());
    for (const ScanRecord* scan : group) {
      const auto fv = normalize(build_feature_vector(scan->observations, layout), nz);
      estimates.push_back(forward(model, fv.values, ForwardMode::Infer));
    }
    auto errs = windowed_errors(estimates, point, v);
    errors.insert(errors.end(), errs.begin(), errs.end());
  }
  return errors;
}

struct MultilaterationStats {
  std::size_t attempted{0};
  std::size_t solved{0};
  std::size_t skipped_underdetermined{0};
  std::size_t non_converged{0};
};

std::vector<double> multilateration_errors(std::span<const ScanRecord> scans,
                                           const StationLayout& layout, int v,
                                           MultilaterationStats* stats) {
  std::vector<double> errors;
  for (const auto& [point, group] : group_by_point(scans)) {
    std::vector<Point2D> estimates;
    for (const ScanRecord* scan : group) {
      std::vector<TdoaMeasurement> ms;
      for (const auto& obs : scan->observations) {
        if (obs.dropped) continue;
        ms.push_back(compute_tdoa(obs));
      }
      if (stats) ++stats->attempted;
      if (ms.size() < 3) {
        if (stats) ++stats->skipped_underdetermined;
        continue;
      }
      const auto estimate = multilaterate(ms, layout);
      if (!estimate.converged) {
        if (stats) ++stats->non_converged;
        continue;
      }
      if (stats) ++stats->solved;
      estimates.push_back(estimate.point);
    }
    auto errs = windowed_errors(estimates, point, v);
    errors.insert(errors.end(), errs.begin(), errs.end());
  }
  return errors;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return summarize_errors(std::move(values)).median_m;
}

}  // namespace

GenResult cmd_gen(const StationLayout& layout, const ExperimentConfig& cfg,
                  const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Dataset ds = generate_dataset(layout, cfg);
  const auto dir = std::filesystem::path(out_dir);
  write_scans((dir / "train.jsonl").string(), ds.train);
  write_scans((dir / "test.jsonl").string(), ds.test);
  save_layout((dir / "layout.json").string(), layout);

  const ChannelModel channel = derive_channel(layout, cfg.channel, cfg.seed);
  nlohmann::json manifest;
  manifest["seed"] = cfg.seed;
  manifest["grid_spacing_m"] = cfg.grid_spacing_m;
  manifest["samples_per_point"] = cfg.samples_per_point;
  manifest["train_points"] = ds.train_points;
  manifest["test_points"] = ds.test_points;
  manifest["train_scans"] = ds.train.size();
  manifest["test_scans"] = ds.test.size();
  nlohmann::json nlos;
  for (const auto& [id, excess] : channel.nlos_excess_m) nlos[id] = excess;
  manifest["nlos_excess_m"] = nlos;
  std::ofstream mout(dir / "manifest.json");
  if (!mout) throw DataError("cannot write manifest");
  mout << manifest.dump(2) << "\n";

  return GenResult{ds.train_points, ds.test_points, ds.train.size(), ds.test.size()};
}

TrainResult cmd_train(const std::string& scans_path, const StationLayout& layout,
                      const ExperimentConfig& cfg, const std::string& model_path,
                      const std::string& history_path, double train_fraction) {
  const auto scans = read_scans(scans_path);
  auto pipeline = train_from_scans(scans, layout, cfg, train_fraction);
  save_model(model_path, pipeline.model);
  if (!history_path.empty()) {
    nlohmann::json j;
    auto epochs = nlohmann::json::array();
    for (const auto& h : pipeline.model.history)
      epochs.push_back({{"train_loss", h.train_loss}, {"validation_loss", h.validation_loss}});
    j["epochs"] = epochs;
    std::ofstream out(history_path);
    if (!out) throw DataError("cannot write history file: " + history_path);
    out << j.dump(2) << "\n";
  }
  return pipeline.stats;
}

EvalReport cmd_eval(const std::string& model_path, const std::string& scans_path,
                    const StationLayout& layout, int smoothing_v, const std::string& out_dir) {
  const TrainedModel model = load_model(model_path);
  const auto scans = read_scans(scans_path);
  EvalReport report;
  report.smoothing_v = smoothing_v;
  report.methods["fingerprint"] =
      summarize_errors(fingerprint_errors(model, scans, layout, smoothing_v));

  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  write_cdf_csv((dir / "cdf_fingerprint.csv").string(), report.methods.at("fingerprint"));
  std::ofstream out(dir / "report.json");
  if (!out) throw DataError("cannot write report");
  out << report_to_json(report);
  return report;
}

EvalReport cmd_compare(const std::string& model_path, const std::string& scans_path,
                       const StationLayout& layout, const ExperimentConfig& cfg, int smoothing_v,
                       const std::string& out_dir) {
  (void)cfg;
  const TrainedModel model = load_model(model_path);
  const auto scans = read_scans(scans_path);

  EvalReport report;
  report.smoothing_v = smoothing_v;
  report.methods["fingerprint"] =
      summarize_errors(fingerprint_errors(model, scans, layout, smoothing_v));
  MultilaterationStats stats;
  report.methods["multilateration"] =
      summarize_errors(multilateration_errors(scans, layout, smoothing_v, &stats));

  const double fp = report.methods.at("fingerprint").median_m;
  const double mult = report.methods.at("multilateration").median_m;
  if (fp > 0.0 && report.methods.at("multilateration").samples > 0) report.ratio = mult / fp;

  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  write_cdf_csv((dir / "cdf_fingerprint.csv").string(), report.methods.at("fingerprint"));
  write_cdf_csv((dir / "cdf_multilateration.csv").string(), report.methods.at("multilateration"));
  std::ofstream out(dir / "report.json");
  if (!out) throw DataError("cannot write report");
  out << report_to_json(report);
  return report;
}

std::uint64_t feature_hash(std::span<const FeatureVector> features) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  const auto mix_bytes = [&hash](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ull;
    }
  };
  for (const auto& fv : features) {
    mix_bytes(fv.values.data(), fv.values.size() * sizeof(double));
    mix_bytes(fv.mask.data(), fv.mask.size());
  }
  return hash;
}

std::string attack_report_to_json(const AttackReport& report) {
  nlohmann::json j;
  switch (report.kind) {
    case AttackKind::None: j["kind"] = "none"; break;
    case AttackKind::FtmPayloadSpoof: j["kind"] = "ftm-payload-spoof"; break;
    case AttackKind::AckPowerSpoof: j["kind"] = "ack-power-spoof"; break;
  }
  j["active_distance_shift_m"] = report.active_distance_shift_m;
  j["lambda_rtt_shift_m"] = report.lambda_shift_m;
  j["fingerprint_features_identical"] = report.features_identical;
  j["feature_hash_attack_free"] = report.feature_hash_attack_free;
  j["feature_hash_attacked"] = report.feature_hash_attacked;
  return j.dump(2) + "\n";
}

AttackReport cmd_attack(const AttackScenario& scenario, const StationLayout& layout,
                        const ExperimentConfig& cfg, const std::string& out_path) {
  scenario.validate();
  layout.validate();
  const ChannelModel channel = derive_channel(layout, cfg.channel, cfg.seed);
  const ClockModel clocks = derive_clocks(layout, cfg.clocks, cfg.seed);

  rng::Engine point_eng(rng::derive_seed(cfg.seed, kStreamAttackPoint));
  const Point2D at{rng::uniform(point_eng, layout.bounds.x, layout.bounds.x + layout.bounds.w),
                   rng::uniform(point_eng, layout.bounds.y, layout.bounds.y + layout.bounds.h)};

  const auto attack_free = run_scan(layout, at, cfg.session, channel, clocks, cfg.seed);
  std::vector<BurstResult> attacked;
  attacked.reserve(attack_free.size());
  for (const auto& r : attack_free) attacked.push_back(apply_attack(r, scenario));

  AttackReport report;
  report.kind = scenario.kind;
  double distance_shift_sum = 0.0, lambda_shift_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t j = 0; j < attack_free.size(); ++j) {
    const auto& free = attack_free[j];
    const auto& att = attacked[j];
    if (free.burst.dropped || !scenario.targets(free.burst.responder_id)) continue;
    distance_shift_sum +=
        active_distance(active_rtt(att.burst)) - active_distance(active_rtt(free.burst));
    lambda_shift_sum +=
        lambda_rtt(compute_tdoa(att.observation)) - lambda_rtt(compute_tdoa(free.observation));
    ++counted;
  }
  if (counted > 0) {
    report.active_distance_shift_m = distance_shift_sum / static_cast<double>(counted);
    report.lambda_shift_m = lambda_shift_sum / static_cast<double>(counted);
  }

  std::vector<PassiveObservation> free_obs, att_obs;
  for (const auto& r : attack_free) free_obs.push_back(r.observation);
  for (const auto& r : attacked) att_obs.push_back(r.observation);
  const std::vector<FeatureVector> free_features{build_feature_vector(free_obs, layout)};
  const std::vector<FeatureVector> att_features{build_feature_vector(att_obs, layout)};
  report.feature_hash_attack_free = feature_hash(free_features);
  report.feature_hash_attacked = feature_hash(att_features);
  report.features_identical = report.feature_hash_attack_free == report.feature_hash_attacked;

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write attack report: " + out_path);
    out << attack_report_to_json(report);
  }
  return report;
}

namespace {

Dataset drop_responders(const Dataset& ds, const StationLayout& layout, int keep,
                        std::uint64_t seed) {
  const int n = static_cast<int>(layout.responders.size());
  if (keep < 1 || keep > n) throw DataError("responder count out of range for this layout");
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng::Engine eng(rng::derive_seed(seed, kStreamDropAps));
  std::shuffle(order.begin(), order.end(), eng);
  std::set<std::string> dropped_ids;
  for (int i = keep; i < n; ++i) dropped_ids.insert(layout.responders[order[static_cast<std::size_t>(i)]].id);

  Dataset out = ds;
  const auto blank_dropped = [&](std::vector<ScanRecord>& scans) {
    for (auto& scan : scans)
      for (auto& obs : scan.observations)
        if (dropped_ids.count(obs.responder_id)) {
          PassiveObservation blank;
          blank.responder_id = obs.responder_id;
          blank.dropped = true;
          obs = std::move(blank);
        }
  };
  blank_dropped(out.train);
  blank_dropped(out.test);
  return out;
}

Dataset subsample_train_points(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) throw DataError("reference density must be in (0, 1]");
  Dataset out = ds;
  auto groups = group_by_point(ds.train);
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  rng::Engine eng(rng::derive_seed(seed, kStreamSubsample));
  std::shuffle(order.begin(), order.end(), eng);
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(groups.size()))));
  order.resize(keep);
  std::sort(order.begin(), order.end());
  out.train.clear();
  for (auto gi : order)
    for (const ScanRecord* scan : groups[gi].second) out.train.push_back(*scan);
  out.train_points = keep;
  return out;
}

}  // namespace

std::vector<SweepRow> cmd_sweep(const std::string& parameter, const std::vector<double>& values,
                                const StationLayout& layout, const ExperimentConfig& cfg,
                                const std::string& out_csv) {
  if (values.empty()) throw DataError("sweep needs at least one value");
  const bool needs_base_dataset = parameter != "initiator_index";
  Dataset base;
  if (needs_base_dataset) base = generate_dataset(layout, cfg);

  std::vector<SweepRow> rows;
  for (const double value : values) {
    ExperimentConfig run_cfg = cfg;
    StationLayout run_layout = layout;
    Dataset ds;

    if (parameter == "hidden_layers") {
      run_cfg.model.hidden_layers = static_cast<int>(value);
      ds = base;
    } else if (parameter == "dropout") {
      run_cfg.model.dropout_rate = value;
      ds = base;
    } else if (parameter == "learning_rate") {
      run_cfg.model.learning_rate = value;
      ds = base;
    } else if (parameter == "train_fraction") {
      ds = base;
    } else if (parameter == "reference_density") {
      ds = subsample_train_points(base, value, cfg.seed);
    } else if (parameter == "n_responders") {
      ds = drop_responders(base, layout, static_cast<int>(value), cfg.seed);
    } else if (parameter == "v") {
      ds = base;
    } else if (parameter == "initiator_index") {
      const auto idx = static_cast<std::size_t>(value);
      if (idx >= layout.responders.size()) throw DataError("initiator index out of range");
      run_layout.initiator = layout.responders[idx];
      run_layout.responders.clear();
      for (std::size_t i = 0; i < layout.responders.size(); ++i)
        if (i != idx) run_layout.responders.push_back(layout.responders[i]);
      run_layout.validate();
      ds = generate_dataset(run_layout, run_cfg);
    } else {
      throw std::invalid_argument("unknown sweep parameter: " + parameter);
    }

    const double train_fraction = parameter == "train_fraction" ? value : 1.0;
    const int v = parameter == "v" ? static_cast<int>(value) : cfg.smoothing_v;
    const auto pipeline = train_from_scans(ds.train, run_layout, run_cfg, train_fraction);
    const auto errors = fingerprint_errors(pipeline.model, ds.test, run_layout, v);
    rows.push_back(SweepRow{value, median_of(errors)});
  }

  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw DataError("cannot write sweep CSV: " + out_csv);
    out << "value,median_error_m\n";
    for (const auto& row : rows)
      out << format_double(row.value) << "," << format_double(row.median_error_m) << "\n";
  }
  return rows;
}

}  // namespace passifi
