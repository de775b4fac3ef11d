#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "passifi/adversary.hpp"
#include "passifi/fingerprint.hpp"
#include "passifi/geometry.hpp"
#include "passifi/model.hpp"
#include "passifi/sim.hpp"
#include "passifi/tdoa.hpp"

namespace passifi {

struct ChannelConfig {
  double jitter_sigma_s{1e-9};
  double drop_probability{0.05};
  std::optional<Rect> wall;          // NLoS obstruction; links crossing it get excess path
  double nlos_excess_min_m{3.0};
  double nlos_excess_max_m{10.0};
};

struct ClockConfig {
  double offset_range_s{1e-3};  // per-station offsets drawn uniformly in +/- range
  double drift_ppm{0.0};
};

struct AugmentConfig {
  double sigma_s{1e-9};
  int copies{3};
};

struct ExperimentConfig {
  double grid_spacing_m{1.0};
  int samples_per_point{100};
  double train_split{0.6};  // fraction of reference points used for training
  SessionConfig session;
  ChannelConfig channel;
  ClockConfig clocks;
  AugmentConfig augment;
  ModelConfig model;
  int smoothing_v{100};
  std::uint64_t seed{1};

  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Built-in 50 m x 30 m testbed: 11 responders, initiator at the area center,
// a concrete block west of the initiator that puts five links in NLoS.
StationLayout default_layout();
Rect default_wall();

// Reference points on a cell-centered grid of the given spacing.
std::vector<Point2D> reference_points(const Rect& bounds, double spacing_m);

// Materializes the per-responder NLoS set from wall crossings, with seeded
// excess path lengths in [nlos_excess_min_m, nlos_excess_max_m].
ChannelModel derive_channel(const StationLayout& layout, const ChannelConfig& cfg,
                            std::uint64_t seed);
ClockModel derive_clocks(const StationLayout& layout, const ClockConfig& cfg, std::uint64_t seed);

struct MethodSummary {
  std::size_t samples{0};
  double median_m{0.0};
  double mean_m{0.0};
  double p25{0.0}, p50{0.0}, p75{0.0}, p90{0.0};
  std::vector<std::pair<double, double>> cdf;  // (error_m, cumulative probability)
};

MethodSummary summarize_errors(std::vector<double> errors);

struct EvalReport {
  int smoothing_v{1};
  std::map<std::string, MethodSummary> methods;
  std::optional<double> ratio;  // multilateration median / fingerprint median
};

std::string report_to_json(const EvalReport& report);
void write_cdf_csv(const std::string& path, const MethodSummary& summary);

struct GenResult {
  std::size_t train_points{0};
  std::size_t test_points{0};
  std::size_t train_scans{0};
  std::size_t test_scans{0};
};

// Simulates samples_per_point scans at every reference point and writes the
// point-level train/test split as train.jsonl / test.jsonl plus the layout
// and a manifest into out_dir.
GenResult cmd_gen(const StationLayout& layout, const ExperimentConfig& cfg,
                  const std::string& out_dir);

struct TrainResult {
  std::size_t base_records{0};
  std::size_t augmented_records{0};
  int epochs_trained{0};
  double best_validation_loss{0.0};
};

// Scan records -> features -> augmentation -> normalizer -> training.
// Persists the model (with embedded normalizer) and a JSON loss history.
TrainResult cmd_train(const std::string& scans_path, const StationLayout& layout,
                      const ExperimentConfig& cfg, const std::string& model_path,
                      const std::string& history_path, double train_fraction = 1.0);

// Feeds windows of v consecutive scans per test point through the model and
// the smoothing stage; writes report.json and cdf_fingerprint.csv to out_dir.
EvalReport cmd_eval(const std::string& model_path, const std::string& scans_path,
                    const StationLayout& layout, int smoothing_v, const std::string& out_dir);

// Fingerprint pipeline and hyperbolic multilateration on identical scans,
// same smoothing window for both, plus the median-error ratio.
EvalReport cmd_compare(const std::string& model_path, const std::string& scans_path,
                       const StationLayout& layout, const ExperimentConfig& cfg, int smoothing_v,
                       const std::string& out_dir);

struct AttackReport {
  AttackKind kind{AttackKind::None};
  double active_distance_shift_m{0.0};  // mean over attacked responders
  double lambda_shift_m{0.0};
  bool features_identical{true};
  std::uint64_t feature_hash_attack_free{0};
  std::uint64_t feature_hash_attacked{0};
};

std::string attack_report_to_json(const AttackReport& report);

// Paired attack-free / attacked run on one seeded scan.
AttackReport cmd_attack(const AttackScenario& scenario, const StationLayout& layout,
                        const ExperimentConfig& cfg, const std::string& out_path);

struct SweepRow {
  double value{0.0};
  double median_error_m{0.0};
};

// Re-runs generate/train/eval per parameter value with fixed seeds. Supported
// parameters: hidden_layers, dropout, learning_rate, train_fraction,
// reference_density, n_responders, initiator_index, v.
std::vector<SweepRow> cmd_sweep(const std::string& parameter, const std::vector<double>& values,
                                const StationLayout& layout, const ExperimentConfig& cfg,
                                const std::string& out_csv);

// FNV-1a over the raw bytes of feature values and masks; bitwise fingerprint
// identity check for the tamper-immunity reports.
std::uint64_t feature_hash(std::span<const FeatureVector> features);

}  // namespace passifi
