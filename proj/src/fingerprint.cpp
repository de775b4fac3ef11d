#include "passifi/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "passifi/errors.hpp"
#include "passifi/random.hpp"
#include "passifi/tdoa.hpp"

namespace passifi {

namespace {
constexpr double kNsPerSecond = 1e9;
}

double canonical_seconds(double t_s) {
  return (t_s * kNsPerSecond) / kNsPerSecond;
}

FeatureVector build_feature_vector(std::span<const PassiveObservation> observations,
                                   const StationLayout& layout) {
  const std::size_t n = layout.responders.size();
  FeatureVector fv;
  fv.values.assign(n, canonical_seconds(kUnheardFillSeconds));
  fv.mask.assign(n, 0);
  for (const auto& obs : observations) {
    const auto idx = layout.responder_index(obs.responder_id);
    if (!idx) throw DataError("observation for responder not in layout: " + obs.responder_id);
    if (obs.dropped) continue;
    fv.values[*idx] = canonical_seconds(compute_tdoa(obs).tdoa_s);
    fv.mask[*idx] = 1;
  }
  return fv;
}

Normalizer fit_normalizer(std::span<const FingerprintRecord> training) {
  if (training.empty()) throw DataError("cannot fit a normalizer on an empty set");
  const std::size_t n = training.front().features.values.size();
  Normalizer nz;
  nz.min_s.assign(n, std::numeric_limits<double>::infinity());
  nz.max_s.assign(n, -std::numeric_limits<double>::infinity());
  for (const auto& rec : training) {
    if (rec.features.values.size() != n)
      throw DataError("inconsistent feature length in training set");
    for (std::size_t j = 0; j < n; ++j) {
      nz.min_s[j] = std::min(nz.min_s[j], rec.features.values[j]);
      nz.max_s[j] = std::max(nz.max_s[j], rec.features.values[j]);
    }
  }
  return nz;
}

FeatureVector normalize(const FeatureVector& fv, const Normalizer& nz) {
  if (fv.values.size() != nz.min_s.size() || nz.min_s.size() != nz.max_s.size())
    throw DataError("feature/normalizer length mismatch");
  FeatureVector out;
  out.values.reserve(fv.values.size());
  out.mask = fv.mask;
  for (std::size_t j = 0; j < fv.values.size(); ++j) {
    const double span = nz.max_s[j] - nz.min_s[j];
    if (span == 0.0) {
      out.values.push_back(0.5);
    } else {
      out.values.push_back(std::clamp((fv.values[j] - nz.min_s[j]) / span, 0.0, 1.0));
    }
  }
  return out;
}

std::vector<FingerprintRecord> augment(const FingerprintRecord& record, double sigma_s, int copies,
                                       std::uint64_t seed) {
  if (sigma_s < 0.0) throw std::invalid_argument("augmentation sigma must be >= 0");
  if (copies < 0) throw std::invalid_argument("augmentation copies must be >= 0");
  std::vector<FingerprintRecord> out;
  out.reserve(static_cast<std::size_t>(copies));
  rng::Engine eng(rng::derive_seed(seed, 0x617567ull));
  for (int c = 0; c < copies; ++c) {
    FingerprintRecord copy = record;
    copy.augmented = true;
    for (std::size_t j = 0; j < copy.features.values.size(); ++j) {
      if (!copy.features.mask[j]) continue;  // fills stay at 200 ns
      copy.features.values[j] =
          canonical_seconds(copy.features.values[j] + sigma_s * rng::normal(eng));
    }
    out.push_back(std::move(copy));
  }
  return out;
}

void write_dataset(const std::string& path, std::span<const FingerprintRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (const auto& rec : records) {
    nlohmann::json j;
    j["x"] = rec.label.x;
    j["y"] = rec.label.y;
    auto tdoa = nlohmann::json::array();
    for (double v : rec.features.values) tdoa.push_back(v * kNsPerSecond);
    j["tdoa_ns"] = tdoa;
    auto mask = nlohmann::json::array();
    for (auto m : rec.features.mask) mask.push_back(m != 0);
    j["mask"] = mask;
    j["aug"] = rec.augmented;
    out << j.dump() << "\n";
  }
}

std::vector<FingerprintRecord> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<FingerprintRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FingerprintRecord rec;
      rec.label = {j.at("x").get<double>(), j.at("y").get<double>()};
      rec.augmented = j.at("aug").get<bool>();
      for (const auto& v : j.at("tdoa_ns"))
        rec.features.values.push_back(v.get<double>() / kNsPerSecond);
      for (const auto& m : j.at("mask"))
        rec.features.mask.push_back(m.get<bool>() ? 1 : 0);
      if (rec.features.values.size() != rec.features.mask.size())
        throw DataError("tdoa_ns and mask lengths differ");
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset " + path + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("dataset " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace passifi
