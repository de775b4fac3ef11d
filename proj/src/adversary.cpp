#include "passifi/adversary.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "passifi/errors.hpp"

namespace passifi {

bool AttackScenario::targets(const std::string& responder_id) const {
  return target_responders.empty() || target_responders.count(responder_id) > 0;
}

void AttackScenario::validate() const {
  if (!std::isfinite(t1_offset_s) || !std::isfinite(t4_offset_s))
    throw DataError("attack offsets must be finite");
  if (kind == AttackKind::None && (t1_offset_s != 0.0 || t4_offset_s != 0.0))
    throw DataError("a no-attack scenario must carry zero offsets");
}

namespace {

AttackKind kind_from_string(const std::string& s) {
  if (s == "none") return AttackKind::None;
  if (s == "ftm-payload-spoof") return AttackKind::FtmPayloadSpoof;
  if (s == "ack-power-spoof") return AttackKind::AckPowerSpoof;
  throw DataError("unknown attack kind: " + s);
}

}  // namespace

AttackScenario parse_scenario(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario parse error: ") + e.what());
  }
  AttackScenario s;
  try {
    s.kind = kind_from_string(j.at("kind").get<std::string>());
    s.t1_offset_s = quantize_timestamp(j.value("t1_offset_ns", 0.0) * 1e-9);
    s.t4_offset_s = quantize_timestamp(j.value("t4_offset_ns", 0.0) * 1e-9);
    if (j.contains("targets"))
      for (const auto& t : j.at("targets")) s.target_responders.insert(t.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario field error: ") + e.what());
  }
  s.validate();
  return s;
}

AttackScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::pair<FtmBurstRecord, PassiveObservation> spoof_ftm_payload(FtmBurstRecord burst,
                                                                PassiveObservation obs,
                                                                const AttackScenario& scenario) {
  if (scenario.kind != AttackKind::FtmPayloadSpoof)
    throw std::invalid_argument("scenario is not an FTM payload spoof");
  if (burst.dropped || !scenario.targets(burst.responder_id)) return {std::move(burst), std::move(obs)};
  for (auto& v : burst.payload_t1) v += scenario.t1_offset_s;
  for (auto& v : burst.payload_t4) v += scenario.t4_offset_s;
  for (auto& v : obs.overheard_payload_t1) v += scenario.t1_offset_s;
  for (auto& v : obs.overheard_payload_t4) v += scenario.t4_offset_s;
  return {std::move(burst), std::move(obs)};
}

FtmBurstRecord spoof_ack_power(FtmBurstRecord burst, const AttackScenario& scenario) {
  if (scenario.kind != AttackKind::AckPowerSpoof)
    throw std::invalid_argument("scenario is not an ACK power spoof");
  if (burst.dropped || !scenario.targets(burst.responder_id)) return burst;
  for (auto& v : burst.t4) v += scenario.t4_offset_s;
  for (auto& v : burst.payload_t4) v += scenario.t4_offset_s;
  return burst;
}

BurstResult apply_attack(BurstResult result, const AttackScenario& scenario) {
  switch (scenario.kind) {
    case AttackKind::None:
      return result;
    case AttackKind::FtmPayloadSpoof: {
      auto [burst, obs] =
          spoof_ftm_payload(std::move(result.burst), std::move(result.observation), scenario);
      return BurstResult{std::move(burst), std::move(obs)};
    }
    case AttackKind::AckPowerSpoof: {
      result.burst = spoof_ack_power(std::move(result.burst), scenario);
      if (!result.observation.dropped)
        result.observation.overheard_payload_t4 = result.burst.payload_t4;
      return result;
    }
  }
  return result;
}

SilenceReport assert_passive_silence(std::span<const FrameEvent> frame_log) {
  SilenceReport report;
  report.frames_scanned = frame_log.size();
  for (const auto& f : frame_log)
    if (f.sender == kPassiveStationId) ++report.passive_frames;
  return report;
}

SilenceReport assert_passive_silence(std::span<const FtmBurstRecord> bursts) {
  SilenceReport report;
  for (const auto& b : bursts) {
    const auto r = assert_passive_silence(std::span<const FrameEvent>(b.frame_log));
    report.frames_scanned += r.frames_scanned;
    report.passive_frames += r.passive_frames;
  }
  return report;
}

}  // namespace passifi
