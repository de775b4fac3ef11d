#pragma once

#include <set>
#include <span>
#include <string>
#include <utility>

#include "passifi/sim.hpp"

namespace passifi {

enum class AttackKind { None, FtmPayloadSpoof, AckPowerSpoof };

// A record-level attack on simulated sessions. Offsets are quantized to the
// timestamp grid on construction so the induced shifts are exact.
// An empty target set attacks every responder.
struct AttackScenario {
  AttackKind kind{AttackKind::None};
  double t1_offset_s{0.0};
  double t4_offset_s{0.0};
  std::set<std::string> target_responders;

  bool targets(const std::string& responder_id) const;
  void validate() const;  // kind == None requires zero offsets
};

AttackScenario parse_scenario(const std::string& json_text);
AttackScenario load_scenario(const std::string& path);

/// Substitutes falsified t1/t4 payload values in the FTM frames: both the
/// copy the initiator reads and the copy the passive station overhears move;
/// locally recorded event times do not.
std::pair<FtmBurstRecord, PassiveObservation> spoof_ftm_payload(FtmBurstRecord burst,
                                                                PassiveObservation obs,
                                                                const AttackScenario& scenario);

/// A stronger spoofed ACK captures the responder's arrival detector: the
/// recorded t4 (and the payload copy derived from it) shifts. The passive
/// station's own records are untouched.
FtmBurstRecord spoof_ack_power(FtmBurstRecord burst, const AttackScenario& scenario);

/// Applies a scenario to a simulated burst pair. The frame payload is one
/// physical value, so whatever copy ends up on air is what the passive
/// station decodes; its recorded arrival times never move.
BurstResult apply_attack(BurstResult result, const AttackScenario& scenario);

struct SilenceReport {
  std::size_t passive_frames{0};
  std::size_t frames_scanned{0};
};

/// Counts frames whose sender is the passive station. Must report zero for
/// any pipeline run; the simulator has no transmit path for that station.
SilenceReport assert_passive_silence(std::span<const FrameEvent> frame_log);
SilenceReport assert_passive_silence(std::span<const FtmBurstRecord> bursts);

}  // namespace passifi
