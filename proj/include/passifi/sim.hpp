#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "passifi/geometry.hpp"

namespace passifi {

// Reserved id for the listening station. It never appears in a layout and the
// simulator has no code path that emits a frame with this sender; the id
// exists so frame logs can be audited for it.
inline constexpr const char* kPassiveStationId = "passive";

// Per-station clock error: a constant offset plus a linear drift applied as a
// scale on local timestamps.
struct ClockSpec {
  double offset_s{0.0};
  double drift_ppm{0.0};
};

struct ClockModel {
  std::map<std::string, ClockSpec> stations;  // missing id means an ideal clock
  ClockSpec passive;

  const ClockSpec& spec_for(const std::string& id) const;
  // Offsets are capped at 100 ms and |drift| at 100 ppm.
  void validate() const;
};

// Channel impairments. NLoS is a fixed excess path length per responder,
// added on every frame leg between that responder and the initiator.
struct ChannelModel {
  double los_jitter_sigma_s{0.0};            // std-dev of each timestamping event
  std::map<std::string, double> nlos_excess_m;  // responder id -> excess path, meters
  double drop_probability{0.0};              // per responder per scan

  void validate() const;
};

struct SessionConfig {
  int burst_size{8};                   // N, FTM exchanges per burst
  double delta_s{20e-9};               // initiator processing time t3 - t2
  double delta_jitter_sigma_s{0.0};
  double exchange_spacing_s{10e-6};    // gap between consecutive FTM frames

  void validate() const;
};

enum class FrameKind { Ftm, Ack, FtmFinal };

struct FrameEvent {
  std::string sender;
  FrameKind kind;
  double emitted_at_s;  // true timeline, burst epoch at zero
};

// Active-side record of one burst. Timestamps are local-clock readings in
// seconds; payload_t1/payload_t4 are the copies carried inside the next FTM
// frame, i.e. the values an attacker can substitute.
struct FtmBurstRecord {
  std::string responder_id;
  bool dropped{false};
  std::vector<double> t1, t2, t3, t4;
  std::vector<double> payload_t1, payload_t4;
  std::vector<FrameEvent> frame_log;
};

// What the listening station hears: arrival times of the FTM frame and the
// ACK of each exchange, on its own clock, plus the payload copies it decodes.
struct PassiveObservation {
  std::string responder_id;
  bool dropped{false};
  std::vector<double> t1_prime, t4_prime;
  std::vector<double> overheard_payload_t1, overheard_payload_t4;
};

struct BurstResult {
  FtmBurstRecord burst;
  PassiveObservation observation;
};

// Snaps a local-clock reading to an integer multiple of 2^-52 s (~0.22 fs).
// On that grid, additions of clock offsets below one second are exact, so
// differences of same-clock timestamps cancel offsets bit-exactly.
double quantize_timestamp(double t_s);

BurstResult run_burst(const StationLayout& layout, const Point2D& passive_at,
                      const std::string& responder_id, const SessionConfig& session,
                      const ChannelModel& channel, const ClockModel& clocks,
                      std::uint64_t seed, const PhysicalConstants& k = {});

/// Mean over the burst of (t4 - t1) - (t3 - t2), reading t1/t4 from the frame
/// payloads and t2/t3 from the initiator's records. Seconds.
double active_rtt(const FtmBurstRecord& burst);

/// Distance implied by an averaged round-trip time: 0.5 * rtt * c. Meters.
double active_distance(double avg_rtt_s, const PhysicalConstants& k = {});

// One scan = one burst per responder, with per-responder derived seeds.
std::vector<BurstResult> run_scan(const StationLayout& layout, const Point2D& passive_at,
                                  const SessionConfig& session, const ChannelModel& channel,
                                  const ClockModel& clocks, std::uint64_t seed,
                                  const PhysicalConstants& k = {});

// A scan as persisted to disk: the passive side only.
struct ScanRecord {
  Point2D point;  // ground-truth position the scan was taken at
  std::vector<PassiveObservation> observations;
  std::uint64_t seed{0};
};

void write_scans(const std::string& path, const std::vector<ScanRecord>& records);
std::vector<ScanRecord> read_scans(const std::string& path);

}  // namespace passifi
