#include "passifi/sim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "passifi/errors.hpp"
#include "passifi/random.hpp"

namespace passifi {

const ClockSpec& ClockModel::spec_for(const std::string& id) const {
  static const ClockSpec ideal{};
  const auto it = stations.find(id);
  return it == stations.end() ? ideal : it->second;
}

void ClockModel::validate() const {
  const auto check = [](const ClockSpec& s) {
    if (std::abs(s.offset_s) > 0.1) throw DataError("clock offset beyond 100 ms");
    if (std::abs(s.drift_ppm) >= 100.0) throw DataError("clock drift beyond 100 ppm");
  };
  for (const auto& [id, spec] : stations) check(spec);
  check(passive);
}

void ChannelModel::validate() const {
  if (los_jitter_sigma_s < 0.0) throw DataError("jitter sigma must be >= 0");
  if (drop_probability < 0.0 || drop_probability > 1.0)
    throw DataError("drop probability must be in [0, 1]");
  for (const auto& [id, excess] : nlos_excess_m)
    if (excess < 0.0) throw DataError("NLoS excess path must be >= 0: " + id);
}

void SessionConfig::validate() const {
  if (burst_size < 1) throw DataError("burst size must be >= 1");
  if (delta_s <= 0.0) throw DataError("processing time delta must be > 0");
  if (delta_jitter_sigma_s < 0.0) throw DataError("delta jitter sigma must be >= 0");
  if (exchange_spacing_s <= 0.0) throw DataError("exchange spacing must be > 0");
}

double quantize_timestamp(double t_s) {
  return std::ldexp(std::round(std::ldexp(t_s, 52)), -52);
}

namespace {

// Local-clock reading of a true-timeline event. Event jitter lands before the
// drift scale; the quantized reading plus the quantized offset keeps every
// same-clock difference exact.
double record_timestamp(double true_time_s, double jitter_s, const ClockSpec& clock) {
  const double local = (true_time_s + jitter_s) * (1.0 + clock.drift_ppm * 1e-6);
  return quantize_timestamp(local) + quantize_timestamp(clock.offset_s);
}

}  // namespace

BurstResult run_burst(const StationLayout& layout, const Point2D& passive_at,
                      const std::string& responder_id, const SessionConfig& session,
                      const ChannelModel& channel, const ClockModel& clocks, std::uint64_t seed,
                      const PhysicalConstants& k) {
  session.validate();
  channel.validate();
  clocks.validate();
  if (!layout.bounds.contains(passive_at))
    throw std::invalid_argument("passive position outside layout bounds");
  const auto idx = layout.responder_index(responder_id);
  if (!idx) throw std::invalid_argument("unknown responder id: " + responder_id);

  const Point2D r_pos = layout.responders[*idx].position;
  const Point2D i_pos = layout.initiator.position;

  BurstResult out;
  out.burst.responder_id = responder_id;
  out.observation.responder_id = responder_id;

  rng::Engine eng(rng::derive_seed(seed, 0x6275727374ull));  // burst stream

  if (rng::uniform01(eng) < channel.drop_probability) {
    out.burst.dropped = true;
    out.observation.dropped = true;
    return out;
  }

  double excess_m = 0.0;
  if (const auto it = channel.nlos_excess_m.find(responder_id); it != channel.nlos_excess_m.end())
    excess_m = it->second;

  const double tof_ri = (distance(r_pos, i_pos) + excess_m) / k.c;
  const double tof_rp = distance(r_pos, passive_at) / k.c;
  const double tof_ip = distance(i_pos, passive_at) / k.c;

  const ClockSpec& clk_r = clocks.spec_for(responder_id);
  const ClockSpec& clk_i = clocks.spec_for(layout.initiator.id);
  const ClockSpec& clk_p = clocks.passive;
  const double sigma = channel.los_jitter_sigma_s;

  const int n = session.burst_size;
  auto& b = out.burst;
  auto& o = out.observation;
  b.t1.reserve(n), b.t2.reserve(n), b.t3.reserve(n), b.t4.reserve(n);
  b.payload_t1.reserve(n), b.payload_t4.reserve(n);
  o.t1_prime.reserve(n), o.t4_prime.reserve(n);
  o.overheard_payload_t1.reserve(n), o.overheard_payload_t4.reserve(n);

  double last_ftm_emission = 0.0;
  for (int i = 0; i < n; ++i) {
    // true physical event times, burst epoch at zero
    const double ftm_departure = i * session.exchange_spacing_s;
    const double ftm_at_initiator = ftm_departure + tof_ri;
    const double delta_i = session.delta_s + rng::truncated_normal(eng, session.delta_jitter_sigma_s);
    const double ack_departure = ftm_at_initiator + delta_i;
    const double ack_at_responder = ack_departure + tof_ri;
    const double ftm_at_passive = ftm_departure + tof_rp;
    const double ack_at_passive = ack_departure + tof_ip;

    b.t1.push_back(record_timestamp(ftm_departure, rng::truncated_normal(eng, sigma), clk_r));
    b.t2.push_back(record_timestamp(ftm_at_initiator, rng::truncated_normal(eng, sigma), clk_i));
    b.t3.push_back(record_timestamp(ack_departure, rng::truncated_normal(eng, sigma), clk_i));
    b.t4.push_back(record_timestamp(ack_at_responder, rng::truncated_normal(eng, sigma), clk_r));
    o.t1_prime.push_back(record_timestamp(ftm_at_passive, rng::truncated_normal(eng, sigma), clk_p));
    o.t4_prime.push_back(record_timestamp(ack_at_passive, rng::truncated_normal(eng, sigma), clk_p));

    // exchange i's stamps ride in the next FTM frame; the copies are shared
    // between what the initiator decodes and what the passive station overhears
    b.payload_t1.push_back(b.t1.back());
    b.payload_t4.push_back(b.t4.back());
    o.overheard_payload_t1.push_back(b.t1.back());
    o.overheard_payload_t4.push_back(b.t4.back());

    b.frame_log.push_back({responder_id, FrameKind::Ftm, ftm_departure});
    b.frame_log.push_back({layout.initiator.id, FrameKind::Ack, ack_departure});
    last_ftm_emission = ftm_departure;
  }
  // trailing frame that delivers the last exchange's timestamps
  b.frame_log.push_back(
      {responder_id, FrameKind::FtmFinal, last_ftm_emission + session.exchange_spacing_s});

  return out;
}

double active_rtt(const FtmBurstRecord& burst) {
  if (burst.dropped) throw UnheardResponderError("burst dropped: " + burst.responder_id);
  const std::size_t n = burst.t2.size();
  if (n == 0) throw std::invalid_argument("empty burst");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += (burst.payload_t4[i] - burst.payload_t1[i]) - (burst.t3[i] - burst.t2[i]);
  return sum / static_cast<double>(n);
}

double active_distance(double avg_rtt_s, const PhysicalConstants& k) {
  return (0.5 * avg_rtt_s) * k.c;
}

std::vector<BurstResult> run_scan(const StationLayout& layout, const Point2D& passive_at,
                                  const SessionConfig& session, const ChannelModel& channel,
                                  const ClockModel& clocks, std::uint64_t seed,
                                  const PhysicalConstants& k) {
  std::vector<BurstResult> results;
  results.reserve(layout.responders.size());
  for (std::size_t j = 0; j < layout.responders.size(); ++j) {
    results.push_back(run_burst(layout, passive_at, layout.responders[j].id, session, channel,
                                clocks, rng::derive_seed(seed, j + 1), k));
  }
  return results;
}

namespace {

constexpr double kNsPerSecond = 1e9;

nlohmann::json seconds_to_ns_array(const std::vector<double>& values) {
  auto arr = nlohmann::json::array();
  for (double v : values) arr.push_back(v * kNsPerSecond);
  return arr;
}

std::vector<double> ns_array_to_seconds(const nlohmann::json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(v.get<double>() / kNsPerSecond);
  return out;
}

}  // namespace

void write_scans(const std::string& path, const std::vector<ScanRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write scan file: " + path);
  for (const auto& rec : records) {
    nlohmann::json j;
    j["point"] = {{"x", rec.point.x}, {"y", rec.point.y}};
    auto obs = nlohmann::json::array();
    for (const auto& o : rec.observations) {
      if (o.dropped) {
        obs.push_back({{"ap", o.responder_id}, {"dropped", true}});
      } else {
        obs.push_back({{"ap", o.responder_id},
                       {"t1p_ns", seconds_to_ns_array(o.t1_prime)},
                       {"t4p_ns", seconds_to_ns_array(o.t4_prime)},
                       {"payload_t1_ns", seconds_to_ns_array(o.overheard_payload_t1)},
                       {"payload_t4_ns", seconds_to_ns_array(o.overheard_payload_t4)}});
      }
    }
    j["obs"] = obs;
    j["seed"] = rec.seed;
    out << j.dump() << "\n";
  }
}

std::vector<ScanRecord> read_scans(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scan file: " + path);
  std::vector<ScanRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      ScanRecord rec;
      rec.point = {j.at("point").at("x").get<double>(), j.at("point").at("y").get<double>()};
      rec.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& o : j.at("obs")) {
        PassiveObservation obs;
        obs.responder_id = o.at("ap").get<std::string>();
        if (o.value("dropped", false)) {
          obs.dropped = true;
        } else {
          obs.t1_prime = ns_array_to_seconds(o.at("t1p_ns"));
          obs.t4_prime = ns_array_to_seconds(o.at("t4p_ns"));
          obs.overheard_payload_t1 = ns_array_to_seconds(o.at("payload_t1_ns"));
          obs.overheard_payload_t4 = ns_array_to_seconds(o.at("payload_t4_ns"));
        }
        rec.observations.push_back(std::move(obs));
      }
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("scan file " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace passifi
