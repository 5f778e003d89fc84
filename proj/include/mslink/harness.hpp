#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mslink/config.hpp"

namespace mslink::harness {

struct BerRecord {
    double snr_db = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    double ber = 0.0;
    std::uint64_t sync_failures = 0; // frames counted as fully errored

    friend bool operator==(const BerRecord&, const BerRecord&) = default;
};

/// Transmitter-side model resolved from a config: the four symbol points and
/// the surface aggregate applied on top of them.
struct LinkModel {
    tx::Constellation constellation;
    array::ArrayConfig surface;
    int sps = 1;
};

LinkModel build_link_model(const ExperimentConfig& cfg);

/// base_seed + point_index * 2^20 + frame_index
std::uint64_t frame_seed(std::uint64_t base_seed, std::size_t point_index, std::size_t frame_index);

/// Channel SNR (Es/N0) for a sweep value on the configured axis.
double channel_snr_db(const ExperimentConfig& cfg, double sweep_value);

struct FrameOutcome {
    std::uint64_t errors = 0;
    bool sync_failed = false;
    rx::RxResult rx;
    Bits payload;
    tx::Frame frame;
};

/// One seeded frame through transmitter, surface, channel and receiver.
FrameOutcome simulate_frame(const ExperimentConfig& cfg, const LinkModel& model, double sweep_value,
                            std::uint64_t seed);

std::vector<BerRecord> run_ber_sweep(const ExperimentConfig& cfg);

struct Comparison {
    std::vector<BerRecord> a;
    std::vector<BerRecord> b;
    double gap_db = 0.0; // SNR of b minus SNR of a at the target BER
};

/// SNR where the curve reaches target_ber, log-linear between neighbouring
/// points. Zero-error points count as 0.5 / bits.
double snr_at_ber(const std::vector<BerRecord>& curve, double target_ber);

Comparison compare_architectures(const ExperimentConfig& a, const ExperimentConfig& b);

/// Q(sqrt(2 Eb/N0)).
double theoretical_qpsk_ber(double ebn0_db);

void write_ber_csv(std::ostream& os, const std::vector<BerRecord>& records);

struct StreamHeader {
    double sample_rate_hz = 0.0;
    int samples_per_symbol = 1;
    std::size_t frames = 0;
    std::size_t pad_bits = 0;
    std::uint64_t pilot_seed = 0;
    std::uint64_t payload_bits = 0;

    friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

std::string header_path_for(const std::string& iq_path);
void write_stream_header(const std::string& path, const StreamHeader& h);
StreamHeader read_stream_header(const std::string& path);

/// Frames the file, synthesizes it with the config's link model, applies the
/// channel once to the whole stream and writes float32 IQ plus `<out>.hdr`.
StreamHeader transmit_file(const std::string& in_path, const std::string& out_path,
                           const ExperimentConfig& cfg, const channel::ChannelConfig& channel);

/// Decodes an IQ stream frame by frame and writes the recovered bytes.
/// Throws PartialOutputError after writing every frame decoded before the
/// failing one.
void receive_file(const std::string& iq_path, const std::string& header_path, const std::string& out_path,
                  const rx::RxOptions& options = {});

CVec read_iq(const std::string& path);
void write_iq(const std::string& path, const CVec& samples);

} // namespace mslink::harness
