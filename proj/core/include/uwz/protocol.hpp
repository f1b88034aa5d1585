#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "uwz/hashtest.hpp"
#include "uwz/lattice.hpp"
#include "uwz/model.hpp"
#include "uwz/polar.hpp"

namespace uwz::protocol {

// All constructed code views for one session: the triangular (part j,
// guess k) matrix, 1 <= j <= k <= r. View (j,k) is the part-j code as
// decodable under the round-k guess; round k sends the bits that view
// (j,k) needs beyond view (j,k-1).
struct SessionCodes {
    std::size_t n = 0;
    int ell = 0;
    lattice::Lattice1D lat;
    model::SourceParams src;             // sigma_z2 ignored by the codec
    model::GuessSchedule sched;
    std::vector<model::RoundParams> rp;  // index k-1 holds round k
    std::vector<polar::ConstructionRecord> records;  // row-major triangle

    int rounds() const { return static_cast<int>(rp.size()); }
    std::size_t tri_index(int j, int k) const;
    const polar::ConstructionRecord& at(int j, int k) const;
    polar::CodeChannel channel(int j, int k) const;

    // Payload bit count of round k: increments for parts 1..k-1 plus the
    // diagonal dF of part k.
    std::size_t round_payload_bits(int k) const;
};

struct Round0Hash {
    hashtest::QuantizedHash hash;
};

struct RoundPayload {
    int k = 0;
    std::vector<std::uint8_t> bits;
};

enum class Feedback : std::uint8_t { ACK, NACK };

using Message = std::variant<Round0Hash, RoundPayload, Feedback>;

struct EncoderState {
    std::vector<double> x;
    std::vector<double> a;  // accumulated auxiliary, a sum of lattice points
    int round = 0;
    std::size_t spent_bits = 0;
    std::vector<lattice::BitPlanes> code_planes;  // u-domain planes per part
};

struct DecoderState {
    std::vector<double> y;
    std::vector<double> a_hat;
    int round = 0;
    std::vector<double> x_hat;
    // received[j-1][level][index]: -1 unknown, else the bit
    std::vector<std::vector<std::vector<std::int8_t>>> received;
};

EncoderState make_encoder(std::vector<double> x, std::size_t n);
DecoderState make_decoder(std::vector<double> y, const SessionCodes& codes);

// Algorithm: x_k = x - a_{k-1}; covering over the ell levels; auxiliary
// update a_k = a_{k-1} + x'_{k-1}; payload = increments + diagonal dF.
RoundPayload encoder_round(EncoderState& state, const SessionCodes& codes,
                           std::uint64_t shared_seed, Rng& rng);

// ybar at the round's guess; parts 1..k re-decoded under view (j,k);
// reconstruction and closeness test. A degenerate test reads as NACK.
Feedback decoder_round(DecoderState& state, const SessionCodes& codes,
                       const RoundPayload& payload, std::uint64_t shared_seed,
                       const hashtest::QuantizedHash& hash, const hashtest::HashParams& hp);

struct SessionSeeds {
    std::uint64_t source = 1;
    std::uint64_t encoder = 2;
    std::uint64_t shared = 3;
    std::uint64_t hash_r = 4;
};

struct SessionTranscript {
    int tau = 0;
    std::vector<std::size_t> per_round_bits;
    std::size_t hash_bits = 0;
    std::size_t feedback_bits = 0;  // reported separately, excluded from total_rate
    double total_rate = 0.0;        // (hash_bits + sum payload bits)/N
    double mse = 0.0;               // (1/N)||x - x_hat||^2
    bool success = false;
    std::vector<Message> messages;
};

SessionTranscript run_session(const model::SourceParams& src, const SessionCodes& codes,
                              const hashtest::HashParams& hash_params,
                              const SessionSeeds& seeds, bool keep_messages = false);

} // namespace uwz::protocol
