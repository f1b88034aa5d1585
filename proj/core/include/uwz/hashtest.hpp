#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace uwz::hashtest {

// Quantized random-projection closeness test. One projection matrix R
// (N x m, iid standard normal, derived from seed_r) is shared per session.
struct HashParams {
    std::size_t m = 0;     // projection count
    int q = 0;             // quantizer levels over [-T, T]
    double t_range = 0.0;  // clipping bound T
    std::uint64_t seed_r = 0;

    int bits_per_entry() const;  // ceil(log2(q+1)), the erasure symbol included
};

// T = 4 sigma_x sqrt(N); q the smallest integer with 6T^2/(q-1)^2 <= N Delta.
HashParams choose_hash_params(std::size_t n, double delta, double sigma_x2, std::size_t m,
                              std::uint64_t seed_r = 0);

// Level index for v in [-T, T] (v = T clamps to the top level), nullopt
// outside the range.
std::optional<int> quantize(double v, const HashParams& p);

double level_value(int index, const HashParams& p);

struct QuantizedHash {
    std::vector<int> values;  // level index, or -1 for the overflow symbol
};

// R^T x, column i of R generated from (seed_r, i).
std::vector<double> project(const std::vector<double>& x, std::size_t m, std::uint64_t seed_r);

QuantizedHash make_hash(const std::vector<double>& x, const HashParams& p);

enum class Verdict : std::uint8_t { ACK, NACK };

struct TestResult {
    Verdict verdict = Verdict::NACK;
    double gamma = 0.0;
    std::size_t m_used = 0;  // non-overflow entries
};

// gamma = (1/m') sum over non-overflow entries of
// (level_value(hash_i) - xhat_proj_i)^2; ACK iff gamma <= 2.84 N Delta.
// All entries overflowed -> TestDegenerate.
TestResult closeness_core(const QuantizedHash& hash, const std::vector<double>& xhat_proj,
                          const HashParams& p, std::size_t n, double delta);

TestResult closeness_test(const QuantizedHash& hash, const std::vector<double>& x_hat,
                          const HashParams& p, double delta);

// m entries of bits_per_entry() bits each, overflow encoded as value q,
// big-endian within and across bytes.
std::vector<std::uint8_t> serialize_hash(const QuantizedHash& hash, const HashParams& p);
QuantizedHash deserialize_hash(const std::vector<std::uint8_t>& bytes, const HashParams& p);

std::size_t hash_bits(const HashParams& p);  // m * bits_per_entry

} // namespace uwz::hashtest
