#include "uwz/protocol.hpp"

#include <cmath>

#include "uwz/errors.hpp"

namespace uwz::protocol {

std::size_t SessionCodes::tri_index(int j, int k) const {
    if (j < 1 || k < j || k > rounds())
        throw InvalidParameter("SessionCodes: bad (part, guess) pair");
    // records ordered (1,1),(1,2),...,(1,r),(2,2),...: row j starts after
    // the first j-1 rows of lengths r, r-1, ...
    const int r = rounds();
    std::size_t base = 0;
    for (int row = 1; row < j; ++row) base += static_cast<std::size_t>(r - row + 1);
    return base + static_cast<std::size_t>(k - j);
}

const polar::ConstructionRecord& SessionCodes::at(int j, int k) const {
    return records.at(tri_index(j, k));
}

polar::CodeChannel SessionCodes::channel(int j, int k) const {
    const auto& rpj = rp.at(static_cast<std::size_t>(j - 1));
    const auto& rpk = rp.at(static_cast<std::size_t>(k - 1));
    polar::CodeChannel chan;
    chan.prior = lattice::make_dg(lat, std::sqrt(rpj.var_part));
    chan.enc_noise_var = rpj.var_t;
    chan.dec_noise_var = rpj.var_t + rpk.var_zprime;
    return chan;
}

std::size_t SessionCodes::round_payload_bits(int k) const {
    std::size_t bits = at(k, k).sets.df_count();
    for (int j = 1; j < k; ++j) {
        const auto& prev = at(j, k - 1).sets;
        const auto& cur = at(j, k).sets;
        for (int i = 0; i < ell; ++i) {
            const auto& p = prev.levels[static_cast<std::size_t>(i)];
            const auto& c = cur.levels[static_cast<std::size_t>(i)];
            for (std::size_t idx = 0; idx < n; ++idx)
                if (p.i2[idx] && !c.i2[idx]) ++bits;
        }
    }
    return bits;
}

EncoderState make_encoder(std::vector<double> x, std::size_t n) {
    if (x.size() != n) throw InvalidParameter("make_encoder: source length mismatch");
    EncoderState st;
    st.x = std::move(x);
    st.a.assign(n, 0.0);
    return st;
}

DecoderState make_decoder(std::vector<double> y, const SessionCodes& codes) {
    if (y.size() != codes.n) throw InvalidParameter("make_decoder: side info length mismatch");
    DecoderState st;
    st.y = std::move(y);
    st.a_hat.assign(codes.n, 0.0);
    st.received.assign(static_cast<std::size_t>(codes.rounds()),
                       std::vector<std::vector<std::int8_t>>(
                           static_cast<std::size_t>(codes.ell),
                           std::vector<std::int8_t>(codes.n, -1)));
    return st;
}

namespace {

std::vector<double> planes_to_lattice_point(const lattice::BitPlanes& u_planes,
                                            const lattice::Lattice1D& lat) {
    lattice::BitPlanes x_planes;
    x_planes.ell = u_planes.ell;
    x_planes.n = u_planes.n;
    x_planes.planes.resize(u_planes.planes.size());
    for (int i = 0; i < u_planes.ell; ++i) {
        std::vector<std::uint8_t> row(u_planes.row(i), u_planes.row(i) + u_planes.n);
        auto x = polar::transform(std::move(row));
        std::copy(x.begin(), x.end(), x_planes.row(i));
    }
    return lattice::planes_to_point(x_planes, lat);
}

} // namespace

RoundPayload encoder_round(EncoderState& state, const SessionCodes& codes,
                           std::uint64_t shared_seed, Rng& rng) {
    const int k = state.round + 1;
    if (k > codes.rounds())
        throw SessionExhausted("encoder_round: schedule exhausted after round " +
                               std::to_string(codes.rounds()));
    const std::size_t n = codes.n;

    std::vector<double> x_k(n);
    for (std::size_t i = 0; i < n; ++i) x_k[i] = state.x[i] - state.a[i];

    const auto& diag = codes.at(k, k);
    auto cover = polar::covering_encode(x_k, diag.sets, codes.channel(k, k), shared_seed, k, rng);

    const auto part = planes_to_lattice_point(cover.u_planes, codes.lat);
    for (std::size_t i = 0; i < n; ++i) state.a[i] += part[i];
    state.code_planes.push_back(std::move(cover.u_planes));

    RoundPayload msg;
    msg.k = k;
    // increments for earlier parts: positions decodable at the old guess
    // but not at the new one
    for (int j = 1; j < k; ++j) {
        const auto& prev = codes.at(j, k - 1).sets;
        const auto& cur = codes.at(j, k).sets;
        const auto& planes = state.code_planes[static_cast<std::size_t>(j - 1)];
        for (int i = 0; i < codes.ell; ++i) {
            const auto& p = prev.levels[static_cast<std::size_t>(i)];
            const auto& c = cur.levels[static_cast<std::size_t>(i)];
            const std::uint8_t* row = planes.row(i);
            for (std::size_t idx = 0; idx < n; ++idx)
                if (p.i2[idx] && !c.i2[idx]) msg.bits.push_back(row[idx]);
        }
    }
    msg.bits.insert(msg.bits.end(), cover.payload.begin(), cover.payload.end());

    state.spent_bits += msg.bits.size();
    state.round = k;
    return msg;
}

Feedback decoder_round(DecoderState& state, const SessionCodes& codes,
                       const RoundPayload& payload, std::uint64_t shared_seed,
                       const hashtest::QuantizedHash& hash, const hashtest::HashParams& hp) {
    const int k = state.round + 1;
    if (payload.k != k) throw ProtocolViolation("decoder_round: unexpected round index");
    if (payload.bits.size() != codes.round_payload_bits(k))
        throw ProtocolViolation("decoder_round: payload length mismatch");
    const std::size_t n = codes.n;

    // absorb this round's bits into the per-part stores
    std::size_t cursor = 0;
    for (int j = 1; j < k; ++j) {
        const auto& prev = codes.at(j, k - 1).sets;
        const auto& cur = codes.at(j, k).sets;
        for (int i = 0; i < codes.ell; ++i) {
            const auto& p = prev.levels[static_cast<std::size_t>(i)];
            const auto& c = cur.levels[static_cast<std::size_t>(i)];
            auto& store = state.received[static_cast<std::size_t>(j - 1)]
                                        [static_cast<std::size_t>(i)];
            for (std::size_t idx = 0; idx < n; ++idx)
                if (p.i2[idx] && !c.i2[idx])
                    store[idx] = static_cast<std::int8_t>(payload.bits[cursor++]);
        }
    }
    {
        const auto& diag = codes.at(k, k).sets;
        for (int i = 0; i < codes.ell; ++i) {
            const auto& lv = diag.levels[static_cast<std::size_t>(i)];
            auto& store = state.received[static_cast<std::size_t>(k - 1)]
                                        [static_cast<std::size_t>(i)];
            for (std::size_t idx = 0; idx < n; ++idx)
                if (!lv.f1[idx] && !lv.i2[idx])
                    store[idx] = static_cast<std::int8_t>(payload.bits[cursor++]);
        }
    }

    const auto& rp_k = codes.rp[static_cast<std::size_t>(k - 1)];
    const auto ybar = model::scaled_side_info(state.y, codes.src, rp_k);

    std::vector<double> a_hat(n, 0.0);
    std::vector<double> y_res(n);
    for (int j = 1; j <= k; ++j) {
        const auto& view = codes.at(j, k).sets;
        std::vector<std::uint8_t> rx;
        rx.reserve(view.df_count());
        for (int i = 0; i < codes.ell; ++i) {
            const auto& lv = view.levels[static_cast<std::size_t>(i)];
            const auto& store = state.received[static_cast<std::size_t>(j - 1)]
                                              [static_cast<std::size_t>(i)];
            for (std::size_t idx = 0; idx < n; ++idx)
                if (!lv.f1[idx] && !lv.i2[idx]) {
                    if (store[idx] < 0)
                        throw ProtocolViolation("decoder_round: missing payload bit");
                    rx.push_back(static_cast<std::uint8_t>(store[idx]));
                }
        }
        for (std::size_t i = 0; i < n; ++i) y_res[i] = ybar[i] - a_hat[i];
        const auto planes =
            polar::packing_decode(y_res, view, rx, codes.channel(j, k), shared_seed, j);
        const auto part = planes_to_lattice_point(planes, codes.lat);
        for (std::size_t i = 0; i < n; ++i) a_hat[i] += part[i];
    }

    state.a_hat = std::move(a_hat);
    state.x_hat = model::mmse_reconstruct(state.a_hat, ybar, codes.src, rp_k);
    state.round = k;

    try {
        const auto res = hashtest::closeness_test(hash, state.x_hat, hp, codes.src.delta);
        return res.verdict == hashtest::Verdict::ACK ? Feedback::ACK : Feedback::NACK;
    } catch (const TestDegenerate&) {
        return Feedback::NACK;
    }
}

SessionTranscript run_session(const model::SourceParams& src, const SessionCodes& codes,
                              const hashtest::HashParams& hash_params,
                              const SessionSeeds& seeds, bool keep_messages) {
    if (codes.rounds() < 1)
        throw InvalidParameter("run_session: schedule has no guesses beyond sigma_0^2");
    const std::size_t n = codes.n;

    auto [x, y] = model::sample_source(n, src, seeds.source);

    hashtest::HashParams hp = hash_params;
    hp.seed_r = seeds.hash_r;
    const auto hash = hashtest::make_hash(x, hp);

    SessionTranscript tr;
    tr.hash_bits = hashtest::hash_bits(hp);
    if (keep_messages) tr.messages.push_back(Round0Hash{hash});

    auto enc = make_encoder(std::move(x), n);
    auto dec = make_decoder(std::move(y), codes);
    Rng enc_rng(mix_keys(seeds.encoder, seed_tag::encoder));

    bool acked = false;
    for (int k = 1; k <= codes.rounds(); ++k) {
        auto payload = encoder_round(enc, codes, seeds.shared, enc_rng);
        tr.per_round_bits.push_back(payload.bits.size());
        const auto fb = decoder_round(dec, codes, payload, seeds.shared, hash, hp);
        if (keep_messages) {
            tr.messages.push_back(std::move(payload));
            tr.messages.push_back(fb);
        }
        ++tr.feedback_bits;
        if (fb == Feedback::ACK) {
            tr.tau = k;
            acked = true;
            break;
        }
    }
    if (!acked) tr.tau = codes.rounds();
    tr.success = acked;

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = enc.x[i] - dec.x_hat[i];
        err += d * d;
    }
    tr.mse = err / static_cast<double>(n);

    std::size_t payload_bits = 0;
    for (auto b : tr.per_round_bits) payload_bits += b;
    tr.total_rate = static_cast<double>(tr.hash_bits + payload_bits) / static_cast<double>(n);
    return tr;
}

} // namespace uwz::protocol
