#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "pettrace/ble.hpp"
#include "pettrace/blindsig.hpp"
#include "pettrace/crypto.hpp"
#include "pettrace/rng.hpp"
#include "pettrace/server.hpp"

using namespace pet;

namespace {

// Full encounter pipeline: two fresh identities, both key agreements, the
// token pair and the role split.
void BM_EncounterTokens(benchmark::State& state) {
  auto group = crypto::GroupParams::curve25519();
  Rng rng(1);
  for (auto _ : state) {
    auto a = crypto::gen_identity(group, rng, 0);
    auto b = crypto::gen_identity(group, rng, 0);
    auto sa = crypto::dh_shared(group, a.secret, b.ebid);
    auto sb = crypto::dh_shared(group, b.secret, a.ebid);
    auto [p1, p2] = crypto::derive_pet_pair(*sa);
    auto roles = crypto::assign_roles(a.ebid, b.ebid, p1, p2);
    benchmark::DoNotOptimize(sb);
    benchmark::DoNotOptimize(roles);
  }
}
BENCHMARK(BM_EncounterTokens);

void BM_BleRoundTrip(benchmark::State& state) {
  Rng rng(2);
  crypto::Ebid ebid{};
  rng.fill(ebid);
  for (auto _ : state) {
    auto seg = ble::segment_ebid(ebid);
    auto adv = ble::parse_adv(ble::build_adv(seg.low, 1, 0));
    auto rsp = ble::parse_scan_rsp(ble::build_scan_rsp(seg.high));
    auto out = ble::reassemble_ebid(*rsp.value, adv.value->id_low);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_BleRoundTrip);

// Matching cost against a list of `Arg` tuples when nothing matches: the
// pure scan that dominates every served request.
void BM_MatchScanMiss(benchmark::State& state) {
  Rng rng(3);
  server::ExposedList list;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    list.add({crypto::PetToken{rng.bytes32()}, 0, 900});
  }
  std::vector<crypto::PetToken> query;
  for (int i = 0; i < 64; ++i) query.push_back(crypto::PetToken{rng.bytes32()});
  for (auto _ : state) {
    auto hits = list.match_and_remove(query);
    benchmark::DoNotOptimize(hits);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MatchScanMiss)->Arg(1000)->Arg(10000)->Arg(100000);

// Blind issuance plus verification of one auth token.
void BM_BlindTokenRound(benchmark::State& state) {
  Rng rng(4);
  static const auto kp = blindsig::generate_keypair(1024, rng);
  for (auto _ : state) {
    auto token = blindsig::issue_token(kp, rng);
    benchmark::DoNotOptimize(blindsig::verify_token(token, kp.pub));
  }
}
BENCHMARK(BM_BlindTokenRound);

// One rewrite of a registered entry: decrypt, touch, re-encrypt.
void BM_EntryRewrite(benchmark::State& state) {
  Rng rng(5);
  crypto::EntryKey key{};
  rng.fill(key);
  server::IdEntry entry;
  entry.sre_epoch = 96;
  for (int i = 0; i < 16; ++i) entry.exposures.push_back({7, 900, {}});
  Bytes ct = crypto::encrypt_entry(key, entry.serialize(), rng);
  for (auto _ : state) {
    auto plain = crypto::decrypt_entry(key, ct);
    auto parsed = server::IdEntry::deserialize(*plain);
    parsed->sre_epoch += 1;
    ct = crypto::encrypt_entry(key, parsed->serialize(), rng);
    benchmark::DoNotOptimize(ct);
  }
}
BENCHMARK(BM_EntryRewrite);

}  // namespace

BENCHMARK_MAIN();
