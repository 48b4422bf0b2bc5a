#include "hiersign/rng.hpp"

namespace hiersign {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ v);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master_seed, const StreamLabel& label) {
  std::uint64_t h = splitmix64(master_seed);
  h = absorb(h, static_cast<std::uint64_t>(label.round) + 1);
  h = absorb(h, static_cast<std::uint64_t>(label.step) + 1);
  h = absorb(h, static_cast<std::uint64_t>(label.edge) + 1);
  h = absorb(h, static_cast<std::uint64_t>(label.device) + 1);
  h = absorb(h, fnv1a(label.purpose));
  return h;
}

RngStream fork_rng(std::uint64_t master_seed, const StreamLabel& label) {
  return RngStream(stream_seed(master_seed, label));
}

}  // namespace hiersign
