#pragma once

// Counter-based Gaussian increments. Every increment is a pure function of
// (seed, stream, level, node, component), so any step of any realization can
// be regenerated without replaying the stream, and a dt-refined run sees the
// same Brownian path through Brownian-bridge subdivision.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace transportlab {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// SplitMix64 finalizer, used only to derive Philox keys from (seed, stream).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Stream identifiers. Realization r uses stream ids derived from r so that
/// realizations never share increments.
enum class StreamKind : std::uint64_t { Transport = 1, Viscous = 2, Initial = 3, Auxiliary = 4 };

constexpr std::uint64_t stream_id(StreamKind kind, std::uint64_t realization,
                                  std::uint64_t sub = 0) {
  return mix64(mix64(static_cast<std::uint64_t>(kind)) ^ mix64(realization + 0x51ED270B27ull) ^
               (sub * 0x2545F4914F6CDD1Dull));
}

/// Stateless generator of standard normals keyed by (seed, stream).
class GaussianSource {
 public:
  GaussianSource(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t k = mix64(seed ^ mix64(stream));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  /// Two independent N(0,1) draws addressed by (a, b, c).
  std::array<double, 2> pair(std::uint32_t a, std::uint32_t b, std::uint64_t c) const {
    const auto r = Philox4x32::generate(
        {a, b, static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)}, key_);
    const double u1 = to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * 3.14159265358979323846 * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  double normal(std::uint32_t a, std::uint32_t b, std::uint64_t c) const {
    return pair(a, b, c)[0];
  }

  /// Uniform on (0, 1).
  double uniform(std::uint32_t a, std::uint32_t b, std::uint64_t c) const {
    const auto r = Philox4x32::generate(
        {a, b, static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)}, key_);
    return to_unit(r[0], r[1]);
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_{};
};

/// Brownian increments of `width` independent components on a grid of step
/// dt_base / 2^refine. Refined steps are Brownian-bridge subdivisions of the
/// coarse ones, so runs at different refinement levels share a path.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t stream, double dt_base, int width, int refine = 0)
      : source_(seed, stream), dt_base_(dt_base), width_(width), refine_(refine) {
    if (!(dt_base > 0.0)) throw std::invalid_argument("NoiseStream: dt must be positive");
    if (width < 0) throw std::invalid_argument("NoiseStream: negative width");
    if (refine < 0 || refine > 30) throw std::invalid_argument("NoiseStream: bad refine level");
  }

  double dt() const { return std::ldexp(dt_base_, -refine_); }
  int width() const { return width_; }
  int refine() const { return refine_; }

  /// Fills `out` (size width) with the increments of fine step `step`.
  void fill(std::uint64_t step, std::span<double> out) const {
    if (static_cast<int>(out.size()) != width_)
      throw std::invalid_argument("NoiseStream: output width mismatch");
    if (refine_ == 0) {
      const double sd = std::sqrt(dt_base_);
      for (int j = 0; 2 * j < width_; ++j) {
        const auto z = source_.pair(static_cast<std::uint32_t>(j), 0u, step);
        out[2 * j] = sd * z[0];
        if (2 * j + 1 < width_) out[2 * j + 1] = sd * z[1];
      }
      return;
    }
    for (int k = 0; k < width_; ++k) out[k] = increment(refine_, step, k);
  }

  std::vector<double> block(std::uint64_t step) const {
    std::vector<double> out(width_);
    fill(step, out);
    return out;
  }

 private:
  double increment(int level, std::uint64_t node, int k) const {
    if (level == 0) {
      const auto z = source_.pair(static_cast<std::uint32_t>(k / 2), 0u, node);
      return std::sqrt(dt_base_) * z[k % 2];
    }
    const double parent = increment(level - 1, node >> 1, k);
    const double h_parent = std::ldexp(dt_base_, -(level - 1));
    const auto z = source_.pair(static_cast<std::uint32_t>(k / 2), static_cast<std::uint32_t>(level),
                                node >> 1);
    const double left = 0.5 * parent + 0.5 * std::sqrt(h_parent) * z[k % 2];
    return (node & 1u) ? parent - left : left;
  }

  GaussianSource source_;
  double dt_base_;
  int width_;
  int refine_;
};

/// One realization of the driving noise: transport increments dW^k for the K
/// velocity modes and viscous increments for the D coordinate fields.
struct IncrementBlock {
  std::vector<double> transport;
  std::vector<double> viscous;
};

class NoiseRealization {
 public:
  NoiseRealization(std::uint64_t seed, std::uint64_t realization, double dt, int modes, int dim,
                   int refine = 0, std::uint64_t viscous_sample = 0)
      : transport_(seed, stream_id(StreamKind::Transport, realization), dt, modes, refine),
        viscous_(seed, stream_id(StreamKind::Viscous, realization, viscous_sample), dt, dim,
                 refine),
        seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  double dt() const { return transport_.dt(); }
  int modes() const { return transport_.width(); }
  int dim() const { return viscous_.width(); }

  void fill(std::uint64_t step, IncrementBlock& block) const {
    block.transport.resize(transport_.width());
    block.viscous.resize(viscous_.width());
    transport_.fill(step, block.transport);
    viscous_.fill(step, block.viscous);
  }

  const NoiseStream& transport() const { return transport_; }
  const NoiseStream& viscous() const { return viscous_; }

 private:
  NoiseStream transport_;
  NoiseStream viscous_;
  std::uint64_t seed_;
};

}  // namespace transportlab
