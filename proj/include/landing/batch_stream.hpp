#pragma once

#include "landing/common.hpp"

#include <cstdint>
#include <vector>

namespace landing {

using IndexBatch = std::vector<Eigen::Index>;

struct BatchTriple {
  IndexBatch xi;          // gradient batch
  IndexBatch zeta;        // first constraint batch
  IndexBatch zeta_prime;  // second constraint batch
};

/// Minibatch indices drawn uniformly with replacement from {0, ..., population - 1}.
/// Each stream owns its generator, so independent runs never share random state.
class BatchStream {
 public:
  /// max_triples = 0 means the stream never runs out.
  BatchStream(Eigen::Index population, Eigen::Index batch_size, std::uint64_t seed,
              std::int64_t max_triples = 0)
      : population_(population),
        batch_size_(batch_size),
        max_triples_(max_triples),
        rng_(seed),
        pick_(0, population > 0 ? population - 1 : 0) {
    if (population < 1) throw ConfigError("batch stream needs a nonempty population");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (batch_size > population) throw ConfigError("batch size exceeds the number of samples");
    if (max_triples < 0) throw ConfigError("max_triples must be nonnegative");
  }

  Eigen::Index population() const { return population_; }
  Eigen::Index batch_size() const { return batch_size_; }
  std::int64_t triples_drawn() const { return drawn_; }

  IndexBatch next_batch() {
    IndexBatch out(static_cast<std::size_t>(batch_size_));
    for (auto& i : out) i = pick_(rng_);
    return out;
  }

  /// Three independent batches. Throws SamplerExhaustedError past max_triples.
  BatchTriple next_triple() {
    if (max_triples_ > 0 && drawn_ >= max_triples_)
      throw SamplerExhaustedError("batch stream exhausted after " + std::to_string(drawn_) +
                                  " draws");
    ++drawn_;
    BatchTriple t;
    t.xi = next_batch();
    t.zeta = next_batch();
    t.zeta_prime = next_batch();
    return t;
  }

 private:
  Eigen::Index population_;
  Eigen::Index batch_size_;
  std::int64_t max_triples_;
  std::int64_t drawn_ = 0;
  Rng rng_;
  std::uniform_int_distribution<Eigen::Index> pick_;
};

}  // namespace landing
