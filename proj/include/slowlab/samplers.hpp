#pragma once

#include <cstdint>
#include <vector>

#include "slowlab/rng.hpp"

namespace slowlab {

enum class SamplerKind { WithReplacement, WithoutReplacement };

/// Distributed batch sampler shared by K workers.
///
/// WithReplacement: every draw is i.i.d. uniform over the dataset, using the
/// caller's per-worker stream.
///
/// WithoutReplacement: each epoch a single permutation (derived from a
/// dedicated epoch stream, so worker scheduling cannot perturb it) is
/// partitioned into K shards of N_loc batches; workers consume their shard in
/// order and synchronize at epoch boundaries. A worker running more than one
/// epoch ahead of the slowest worker is rejected.
class SamplerState {
public:
    SamplerState(SamplerKind kind, std::size_t dataset_size, int workers, int batch_size,
                 std::uint64_t root_seed);

    SamplerKind kind() const { return kind_; }
    std::size_t dataset_size() const { return n_; }
    int workers() const { return k_; }
    int batch_size() const { return b_loc_; }

    /// Batches per worker per epoch: floor(N / (K * B_loc)).
    std::size_t batches_per_epoch() const { return n_loc_; }

    /// Next batch of dataset indices (0-based) for the given worker.
    std::vector<std::size_t> sample(int worker, StreamRng& rng);

private:
    std::vector<std::size_t> epoch_permutation(std::size_t epoch) const;

    SamplerKind kind_;
    std::size_t n_;
    int k_;
    int b_loc_;
    std::uint64_t root_seed_;
    std::size_t n_loc_;
    std::vector<std::size_t> issued_;  // batches issued so far, per worker
    mutable std::vector<std::size_t> perm_cache_;
    mutable std::size_t perm_cache_epoch_;
    mutable bool perm_cached_ = false;
};

}  // namespace slowlab
