#include "slowlab/samplers.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace slowlab {

SamplerState::SamplerState(SamplerKind kind, std::size_t dataset_size, int workers,
                           int batch_size, std::uint64_t root_seed)
    : kind_(kind), n_(dataset_size), k_(workers), b_loc_(batch_size), root_seed_(root_seed) {
    if (n_ == 0)
        throw std::invalid_argument("SamplerState: empty dataset");
    if (k_ < 1)
        throw std::invalid_argument("SamplerState: need at least one worker");
    if (b_loc_ < 1)
        throw std::invalid_argument("SamplerState: batch size must be positive");
    n_loc_ = n_ / (static_cast<std::size_t>(k_) * static_cast<std::size_t>(b_loc_));
    if (kind_ == SamplerKind::WithoutReplacement && n_loc_ == 0)
        throw std::invalid_argument(
            "SamplerState: dataset too small for without-replacement sharding (N < K*B_loc)");
    issued_.assign(static_cast<std::size_t>(k_), 0);
}

std::vector<std::size_t> SamplerState::epoch_permutation(std::size_t epoch) const {
    if (perm_cached_ && perm_cache_epoch_ == epoch)
        return perm_cache_;
    std::vector<std::size_t> perm(n_);
    for (std::size_t i = 0; i < n_; ++i) perm[i] = i;
    StreamRng rng(root_seed_, StreamRng::kTagEpoch, epoch);
    for (std::size_t i = n_ - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.next_below(i + 1)]);
    perm_cache_ = perm;
    perm_cache_epoch_ = epoch;
    perm_cached_ = true;
    return perm;
}

std::vector<std::size_t> SamplerState::sample(int worker, StreamRng& rng) {
    if (worker < 0 || worker >= k_)
        throw std::invalid_argument("SamplerState: worker index out of range");

    std::vector<std::size_t> batch(static_cast<std::size_t>(b_loc_));
    if (kind_ == SamplerKind::WithReplacement) {
        for (auto& idx : batch) idx = rng.next_below(n_);
        return batch;
    }

    const std::size_t c = issued_[static_cast<std::size_t>(worker)];
    const std::size_t epoch = c / n_loc_;
    const std::size_t min_issued = *std::min_element(issued_.begin(), issued_.end());
    const std::size_t min_epoch = min_issued / n_loc_;
    if (epoch > min_epoch + 1)
        throw std::runtime_error("SamplerState: worker " + std::to_string(worker) +
                                 " is more than one epoch ahead of the barrier");

    const std::vector<std::size_t> perm = epoch_permutation(epoch);
    const std::size_t within = c % n_loc_;
    const std::size_t offset =
        (static_cast<std::size_t>(worker) * n_loc_ + within) * static_cast<std::size_t>(b_loc_);
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = perm[offset + i];
    issued_[static_cast<std::size_t>(worker)] = c + 1;
    return batch;
}

}  // namespace slowlab
