#pragma once

#include "partmi/diagnostics.hpp"
#include "partmi/exact.hpp"
#include "partmi/models.hpp"
#include "partmi/partition.hpp"

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace partmi {

/// How the merge/split move picks its next state. The softmax rule samples
/// from the tempered scores of the whole candidate set; because
/// neighborhood sizes vary it is not exactly reversible. The metropolized
/// rule proposes uniformly and applies the Hastings correction, making the
/// tempered target exactly invariant.
enum class ShcMode { softmax, metropolized };

enum class ScanOrder { fixed, random };

struct SamplerConfig {
    int m_init = 10000;                     // uniform pool for importance resampling
    int chains = 4;                         // independent chains C
    long steps = 100000;                    // samples per chain J
    std::vector<double> temperatures = {1.0}; // ladder, T_1 = 1, strictly increasing
    double alpha1 = 0.0;                    // P(swap step)
    double alpha2 = 1.0;                    // P(element-wise Gibbs step)
    double burn_in_fraction = 0.5;
    std::uint64_t seed = 0;
    ShcMode shc_mode = ShcMode::softmax;
    ScanOrder scan_order = ScanOrder::fixed;
    std::optional<std::size_t> cache_capacity; // nullopt: unbounded; 0: disabled
    bool shared_cache = false;              // one cache across chains
    int workers = 0;                        // 0: hardware concurrency
    std::string trace_dir;                  // when set, per-step RGS logs go here

    int ladder_size() const { return int(temperatures.size()); }
    void validate() const;

    /// Named parameter families: "gibbs", "2wshc", "gibbs+2wshc",
    /// "gibbs+pt", "2wshc+pt", "gibbs+2wshc+pt".
    static SamplerConfig preset(std::string_view name);

    /// T_l = r^(l-1) with r chosen so the hottest rung is t_max.
    static std::vector<double> geometric_ladder(int rungs, double t_max = 32.0);
};

/// Per-chain move and cache counters.
struct ChainStats {
    long gibbs_steps = 0;
    long shc_steps = 0;
    long swap_attempts = 0;
    long swap_accepts = 0;
    long shc_proposals = 0; // metropolized mode only
    long shc_accepts = 0;
    long scorer_failures = 0; // candidates dropped because scoring threw
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
};

/// Full T=1 trace of every chain plus counters. The first
/// floor(J * burn_in_fraction) entries of each trace are burn-in.
struct ChainSet {
    int d = 0;
    long steps = 0;
    double burn_in_fraction = 0.5;
    std::vector<std::vector<Partition>> traces; // C x J
    std::vector<ChainStats> stats;

    std::size_t burn_in_length() const {
        return std::size_t(double(steps) * burn_in_fraction);
    }
    std::span<const Partition> retained(std::size_t chain) const {
        const auto& t = traces[chain];
        return {t.data() + burn_in_length(), t.size() - burn_in_length()};
    }
};

/// Memo table for per-block log scores. Scores are additive over blocks, so
/// caching at block granularity makes every state score a sum of cached
/// terms. An optional capacity bound evicts least-recently-used entries to
/// keep memory flat on long runs.
class BlockScoreCache {
public:
    explicit BlockScoreCache(std::optional<std::size_t> capacity = std::nullopt,
                             bool shared = false);

    double get_or_compute(const BlockKey& block, const ModelScorer& scorer);

    std::size_t hits() const { return hits_.load(std::memory_order_relaxed); }
    std::size_t misses() const { return misses_.load(std::memory_order_relaxed); }
    std::size_t size() const;

    /// Re-evaluate `samples` random cached entries against the scorer and
    /// report the largest absolute deviation (0 when coherent).
    double audit(const ModelScorer& scorer, Rng& rng, int samples) const;

private:
    using LruList = std::list<std::pair<BlockKey, double>>;

    std::optional<std::size_t> capacity_;
    bool shared_ = false;
    LruList lru_;
    std::unordered_map<BlockKey, LruList::iterator, BlockKeyHash> map_;
    mutable std::shared_mutex mutex_;
    std::atomic<std::size_t> hits_ = 0, misses_ = 0;
};

/// Importance-resampled starting points: draw m_init partitions uniformly,
/// collapse duplicates, weight by exp(score), then sample `chains` of them
/// without replacement. Duplicate-starved pools are refilled with fresh
/// uniform draws.
std::vector<Partition> init_chains(const SamplerConfig& cfg, const ModelScorer& scorer,
                                   Rng& rng);

/// One full element scan: for each element in turn, redraw its block
/// assignment from the tempered full conditional over gibbs_neighbors.
/// Candidates whose score evaluation throws are dropped and counted.
void gibbs_sweep(Partition& state, const ModelScorer& scorer, double temperature, Rng& rng,
                 BlockScoreCache* cache = nullptr, ChainStats* stats = nullptr,
                 ScanOrder order = ScanOrder::fixed);

/// One merge/split move over {state} + merge_neighbors + split_neighbors.
Partition twoway_shc_step(const Partition& state, const ModelScorer& scorer,
                          double temperature, Rng& rng, ShcMode mode = ShcMode::softmax,
                          BlockScoreCache* cache = nullptr, ChainStats* stats = nullptr);

/// Propose swapping one uniformly chosen adjacent pair of the tempering
/// ladder; accept with min(1, exp{[ln phi(B_{l+1}) - ln phi(B_l)]
/// (1/T_l - 1/T_{l+1})}).
void pt_swap(std::vector<Partition>& states, const ModelScorer& scorer,
             const std::vector<double>& temperatures, Rng& rng,
             BlockScoreCache* cache = nullptr, ChainStats* stats = nullptr);

/// Run C independent chains of J steps each: per step, swap with
/// probability alpha1, Gibbs-sweep every ladder rung with probability
/// alpha2, otherwise merge/split every rung. Chains execute concurrently on
/// deterministic per-chain RNG streams derived from the seed, so results do
/// not depend on the worker count.
ChainSet run(const SamplerConfig& cfg, const ModelScorer& scorer);

struct SampledEstimate {
    PosteriorTable table;       // pooled post-burn-in frequencies
    FrequencyProfile profile;   // per-chain breakdown for diagnostics
};

/// Pooled post-burn-in frequency estimate over the visited support.
SampledEstimate estimate(const ChainSet& chains);

/// Same estimate restricted to each trace's first `prefix` steps (burn-in
/// scaled down proportionally); used for convergence checkpoints.
SampledEstimate estimate_prefix(const ChainSet& chains, long prefix);

} // namespace partmi
