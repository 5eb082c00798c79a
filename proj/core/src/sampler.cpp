#include "partmi/sampler.hpp"

#include "partmi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_set>

namespace partmi {

namespace {

double state_score(const Partition& p, const ModelScorer& scorer, BlockScoreCache* cache) {
    if (cache == nullptr) return scorer.log_score(p);
    double acc = scorer.log_prior(p);
    for (const auto& block : block_keys(p)) acc += cache->get_or_compute(block, scorer);
    return acc;
}

// categorical draw from log weights (softmax in the log domain)
std::size_t draw_softmax(std::span<const double> log_weights, Rng& rng) {
    const double max_lw = *std::max_element(log_weights.begin(), log_weights.end());
    double total = 0.0;
    for (double lw : log_weights) total += std::exp(lw - max_lw);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double target = unif(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        acc += std::exp(log_weights[i] - max_lw);
        if (target < acc) return i;
    }
    return log_weights.size() - 1;
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void SamplerConfig::validate() const {
    if (chains < 1) throw InputError("sampler: need at least one chain");
    if (m_init < chains) throw InputError("sampler: initial pool smaller than chain count");
    if (steps < 2) throw InputError("sampler: need at least two steps");
    if (temperatures.empty() || temperatures.front() != 1.0)
        throw InputError("sampler: temperature ladder must start at T=1");
    for (std::size_t l = 1; l < temperatures.size(); ++l)
        if (!(temperatures[l] > temperatures[l - 1]))
            throw InputError("sampler: temperatures must be strictly increasing");
    if (!(alpha1 >= 0.0 && alpha1 < 1.0)) throw InputError("sampler: alpha1 must be in [0,1)");
    if (!(alpha2 >= 0.0 && alpha2 <= 1.0 - alpha1))
        throw InputError("sampler: alpha2 must be in [0, 1-alpha1]");
    if (ladder_size() == 1 && alpha1 != 0.0)
        throw InputError("sampler: swap probability requires a ladder of at least 2");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
        throw InputError("sampler: burn-in fraction must be in [0,1)");
    if (shared_cache && cache_capacity.has_value())
        throw InputError("sampler: the shared cache does not support a capacity bound");
}

std::vector<double> SamplerConfig::geometric_ladder(int rungs, double t_max) {
    if (rungs < 1) throw InputError("ladder: need at least one rung");
    if (rungs == 1) return {1.0};
    if (!(t_max > 1.0)) throw InputError("ladder: top temperature must exceed 1");
    std::vector<double> temps(static_cast<std::size_t>(rungs));
    const double ratio = std::pow(t_max, 1.0 / double(rungs - 1));
    temps[0] = 1.0;
    for (int l = 1; l < rungs - 1; ++l) temps[std::size_t(l)] = std::pow(ratio, double(l));
    temps[std::size_t(rungs - 1)] = t_max;
    return temps;
}

SamplerConfig SamplerConfig::preset(std::string_view name) {
    SamplerConfig cfg;
    cfg.m_init = 10000;
    cfg.chains = 4;
    cfg.steps = 100000;
    if (name == "gibbs") {
        cfg.alpha1 = 0.0; cfg.alpha2 = 1.0;
    } else if (name == "2wshc") {
        cfg.alpha1 = 0.0; cfg.alpha2 = 0.0;
    } else if (name == "gibbs+2wshc") {
        cfg.alpha1 = 0.0; cfg.alpha2 = 0.8;
    } else if (name == "gibbs+pt") {
        cfg.temperatures = geometric_ladder(7);
        cfg.alpha1 = 0.5; cfg.alpha2 = 0.5;
    } else if (name == "2wshc+pt") {
        cfg.temperatures = geometric_ladder(7);
        cfg.alpha1 = 0.5; cfg.alpha2 = 0.0;
    } else if (name == "gibbs+2wshc+pt") {
        cfg.temperatures = geometric_ladder(7);
        cfg.alpha1 = 0.5; cfg.alpha2 = 0.4;
    } else {
        throw InputError("unknown preset \"" + std::string(name) +
                         "\"; expected gibbs, 2wshc, gibbs+2wshc, gibbs+pt, 2wshc+pt "
                         "or gibbs+2wshc+pt");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Block score cache
// ---------------------------------------------------------------------------

BlockScoreCache::BlockScoreCache(std::optional<std::size_t> capacity, bool shared)
    : capacity_(capacity), shared_(shared) {
    if (shared_ && capacity_.has_value())
        throw InputError("shared cache does not support a capacity bound");
}

double BlockScoreCache::get_or_compute(const BlockKey& block, const ModelScorer& scorer) {
    if (shared_) {
        {
            std::shared_lock lock(mutex_);
            const auto it = map_.find(block);
            if (it != map_.end()) {
                ++hits_;
                return it->second->second;
            }
        }
        const double value = scorer.block_log_score(block); // compute outside the lock
        std::unique_lock lock(mutex_);
        const auto [it, inserted] = map_.try_emplace(block);
        if (inserted) {
            lru_.emplace_front(block, value);
            it->second = lru_.begin();
            ++misses_;
        } else {
            ++hits_; // another thread inserted first; values agree
        }
        return it->second->second;
    }

    const auto it = map_.find(block);
    if (it != map_.end()) {
        ++hits_;
        if (capacity_.has_value()) lru_.splice(lru_.begin(), lru_, it->second);
        return it->second->second;
    }
    ++misses_;
    const double value = scorer.block_log_score(block);
    lru_.emplace_front(block, value);
    map_[block] = lru_.begin();
    if (capacity_.has_value() && map_.size() > *capacity_) {
        map_.erase(lru_.back().first);
        lru_.pop_back();
    }
    return value;
}

std::size_t BlockScoreCache::size() const {
    if (shared_) {
        std::shared_lock lock(mutex_);
        return map_.size();
    }
    return map_.size();
}

double BlockScoreCache::audit(const ModelScorer& scorer, Rng& rng, int samples) const {
    std::vector<std::pair<BlockKey, double>> entries;
    {
        std::shared_lock lock(mutex_);
        entries.assign(lru_.begin(), lru_.end());
    }
    if (entries.empty()) return 0.0;
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const auto& [block, cached] = entries[pick(rng)];
        worst = std::max(worst, std::abs(cached - scorer.block_log_score(block)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Moves
// ---------------------------------------------------------------------------

std::vector<Partition> init_chains(const SamplerConfig& cfg, const ModelScorer& scorer,
                                   Rng& rng) {
    if (cfg.m_init < cfg.chains) throw InputError("init: pool smaller than chain count");
    const UniformPartitionSampler uniform(scorer.dim());

    std::vector<Partition> pool; // unique draws in first-seen order
    std::unordered_set<Partition, PartitionHash> seen;
    const auto add_draw = [&] {
        Partition p = uniform(rng);
        if (seen.insert(p).second) pool.push_back(std::move(p));
    };
    for (int i = 0; i < cfg.m_init; ++i) add_draw();
    // a duplicate-heavy pool cannot seed distinct chains; refill with fresh
    // draws (bounded: the solution space itself may be smaller than C)
    for (long attempt = 0; int(pool.size()) < cfg.chains && attempt < 1000L * cfg.chains;
         ++attempt)
        add_draw();

    std::vector<double> log_w(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) log_w[i] = scorer.log_score(pool[i]);

    std::vector<Partition> starts;
    starts.reserve(std::size_t(cfg.chains));
    std::vector<char> taken(pool.size(), 0);
    const double max_lw = *std::max_element(log_w.begin(), log_w.end());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int c = 0; c < cfg.chains; ++c) {
        if (std::find(taken.begin(), taken.end(), char(0)) == taken.end()) {
            // pool exhausted (solution space smaller than C): recycle
            std::fill(taken.begin(), taken.end(), 0);
        }
        double total = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (!taken[i]) total += std::exp(log_w[i] - max_lw);

        std::size_t chosen = pool.size();
        if (total > 0.0) {
            const double target = unif(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (taken[i]) continue;
                acc += std::exp(log_w[i] - max_lw);
                chosen = i;
                if (target < acc) break;
            }
        } else {
            // every remaining weight underflowed: take the best leftover
            for (std::size_t i = 0; i < pool.size(); ++i)
                if (!taken[i] && (chosen == pool.size() || log_w[i] > log_w[chosen])) chosen = i;
        }
        taken[chosen] = 1;
        starts.push_back(pool[chosen]);
    }
    return starts;
}

void gibbs_sweep(Partition& state, const ModelScorer& scorer, double temperature, Rng& rng,
                 BlockScoreCache* cache, ChainStats* stats, ScanOrder order) {
    const int d = state.size();
    std::vector<int> scan(static_cast<std::size_t>(d));
    std::iota(scan.begin(), scan.end(), 0);
    if (order == ScanOrder::random) std::shuffle(scan.begin(), scan.end(), rng);

    std::vector<double> log_weights;
    std::vector<const Partition*> alive;
    for (int element : scan) {
        const auto candidates = gibbs_neighbors(state, element);
        log_weights.clear();
        alive.clear();
        for (const auto& q : candidates) {
            try {
                log_weights.push_back(state_score(q, scorer, cache) / temperature);
                alive.push_back(&q);
            } catch (const NumericalError&) {
                if (stats) ++stats->scorer_failures;
            }
        }
        if (alive.empty()) continue; // every reassignment failed; keep the state
        state = *alive[draw_softmax(log_weights, rng)];
    }
}

Partition twoway_shc_step(const Partition& state, const ModelScorer& scorer,
                          double temperature, Rng& rng, ShcMode mode,
                          BlockScoreCache* cache, ChainStats* stats) {
    if (mode == ShcMode::softmax) {
        std::vector<Partition> candidates;
        candidates.push_back(state);
        for (auto& q : merge_neighbors(state)) candidates.push_back(std::move(q));
        for (auto& q : split_neighbors(state)) candidates.push_back(std::move(q));

        std::vector<double> log_weights;
        std::vector<const Partition*> alive;
        for (const auto& q : candidates) {
            try {
                log_weights.push_back(state_score(q, scorer, cache) / temperature);
                alive.push_back(&q);
            } catch (const NumericalError&) {
                if (stats) ++stats->scorer_failures;
            }
        }
        if (alive.empty()) return state;
        return *alive[draw_softmax(log_weights, rng)];
    }

    // metropolized: uniform proposal over the move neighborhood with the
    // Hastings correction for its size change
    std::vector<Partition> neighbors = merge_neighbors(state);
    for (auto& q : split_neighbors(state)) neighbors.push_back(std::move(q));
    if (neighbors.empty()) return state;

    std::uniform_int_distribution<std::size_t> pick(0, neighbors.size() - 1);
    const Partition& proposal = neighbors[pick(rng)];
    if (stats) ++stats->shc_proposals;

    double proposal_score;
    try {
        proposal_score = state_score(proposal, scorer, cache);
    } catch (const NumericalError&) {
        if (stats) ++stats->scorer_failures;
        return state;
    }
    const double current_score = state_score(state, scorer, cache);
    const double log_accept = (proposal_score - current_score) / temperature +
                              std::log(double(neighbors.size())) -
                              std::log(move_neighborhood_size(proposal));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::log(unif(rng)) < std::min(0.0, log_accept)) {
        if (stats) ++stats->shc_accepts;
        return proposal;
    }
    return state;
}

void pt_swap(std::vector<Partition>& states, const ModelScorer& scorer,
             const std::vector<double>& temperatures, Rng& rng,
             BlockScoreCache* cache, ChainStats* stats) {
    const std::size_t rungs = states.size();
    if (rungs < 2 || temperatures.size() != rungs)
        throw InputError("pt_swap: need matching states and a ladder of at least 2");
    std::uniform_int_distribution<std::size_t> pick(0, rungs - 2);
    const std::size_t l = pick(rng);

    const double score_lo = state_score(states[l], scorer, cache);
    const double score_hi = state_score(states[l + 1], scorer, cache);
    const double log_ratio =
        (score_hi - score_lo) * (1.0 / temperatures[l] - 1.0 / temperatures[l + 1]);

    if (stats) ++stats->swap_attempts;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::log(unif(rng)) < std::min(0.0, log_ratio)) {
        std::swap(states[l], states[l + 1]);
        if (stats) ++stats->swap_accepts;
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

namespace {

void write_trace_file(const std::string& dir, int chain, const std::vector<Partition>& trace) {
    const std::string path = dir + "/chain_" + std::to_string(chain) + ".rgs";
    std::ofstream out(path);
    if (!out) throw InputError("cannot open trace file " + path);
    std::string line;
    for (const auto& p : trace) {
        line.clear();
        for (std::size_t i = 0; i < p.rgs().size(); ++i) {
            if (i > 0) line.push_back(',');
            line += std::to_string(int(p.rgs()[i]));
        }
        out << line << '\n';
    }
}

} // namespace

ChainSet run(const SamplerConfig& cfg, const ModelScorer& scorer) {
    cfg.validate();
    const int rungs = cfg.ladder_size();

    Rng init_rng(derive_seed(cfg.seed, 0));
    const auto starts = init_chains(cfg, scorer, init_rng);

    ChainSet result;
    result.d = scorer.dim();
    result.steps = cfg.steps;
    result.burn_in_fraction = cfg.burn_in_fraction;
    result.traces.resize(std::size_t(cfg.chains));
    result.stats.resize(std::size_t(cfg.chains));

    std::unique_ptr<BlockScoreCache> shared_cache;
    if (cfg.shared_cache) shared_cache = std::make_unique<BlockScoreCache>(std::nullopt, true);

    std::vector<std::exception_ptr> failures(std::size_t(cfg.chains));
    const auto run_chain = [&](int c) {
        long step = 0;
        try {
            Rng rng(derive_seed(cfg.seed, std::uint64_t(c) + 1));
            std::vector<Partition> states(std::size_t(rungs), starts[std::size_t(c)]);
            ChainStats& stats = result.stats[std::size_t(c)];

            std::unique_ptr<BlockScoreCache> local_cache;
            BlockScoreCache* cache = nullptr;
            if (cfg.shared_cache) {
                cache = shared_cache.get();
            } else if (!cfg.cache_capacity.has_value() || *cfg.cache_capacity > 0) {
                local_cache = std::make_unique<BlockScoreCache>(cfg.cache_capacity);
                cache = local_cache.get();
            }

            auto& trace = result.traces[std::size_t(c)];
            trace.reserve(std::size_t(cfg.steps));
            trace.push_back(states[0]);

            std::uniform_real_distribution<double> unif(0.0, 1.0);
            for (step = 1; step < cfg.steps; ++step) {
                const double u = unif(rng);
                if (u < cfg.alpha1) {
                    pt_swap(states, scorer, cfg.temperatures, rng, cache, &stats);
                } else if (u < cfg.alpha1 + cfg.alpha2) {
                    for (int l = 0; l < rungs; ++l)
                        gibbs_sweep(states[std::size_t(l)], scorer, cfg.temperatures[std::size_t(l)],
                                    rng, cache, &stats, cfg.scan_order);
                    ++stats.gibbs_steps;
                } else {
                    for (int l = 0; l < rungs; ++l)
                        states[std::size_t(l)] =
                            twoway_shc_step(states[std::size_t(l)], scorer,
                                            cfg.temperatures[std::size_t(l)], rng, cfg.shc_mode,
                                            cache, &stats);
                    ++stats.shc_steps;
                }
                trace.push_back(states[0]);
            }

            if (local_cache) {
                stats.cache_hits = local_cache->hits();
                stats.cache_misses = local_cache->misses();
            }
            if (!cfg.trace_dir.empty()) write_trace_file(cfg.trace_dir, c, trace);
        } catch (const NumericalError& e) {
            failures[std::size_t(c)] = std::make_exception_ptr(NumericalError(
                "chain " + std::to_string(c) + " step " + std::to_string(step) + ": " + e.what()));
        } catch (...) {
            failures[std::size_t(c)] = std::current_exception();
        }
    };

    int workers = cfg.workers > 0 ? cfg.workers : int(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, cfg.chains));
    if (workers == 1) {
        for (int c = 0; c < cfg.chains; ++c) run_chain(c);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int c = w; c < cfg.chains; c += workers) run_chain(c);
            });
        for (auto& t : pool) t.join();
    }
    for (auto& failure : failures)
        if (failure) std::rethrow_exception(failure);

    if (shared_cache) {
        result.stats[0].cache_hits = shared_cache->hits();
        result.stats[0].cache_misses = shared_cache->misses();
    }
    return result;
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

SampledEstimate estimate_prefix(const ChainSet& chains, long prefix) {
    if (chains.traces.empty()) throw InputError("estimate: no chains");
    prefix = std::min(prefix, chains.steps);
    const std::size_t burn = std::size_t(double(prefix) * chains.burn_in_fraction);
    const std::size_t len = std::size_t(prefix) - burn;
    if (prefix < 1 || len == 0) throw InputError("estimate: retained trace is empty");

    const std::size_t c_count = chains.traces.size();
    std::map<Partition, std::vector<long>> counts; // ordered: deterministic support
    for (std::size_t c = 0; c < c_count; ++c) {
        const auto& trace = chains.traces[c];
        for (std::size_t j = burn; j < std::size_t(prefix); ++j) {
            auto& row = counts[trace[j]];
            if (row.empty()) row.assign(c_count, 0);
            ++row[c];
        }
    }

    SampledEstimate out;
    const std::size_t q_count = counts.size();
    out.table.partitions.reserve(q_count);
    out.table.probs.reserve(q_count);
    out.table.d = chains.d;
    out.table.mode = PosteriorMode::sampled;
    out.profile.per_chain.assign(c_count, std::vector<double>(q_count, 0.0));
    out.profile.pooled.reserve(q_count);
    out.profile.chain_weights.assign(c_count, 1.0 / double(c_count));

    const double total = double(len) * double(c_count);
    std::size_t q = 0;
    for (const auto& [partition, row] : counts) {
        long pooled_count = 0;
        for (std::size_t c = 0; c < c_count; ++c) {
            pooled_count += row[c];
            out.profile.per_chain[c][q] = double(row[c]) / double(len);
        }
        out.table.partitions.push_back(partition);
        out.table.probs.push_back(double(pooled_count) / total);
        out.profile.pooled.push_back(double(pooled_count) / total);
        ++q;
    }
    out.profile.support = out.table.partitions;
    return out;
}

SampledEstimate estimate(const ChainSet& chains) {
    return estimate_prefix(chains, chains.steps);
}

} // namespace partmi
