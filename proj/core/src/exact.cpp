#include "partmi/exact.hpp"

#include "partmi/combinatorics.hpp"
#include "partmi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace partmi {

namespace {

// deterministic pairwise tree sum; order independent of thread count
double tree_sum(std::vector<double>& values) {
    for (std::size_t width = values.size(); width > 1;) {
        const std::size_t half = (width + 1) / 2;
        for (std::size_t i = 0; i + half < width; ++i) values[i] += values[i + half];
        width = half;
    }
    return values.empty() ? 0.0 : values[0];
}

} // namespace

std::size_t PosteriorTable::map_index() const {
    if (partitions.empty()) throw InputError("posterior table is empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best] || (probs[i] == probs[best] && partitions[i] < partitions[best]))
            best = i;
    return best;
}

std::vector<std::size_t> PosteriorTable::order_by_probability() const {
    std::vector<std::size_t> idx(partitions.size());
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return partitions[a] < partitions[b];
    });
    return idx;
}

PosteriorTable exact_posterior(const ModelScorer& scorer, int d, int workers) {
    if (d != scorer.dim()) throw InputError("exact_posterior: dimension mismatch");
    auto partitions = enumerate_partitions(d); // guards d <= 12

    const std::size_t count = partitions.size();
    std::vector<double> scores(count);
    if (workers <= 0) workers = int(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, int(count)));

    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) scores[i] = scorer.log_score(partitions[i]);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = std::size_t(w); i < count; i += std::size_t(workers))
                        scores[i] = scorer.log_score(partitions[i]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    const double max_score = *std::max_element(scores.begin(), scores.end());
    std::vector<double> shifted(count);
    for (std::size_t i = 0; i < count; ++i) shifted[i] = std::exp(scores[i] - max_score);
    std::vector<double> terms = shifted;
    const double total = tree_sum(terms);

    PosteriorTable table;
    table.partitions = std::move(partitions);
    table.probs.resize(count);
    for (std::size_t i = 0; i < count; ++i) table.probs[i] = shifted[i] / total;
    table.d = d;
    table.mode = PosteriorMode::exact;
    return table;
}

double entropy_normalized(const PosteriorTable& table) {
    if (table.mode != PosteriorMode::exact)
        throw InputError("normalized entropy needs the full solution space; "
                         "a sampled table's support is truncated");
    if (table.d == 1) return 0.0; // single partition, degenerate by definition
    double h = 0.0;
    for (double p : table.probs)
        if (p > 0.0) h -= p * std::log(p);
    return h / log_bell(table.d);
}

double relevance(const PosteriorTable& table, const BlockKey& block) {
    const auto& members = block.elements();
    if (members.back() >= table.d)
        throw InputError("relevance: block exceeds table dimension");
    double acc = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const Partition& p = table.partitions[i];
        const std::uint8_t label = p.label_of(members.front());
        bool contained = true;
        for (int e : members)
            if (p.label_of(e) != label) { contained = false; break; }
        if (!contained) continue;
        int block_size = 0;
        for (int e = 0; e < p.size(); ++e) block_size += p.label_of(e) == label;
        if (block_size == block.size()) acc += table.probs[i];
    }
    return acc;
}

double event_probability(const PosteriorTable& table,
                         const std::function<bool(const Partition&)>& predicate) {
    double acc = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i)
        if (predicate(table.partitions[i])) acc += table.probs[i];
    return acc;
}

std::function<bool(const Partition&)> same_block(BlockKey subset) {
    return [subset = std::move(subset)](const Partition& p) {
        const auto& members = subset.elements();
        const std::uint8_t label = p.label_of(members.front());
        for (int e : members)
            if (p.label_of(e) != label) return false;
        return true;
    };
}

std::function<bool(const Partition&)> has_block_count(int k) {
    return [k](const Partition& p) { return p.block_count() == k; };
}

std::function<bool(const Partition&)> is_map(const PosteriorTable& table) {
    const double max_prob = table.probs[table.map_index()];
    std::vector<Partition> best;
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table.probs[i] == max_prob) best.push_back(table.partitions[i]);
    return [best = std::move(best)](const Partition& p) {
        return std::find(best.begin(), best.end(), p) != best.end();
    };
}

TruthSummary summarize_truth(const PosteriorTable& table, const Partition& truth) {
    if (truth.size() != table.d)
        throw InputError("summarize_truth: truth has wrong dimension");
    TruthSummary out;
    std::size_t truth_idx = table.size();
    for (std::size_t i = 0; i < table.size(); ++i)
        if (table.partitions[i] == truth) { truth_idx = i; break; }
    if (truth_idx == table.size()) {
        // possible for sampled tables whose support missed the truth
        out.p_true = 0.0;
        out.rank = table.size() + 1;
        out.ratio_to_map = 0.0;
    } else {
        out.p_true = table.probs[truth_idx];
        std::size_t before = 0;
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (table.probs[i] > out.p_true ||
                (table.probs[i] == out.p_true && table.partitions[i] < truth))
                ++before;
        }
        out.rank = before + 1;
        out.ratio_to_map = out.p_true / table.probs[table.map_index()];
    }
    out.entropy = table.mode == PosteriorMode::exact
                      ? entropy_normalized(table)
                      : std::numeric_limits<double>::quiet_NaN();
    return out;
}

} // namespace partmi
