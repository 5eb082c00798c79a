#include "partmi/diagnostics.hpp"

#include "partmi/errors.hpp"

#include <cmath>
#include <map>

namespace partmi {

double heterogeneity(const FrequencyProfile& profile) {
    const std::size_t c = profile.chain_count();
    if (c < 1) throw InputError("heterogeneity: need at least one chain");
    double acc = 0.0;
    for (const auto& row : profile.per_chain) {
        if (row.size() != profile.pooled.size())
            throw InputError("heterogeneity: ragged frequency matrix");
        for (std::size_t q = 0; q < row.size(); ++q)
            acc += std::abs(row[q] - profile.pooled[q]);
    }
    return acc / double(c);
}

double run_distance(const PosteriorTable& a, const PosteriorTable& b) {
    if (a.d != b.d) throw InputError("run_distance: tables have different dimensions");
    std::map<Partition, std::pair<double, double>> merged;
    for (std::size_t i = 0; i < a.size(); ++i) merged[a.partitions[i]].first += a.probs[i];
    for (std::size_t i = 0; i < b.size(); ++i) merged[b.partitions[i]].second += b.probs[i];
    double acc = 0.0;
    for (const auto& [p, pq] : merged) acc += std::abs(pq.first - pq.second);
    return acc;
}

} // namespace partmi
