#include "partmi/partition.hpp"

#include "partmi/combinatorics.hpp"
#include "partmi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <limits>

namespace partmi {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 finalizer over the combined word
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

constexpr int kMaxElements = 255;

int check_rgs(const Partition::Rgs& rgs) {
    if (rgs.empty()) throw InputError("partition: empty element set");
    if (rgs[0] != 0) throw InputError("partition: RGS must start with label 0");
    int max_label = 0;
    for (std::size_t i = 1; i < rgs.size(); ++i) {
        if (rgs[i] > max_label + 1)
            throw InputError("partition: label sequence violates restricted growth");
        max_label = std::max(max_label, int(rgs[i]));
    }
    return max_label + 1;
}

} // namespace

Partition Partition::from_rgs(Rgs rgs) {
    Partition p;
    p.blocks_ = check_rgs(rgs);
    p.rgs_ = std::move(rgs);
    return p;
}

Partition Partition::canonicalize(std::span<const int> labels) {
    if (labels.empty()) throw InputError("partition: empty element set");
    if (labels.size() > kMaxElements)
        throw InputError("partition: at most 255 elements supported");
    Partition p;
    p.rgs_.resize(labels.size());
    std::vector<int> remap; // original label -> canonical label, discovery order
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int raw = labels[i];
        int canon = -1;
        for (std::size_t j = 0; j < remap.size(); ++j)
            if (remap[j] == raw) { canon = int(j); break; }
        if (canon < 0) {
            canon = int(remap.size());
            remap.push_back(raw);
        }
        p.rgs_[i] = std::uint8_t(canon);
    }
    p.blocks_ = int(remap.size());
    return p;
}

Partition Partition::singletons(int d) {
    if (d < 1 || d > kMaxElements) throw InputError("partition: bad element count");
    Partition p;
    p.rgs_.resize(std::size_t(d));
    for (int i = 0; i < d; ++i) p.rgs_[std::size_t(i)] = std::uint8_t(i);
    p.blocks_ = d;
    return p;
}

Partition Partition::one_block(int d) {
    if (d < 1 || d > kMaxElements) throw InputError("partition: bad element count");
    Partition p;
    p.rgs_.assign(std::size_t(d), 0);
    p.blocks_ = 1;
    return p;
}

std::vector<std::vector<int>> Partition::blocks() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(blocks_));
    for (int i = 0; i < size(); ++i) out[rgs_[std::size_t(i)]].push_back(i);
    return out;
}

std::string Partition::str() const {
    const bool compact = size() <= 9;
    std::string out;
    const auto bl = blocks();
    for (std::size_t b = 0; b < bl.size(); ++b) {
        if (b > 0) out.push_back('|');
        for (std::size_t j = 0; j < bl[b].size(); ++j) {
            if (j > 0 && !compact) out.push_back(',');
            out += std::to_string(bl[b][j] + 1);
        }
    }
    return out;
}

std::size_t PartitionHash::operator()(const Partition& p) const noexcept {
    // FNV-1a over the RGS bytes
    std::size_t h = 1469598103934665603ULL;
    for (std::uint8_t byte : p.rgs()) {
        h ^= byte;
        h *= 1099511628211ULL;
    }
    return h;
}

BlockKey::BlockKey(std::vector<int> elements) : elements_(std::move(elements)) {
    if (elements_.empty()) throw InputError("block: empty");
    std::sort(elements_.begin(), elements_.end());
    for (std::size_t i = 0; i < elements_.size(); ++i) {
        if (elements_[i] < 0) throw InputError("block: negative element index");
        if (i > 0 && elements_[i] == elements_[i - 1])
            throw InputError("block: duplicate element index");
    }
}

std::string BlockKey::str() const {
    const bool compact = elements_.empty() || elements_.back() <= 8;
    std::string out;
    for (std::size_t i = 0; i < elements_.size(); ++i) {
        if (i > 0 && !compact) out.push_back(',');
        out += std::to_string(elements_[i] + 1);
    }
    return out;
}

std::size_t BlockKeyHash::operator()(const BlockKey& b) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (int e : b.elements()) {
        h ^= std::size_t(e) + 1;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<BlockKey> block_keys(const Partition& p) {
    std::vector<BlockKey> keys;
    keys.reserve(std::size_t(p.block_count()));
    for (auto& bl : p.blocks()) keys.emplace_back(std::move(bl));
    return keys;
}

Partition parse_partition(std::string_view text, int expected_d) {
    if (text.empty()) throw InputError("partition: empty string");
    const bool comma_form = text.find(',') != std::string_view::npos;
    std::vector<std::vector<int>> blocks(1);
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char c = text[pos];
        if (c == '|') {
            if (blocks.back().empty()) throw InputError("partition: empty block in \"" + std::string(text) + "\"");
            blocks.emplace_back();
            ++pos;
        } else if (c == ',') {
            ++pos;
        } else if (c >= '0' && c <= '9') {
            if (comma_form) {
                int value = 0;
                const auto end = text.find_first_of("|,", pos);
                const auto tok = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
                const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
                if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
                    throw InputError("partition: bad element \"" + std::string(tok) + "\"");
                blocks.back().push_back(value - 1);
                pos += tok.size();
            } else {
                blocks.back().push_back(c - '1');
                ++pos;
            }
        } else {
            throw InputError(std::string("partition: unexpected character '") + c + "'");
        }
    }
    if (blocks.back().empty()) throw InputError("partition: trailing block separator");

    int max_element = -1;
    std::size_t count = 0;
    for (const auto& b : blocks)
        for (int e : b) {
            if (e < 0) throw InputError("partition: elements are 1-based");
            max_element = std::max(max_element, e);
            ++count;
        }
    const int d = expected_d >= 0 ? expected_d : max_element + 1;
    if (max_element >= d)
        throw InputError("partition: element " + std::to_string(max_element + 1) +
                         " exceeds dimension " + std::to_string(d));
    std::vector<int> labels(std::size_t(d), -1);
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (int e : blocks[b]) {
            if (labels[std::size_t(e)] != -1)
                throw InputError("partition: element " + std::to_string(e + 1) + " appears twice");
            labels[std::size_t(e)] = int(b);
        }
    if (count != std::size_t(d))
        throw InputError("partition: missing elements (got " + std::to_string(count) +
                         " of " + std::to_string(d) + ")");
    return Partition::canonicalize(labels);
}

std::vector<Partition> enumerate_partitions(int d) {
    if (d < 1) throw InputError("enumerate: set size must be >= 1");
    if (d > 12)
        throw ResourceError("enumerate: exhaustive enumeration capped at 12 elements "
                            "(bell(12) = 4213597); use the sampler instead");
    std::vector<Partition> out;
    out.reserve(std::size_t(double(bell(d))));
    std::vector<std::uint8_t> a(std::size_t(d), 0);
    for (;;) {
        Partition::Rgs rgs(a.begin(), a.end());
        out.push_back(Partition::from_rgs(std::move(rgs)));
        // lexicographic successor: rightmost position that can still grow
        int i = d - 1;
        for (; i > 0; --i) {
            int prefix_max = 0;
            for (int j = 0; j < i; ++j) prefix_max = std::max(prefix_max, int(a[std::size_t(j)]));
            if (int(a[std::size_t(i)]) <= prefix_max) break;
        }
        if (i == 0) break;
        ++a[std::size_t(i)];
        std::fill(a.begin() + i + 1, a.end(), std::uint8_t(0));
    }
    return out;
}

UniformPartitionSampler::UniformPartitionSampler(int d) : d_(d) {
    if (d < 1 || d > kMaxElements) throw InputError("uniform partitions: bad element count");
    // urn-count weights w_k ∝ k^d / k!, k >= 1
    std::vector<double> log_w;
    double peak = -std::numeric_limits<double>::infinity();
    for (int k = 1;; ++k) {
        const double lw = d * std::log(double(k)) - std::lgamma(double(k) + 1.0);
        peak = std::max(peak, lw);
        log_w.push_back(lw);
        if (k > d / 2 + 2 && lw < peak - 60.0) break; // past the mode, tail negligible
    }
    double total = 0.0;
    std::vector<double> w(log_w.size());
    for (std::size_t i = 0; i < log_w.size(); ++i) total += (w[i] = std::exp(log_w[i] - peak));
    urn_cdf_.resize(w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) urn_cdf_[i] = (acc += w[i] / total);
    urn_cdf_.back() = 1.0;
}

Partition UniformPartitionSampler::operator()(Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    const auto it = std::lower_bound(urn_cdf_.begin(), urn_cdf_.end(), u);
    const int urns = int(it - urn_cdf_.begin()) + 1;
    std::uniform_int_distribution<int> pick(0, urns - 1);
    std::vector<int> labels(static_cast<std::size_t>(d_));
    for (int i = 0; i < d_; ++i) labels[std::size_t(i)] = pick(rng);
    return Partition::canonicalize(labels);
}

Partition sample_uniform_partition(int d, Rng& rng) {
    return UniformPartitionSampler(d)(rng);
}

std::vector<Partition> gibbs_neighbors(const Partition& p, int element) {
    const int d = p.size();
    if (element < 0 || element >= d) throw InputError("gibbs_neighbors: element out of range");
    const int k = p.block_count();
    std::vector<int> labels(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) labels[std::size_t(i)] = p.label_of(i);

    std::vector<Partition> out;
    out.reserve(std::size_t(k) + 1);
    for (int target = 0; target <= k; ++target) { // label k = fresh singleton
        labels[std::size_t(element)] = target;
        Partition q = Partition::canonicalize(labels);
        if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(std::move(q));
    }
    return out;
}

std::vector<Partition> merge_neighbors(const Partition& p) {
    const int d = p.size();
    const int k = p.block_count();
    std::vector<int> labels(static_cast<std::size_t>(d));
    std::vector<Partition> out;
    out.reserve(std::size_t(k) * std::size_t(k - 1) / 2);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            for (int e = 0; e < d; ++e) {
                const int l = p.label_of(e);
                labels[std::size_t(e)] = (l == j) ? i : l;
            }
            out.push_back(Partition::canonicalize(labels));
        }
    }
    return out;
}

std::vector<Partition> split_neighbors(const Partition& p) {
    const int d = p.size();
    const int k = p.block_count();
    const auto blocks = p.blocks();

    // a block of size s contributes 2^(s-1)-1 divisions; refuse to
    // materialize neighborhoods that would not fit in memory
    constexpr std::size_t kSplitBudget = std::size_t(1) << 21;
    std::size_t total = 0;
    for (const auto& block : blocks) {
        if (block.size() >= 2) {
            if (block.size() - 1 >= 40 ||
                (total += (std::size_t(1) << (block.size() - 1)) - 1) > kSplitBudget)
                throw ResourceError("split_neighbors: block of size " +
                                    std::to_string(block.size()) +
                                    " has too many divisions to enumerate");
        }
    }

    std::vector<int> labels(static_cast<std::size_t>(d));
    std::vector<Partition> out;
    out.reserve(total);
    for (int b = 0; b < k; ++b) {
        const auto& block = blocks[std::size_t(b)];
        const int s = int(block.size());
        if (s < 2) continue;
        // mask over the block members after the smallest one; the smallest
        // member stays put, which makes each two-block division unique
        for (std::uint32_t mask = 1; mask < (1u << (s - 1)); ++mask) {
            for (int e = 0; e < d; ++e) labels[std::size_t(e)] = p.label_of(e);
            for (int j = 1; j < s; ++j)
                if (mask & (1u << (j - 1))) labels[std::size_t(block[std::size_t(j)])] = k;
            out.push_back(Partition::canonicalize(labels));
        }
    }
    return out;
}

double move_neighborhood_size(const Partition& p) {
    const double k = double(p.block_count());
    double n = k * (k - 1) / 2;
    for (const auto& block : p.blocks())
        if (block.size() >= 2) n += std::ldexp(1.0, int(block.size()) - 1) - 1;
    return n;
}

} // namespace partmi
