#pragma once

#include <boost/container/small_vector.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace partmi {

using Rng = std::mt19937_64;

/// Derive an independent-looking 64-bit seed from a base seed and a stream
/// index (splitmix64 over the combined word). Used to give every chain and
/// every replicate its own deterministic stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// A set partition of {0,...,D-1} in restricted growth form: label(0) = 0 and
/// each label is at most one larger than every label before it. The RGS is
/// the canonical representative, so equality and ordering are plain
/// byte-wise comparisons. Immutable after construction. D is capped at 255
/// so labels fit one byte.
class Partition {
public:
    using Rgs = boost::container::small_vector<std::uint8_t, 24>;

    Partition() = default;

    /// Wrap an already-canonical RGS; throws InputError if not in
    /// restricted growth form.
    static Partition from_rgs(Rgs rgs);

    /// Map arbitrary block labels to the unique restricted growth string
    /// (labels renumbered in first-occurrence order). Idempotent.
    static Partition canonicalize(std::span<const int> labels);

    /// Partition of d elements into d singleton blocks.
    static Partition singletons(int d);
    /// Partition of d elements into one block.
    static Partition one_block(int d);

    int size() const { return int(rgs_.size()); }
    int block_count() const { return blocks_; }
    std::uint8_t label_of(int element) const { return rgs_[std::size_t(element)]; }
    const Rgs& rgs() const { return rgs_; }

    /// Elements of each block, blocks ordered by their smallest element
    /// (which is the label order for an RGS).
    std::vector<std::vector<int>> blocks() const;

    /// Display form "12|356|4": blocks sorted by smallest element, 1-based
    /// elements. Elements are concatenated for D <= 9 and comma-separated
    /// beyond, where concatenation would be ambiguous.
    std::string str() const;

    friend bool operator==(const Partition& a, const Partition& b) {
        return a.rgs_ == b.rgs_;
    }
    friend bool operator<(const Partition& a, const Partition& b) {
        return std::lexicographical_compare(a.rgs_.begin(), a.rgs_.end(),
                                            b.rgs_.begin(), b.rgs_.end());
    }

private:
    Rgs rgs_;
    int blocks_ = 0;
};

struct PartitionHash {
    std::size_t operator()(const Partition& p) const noexcept;
};

/// One block of a partition: a sorted, non-empty set of element indices.
/// Ordered and hashable so it can key score caches.
class BlockKey {
public:
    BlockKey() = default;
    explicit BlockKey(std::vector<int> elements);

    const std::vector<int>& elements() const { return elements_; }
    int size() const { return int(elements_.size()); }

    /// Display form, 1-based, e.g. "356" (comma-separated past element 9).
    std::string str() const;

    friend bool operator==(const BlockKey&, const BlockKey&) = default;
    friend auto operator<=>(const BlockKey&, const BlockKey&) = default;

private:
    std::vector<int> elements_;
};

struct BlockKeyHash {
    std::size_t operator()(const BlockKey& b) const noexcept;
};

/// Blocks of p as cache keys, in label order.
std::vector<BlockKey> block_keys(const Partition& p);

/// Parse the display form back into a partition. Blocks separated by '|';
/// elements 1-based, either single digits run together ("12|356|4") or
/// comma-separated ("1,2|3,5,6|4"). Every element 1..D must appear exactly
/// once; expected_d = -1 infers D from the largest element.
Partition parse_partition(std::string_view text, int expected_d = -1);

/// All partitions of a d-element set in lexicographic RGS order.
/// Guarded at d <= 12 (bell(12) ~ 4.2M entries).
std::vector<Partition> enumerate_partitions(int d);

/// One partition drawn uniformly from the bell(d) possibilities, via the
/// two-stage urn method: draw an urn count k with weight k^d/k!, scatter the
/// elements uniformly over the k urns, drop empty urns.
Partition sample_uniform_partition(int d, Rng& rng);

/// Precomputed urn-count distribution for repeated uniform draws at fixed d.
class UniformPartitionSampler {
public:
    explicit UniformPartitionSampler(int d);
    Partition operator()(Rng& rng) const;
    int dim() const { return d_; }

private:
    int d_ = 0;
    std::vector<double> urn_cdf_; // urn_cdf_[i] = P(urns <= i+1)
};

/// All partitions reachable by reassigning one element to any existing
/// block or to a fresh singleton. Includes p itself; at most K+1 entries,
/// deduplicated, deterministic order.
std::vector<Partition> gibbs_neighbors(const Partition& p, int element);

/// All K(K-1)/2 partitions obtained by merging one pair of blocks.
std::vector<Partition> merge_neighbors(const Partition& p);

/// All two-block divisions of single blocks: for each block of size s >= 2,
/// its 2^(s-1)-1 splits, generated duplicate-free by a binary mask sweep
/// that keeps the block's smallest element on a fixed side. Throws
/// ResourceError when the neighborhood would exceed the memory budget.
std::vector<Partition> split_neighbors(const Partition& p);

/// |merge_neighbors| + |split_neighbors| without materializing them.
double move_neighborhood_size(const Partition& p);

} // namespace partmi
