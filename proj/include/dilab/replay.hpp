#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dilab/domain.hpp"
#include "dilab/gmm.hpp"

namespace dilab {

enum class BufferSource { real, synthetic };
std::string_view to_string(BufferSource source);

/// Rehearsal memory: samples with class labels and source-domain tags.
struct ReplayBuffer {
  BufferSource source = BufferSource::real;
  LabeledSet data;
  std::vector<int> domains;  // parallel to data rows

  Eigen::Index size() const { return data.size(); }
  /// Number of entries tagged with (domain, label).
  Eigen::Index count(int domain, int label) const;
};

/// Reservoir-samples min(quota, class size) rows of every class from
/// `domain_train` (Algorithm R, one pass per class, Rng(seed)) and appends
/// them tagged with domain_id. Existing entries are left as they are.
ReplayBuffer update_replay_buffer(ReplayBuffer buffer, const LabeledSet& domain_train,
                                  int domain_id, int per_class_quota, int num_classes,
                                  std::uint64_t seed);

/// Splits `budget` across domains in proportion to their sizes, rounding by
/// largest remainder (ties to the earlier domain).
std::vector<int> proportional_quotas(std::span<const Eigen::Index> sizes, int budget);

/// Keeps the first quota[d] / C entries of each (domain d, class) group.
void shrink_to_quotas(ReplayBuffer& buffer, std::span<const int> domain_quotas, int num_classes);

/// Current train split followed by every buffer entry (class labels only).
LabeledSet compose_replay_trainset(const LabeledSet& current, const ReplayBuffer& buffer);

/// Synthetic buffers of several domains merged into one replay buffer.
ReplayBuffer replay_from_synthetic(std::span<const SyntheticBuffer> buffers);

}  // namespace dilab
