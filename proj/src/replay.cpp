#include "dilab/replay.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dilab/error.hpp"
#include "dilab/rng.hpp"

namespace dilab {

std::string_view to_string(BufferSource source) {
  return source == BufferSource::real ? "real" : "synthetic";
}

Eigen::Index ReplayBuffer::count(int domain, int label) const {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    n += domains[i] == domain && data.labels[i] == label;
  }
  return n;
}

ReplayBuffer update_replay_buffer(ReplayBuffer buffer, const LabeledSet& domain_train,
                                  int domain_id, int per_class_quota, int num_classes,
                                  std::uint64_t seed) {
  if (per_class_quota < 1) throw ValidationError("replay quota must be at least 1 per class");
  if (!buffer.data.empty() && buffer.data.dim() != domain_train.dim()) {
    throw ShapeError("replay buffer dim differs from domain data");
  }
  Rng rng(seed);
  std::vector<Eigen::Index> picked;
  for (int c = 0; c < num_classes; ++c) {
    const auto rows = domain_train.rows_with_label(c);
    std::vector<Eigen::Index> reservoir;
    const auto quota = static_cast<std::size_t>(per_class_quota);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i < quota) {
        reservoir.push_back(rows[i]);
      } else {
        const auto j = static_cast<std::size_t>(rng.below(i + 1));
        if (j < quota) reservoir[j] = rows[i];
      }
    }
    picked.insert(picked.end(), reservoir.begin(), reservoir.end());
  }
  buffer.data.append(domain_train.select(picked));
  buffer.domains.insert(buffer.domains.end(), picked.size(), domain_id);
  return buffer;
}

std::vector<int> proportional_quotas(std::span<const Eigen::Index> sizes, int budget) {
  if (budget < 1) throw ValidationError("replay budget must be at least 1");
  if (sizes.empty()) return {};
  const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0}));
  if (total <= 0.0) throw ValidationError("proportional quotas need positive dataset sizes");
  std::vector<int> quotas(sizes.size());
  std::vector<double> remainder(sizes.size());
  int assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = budget * static_cast<double>(sizes[i]) / total;
    quotas[i] = static_cast<int>(exact);
    remainder[i] = exact - quotas[i];
    assigned += quotas[i];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < budget; ++k, ++assigned) ++quotas[order[k % order.size()]];
  return quotas;
}

void shrink_to_quotas(ReplayBuffer& buffer, std::span<const int> domain_quotas, int num_classes) {
  std::vector<Eigen::Index> keep;
  std::vector<int> kept_domains;
  std::vector<std::vector<int>> seen(domain_quotas.size(), std::vector<int>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < buffer.domains.size(); ++i) {
    const auto d = static_cast<std::size_t>(buffer.domains[i]);
    const auto c = static_cast<std::size_t>(buffer.data.labels[i]);
    if (d >= domain_quotas.size()) {
      keep.push_back(static_cast<Eigen::Index>(i));
      kept_domains.push_back(buffer.domains[i]);
      continue;
    }
    const int per_class = std::max(1, domain_quotas[d] / num_classes);
    if (seen[d][c] < per_class) {
      ++seen[d][c];
      keep.push_back(static_cast<Eigen::Index>(i));
      kept_domains.push_back(buffer.domains[i]);
    }
  }
  buffer.data = buffer.data.select(keep);
  buffer.domains = std::move(kept_domains);
}

LabeledSet compose_replay_trainset(const LabeledSet& current, const ReplayBuffer& buffer) {
  if (!buffer.data.empty() && buffer.data.dim() != current.dim()) {
    throw ValidationError("replay buffer has dim " + std::to_string(buffer.data.dim()) +
                          ", current domain has " + std::to_string(current.dim()));
  }
  LabeledSet out = current;
  out.append(buffer.data);
  return out;
}

ReplayBuffer replay_from_synthetic(std::span<const SyntheticBuffer> buffers) {
  ReplayBuffer out;
  out.source = BufferSource::synthetic;
  for (const auto& b : buffers) {
    out.data.append(b.data);
    out.domains.insert(out.domains.end(), static_cast<std::size_t>(b.data.size()), b.domain_id);
  }
  return out;
}

}  // namespace dilab
