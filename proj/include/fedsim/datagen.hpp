#pragma once
// Synthetic per-device datasets with controllable label heterogeneity.
// Features are drawn from per-class Gaussian clusters so the classes stay
// learnable by a linear model; IID devices sample labels uniformly while
// Non-IID devices only see a fixed label subset assigned round-robin.

#include <cstdint>
#include <span>
#include <vector>

namespace fedsim::datagen {

struct LabeledDataset {
  std::vector<double> features;  // row-major, size() x dim
  std::vector<int> labels;       // values in {0..Z-1}
  std::size_t dim = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t s) const {
    return {features.data() + s * dim, dim};
  }
};

struct LabelPmf {
  std::vector<double> mass;

  std::size_t classes() const { return mass.size(); }
};

struct PartitionSpec {
  int device_count = 1;               // K
  int class_count = 2;                // Z
  int iid_count = 0;                  // first iid_count devices are IID
  int labels_per_noniid_device = 1;
  std::vector<std::size_t> sizes;     // per-device sample counts, length K
  int feature_dim = 2;
  double cluster_sep = 3.0;           // std of class-center placement
  double feature_noise = 1.0;         // within-cluster std
  std::uint64_t seed = 0;
  // Class centers derive from center_seed (0: follow seed), so a held-out
  // set can share the class geometry without replaying sample draws.
  std::uint64_t center_seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// Class centers used by generate_partition, exposed so tasks can anchor
// per-device optima to the same geometry. centers[z] has feature_dim entries.
std::vector<std::vector<double>> class_centers(const PartitionSpec& spec);

// Label subset owned by Non-IID device with non-IID index j (0-based).
std::vector<int> noniid_label_subset(const PartitionSpec& spec, int j);

std::vector<LabeledDataset> generate_partition(const PartitionSpec& spec);

// Empirical label PMF; throws std::domain_error on an empty dataset.
LabelPmf label_pmf(const LabeledDataset& data, int class_count);

// Size-weighted PMF of the union of all datasets; throws std::domain_error
// if every dataset is empty.
LabelPmf global_pmf(std::span<const LabeledDataset> datasets, int class_count);

}  // namespace fedsim::datagen
