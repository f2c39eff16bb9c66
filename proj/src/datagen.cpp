#include "fedsim/datagen.hpp"

#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim::datagen {

void PartitionSpec::validate() const {
  if (device_count < 1) throw std::invalid_argument("device_count must be >= 1");
  if (class_count < 1) throw std::invalid_argument("class_count must be >= 1");
  if (iid_count < 0 || iid_count > device_count)
    throw std::invalid_argument("iid_count must be in [0, device_count]");
  if (labels_per_noniid_device < 1 || labels_per_noniid_device > class_count)
    throw std::invalid_argument(
        "labels_per_noniid_device must be in [1, class_count]");
  if (sizes.size() != static_cast<std::size_t>(device_count))
    throw std::invalid_argument("sizes must have one entry per device");
  for (std::size_t n : sizes)
    if (n == 0) throw std::invalid_argument("device dataset sizes must be > 0");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (feature_noise < 0 || cluster_sep < 0)
    throw std::invalid_argument("cluster_sep/feature_noise must be >= 0");
}

std::vector<std::vector<double>> class_centers(const PartitionSpec& spec) {
  const std::uint64_t seed = spec.center_seed ? spec.center_seed : spec.seed;
  Rng rng(Rng::derive(seed, "datagen.centers"));
  std::vector<std::vector<double>> centers(spec.class_count);
  for (auto& c : centers) {
    c.resize(spec.feature_dim);
    for (double& v : c) v = spec.cluster_sep * rng.gaussian();
  }
  return centers;
}

std::vector<int> noniid_label_subset(const PartitionSpec& spec, int j) {
  std::vector<int> subset(spec.labels_per_noniid_device);
  const int base = j * spec.labels_per_noniid_device;
  for (int i = 0; i < spec.labels_per_noniid_device; ++i)
    subset[i] = (base + i) % spec.class_count;
  return subset;
}

std::vector<LabeledDataset> generate_partition(const PartitionSpec& spec) {
  spec.validate();
  const auto centers = class_centers(spec);
  std::vector<LabeledDataset> out(spec.device_count);
  for (int k = 0; k < spec.device_count; ++k) {
    Rng rng(Rng::derive(spec.seed, "datagen.device", static_cast<std::uint64_t>(k)));
    const bool iid = k < spec.iid_count;
    const std::vector<int> subset =
        iid ? std::vector<int>{} : noniid_label_subset(spec, k - spec.iid_count);
    LabeledDataset& ds = out[k];
    ds.dim = spec.feature_dim;
    ds.labels.resize(spec.sizes[k]);
    ds.features.resize(spec.sizes[k] * spec.feature_dim);
    for (std::size_t s = 0; s < spec.sizes[k]; ++s) {
      const int z = iid ? static_cast<int>(rng.uniform_index(spec.class_count))
                        : subset[rng.uniform_index(subset.size())];
      ds.labels[s] = z;
      double* row = ds.features.data() + s * spec.feature_dim;
      for (int i = 0; i < spec.feature_dim; ++i)
        row[i] = centers[z][i] + spec.feature_noise * rng.gaussian();
    }
  }
  return out;
}

LabelPmf label_pmf(const LabeledDataset& data, int class_count) {
  if (data.size() == 0) throw std::domain_error("label_pmf of empty dataset");
  LabelPmf pmf;
  pmf.mass.assign(class_count, 0.0);
  for (int z : data.labels) {
    if (z < 0 || z >= class_count)
      throw std::domain_error("label out of range: " + std::to_string(z));
    pmf.mass[z] += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  for (double& m : pmf.mass) m *= inv;
  return pmf;
}

LabelPmf global_pmf(std::span<const LabeledDataset> datasets, int class_count) {
  LabelPmf pmf;
  pmf.mass.assign(class_count, 0.0);
  std::size_t total = 0;
  for (const auto& ds : datasets) {
    total += ds.size();
    for (int z : ds.labels) {
      if (z < 0 || z >= class_count)
        throw std::domain_error("label out of range: " + std::to_string(z));
      pmf.mass[z] += 1.0;
    }
  }
  if (total == 0) throw std::domain_error("global_pmf of empty datasets");
  const double inv = 1.0 / static_cast<double>(total);
  for (double& m : pmf.mass) m *= inv;
  return pmf;
}

}  // namespace fedsim::datagen
