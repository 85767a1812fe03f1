#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dtfl/tensor.hpp"

namespace dtfl {

struct Dataset {
  Tensor features;  // N x d
  std::vector<int> labels;
  int classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  /// Throws InputError if labels and rows disagree or a label is out of range.
  void validate() const;
};

/// Gaussian class clusters: class c has mean separation * u_c, where u_c is a
/// random unit direction, and identity covariance. Labels cycle 0..C-1 so every
/// class appears when N >= C.
Dataset synth_blobs(int classes, std::size_t dim, std::size_t samples, double separation, std::uint64_t seed);

/// Reads a CSV with a header row. Every column except `label_column` is a
/// numeric feature. Throws ParseError (with line number) on malformed rows,
/// InputError if the label column is missing and IoError if unreadable.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Writes features as f0..f{d-1} plus the label column, with round-trip precision.
void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& label_column);

/// Per-dimension mean and standard deviation.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Tensor& features);
  void apply(Tensor& features) const;
};

/// Client -> sample indices; disjoint and covering.
struct Partition {
  std::vector<std::vector<std::size_t>> clients;

  std::size_t client_count() const noexcept { return clients.size(); }
  std::vector<std::size_t> sizes() const;
  std::size_t total() const;
};

/// Random permutation cut into `clients` parts whose sizes differ by at most 1.
Partition partition_iid(std::size_t samples, std::size_t clients, std::uint64_t seed);

/// Label-skewed split: for every class, proportions ~ Dir(beta * 1_K) deal that
/// class's samples out to clients. An empty client then receives one random
/// sample taken from the current largest client.
Partition partition_dirichlet(std::span<const int> labels, int classes, std::size_t clients, double beta,
                              std::uint64_t seed);

/// counts[k][c] = number of class-c samples held by client k.
std::vector<std::vector<std::size_t>> label_histograms(const Partition& p, std::span<const int> labels, int classes);

}  // namespace dtfl
