#include "dtfl/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dtfl/errors.hpp"
#include "dtfl/rng.hpp"

namespace dtfl {

void Dataset::validate() const {
  if (features.rows() != labels.size()) throw InputError("dataset: feature rows != label count");
  for (int y : labels)
    if (y < 0 || y >= classes) throw InputError("dataset: label " + std::to_string(y) + " out of range");
}

Dataset synth_blobs(int classes, std::size_t dim, std::size_t samples, double separation, std::uint64_t seed) {
  if (classes < 2) throw InputError("synth_blobs: need at least 2 classes");
  if (dim < 1) throw InputError("synth_blobs: need at least 1 dimension");
  Rng rng = make_rng(seed, {0xb10b});
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> means(static_cast<std::size_t>(classes), std::vector<double>(dim));
  for (auto& mu : means) {
    double norm = 0.0;
    for (double& v : mu) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : mu) v = separation * v / norm;
  }

  Dataset ds;
  ds.classes = classes;
  ds.features = Tensor::matrix(samples, dim);
  ds.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const int y = static_cast<int>(i % static_cast<std::size_t>(classes));
    ds.labels[i] = y;
    for (std::size_t k = 0; k < dim; ++k) ds.features(i, k) = means[static_cast<std::size_t>(y)][k] + normal(rng);
  }
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_double(const std::string& field, std::size_t line) {
  const std::string t = trim(field);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end) throw ParseError("not a number: '" + t + "'", line);
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty file, expected a header row", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw InputError("label column '" + label_column + "' not in CSV header");
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t dim = header.size() - 1;

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == label_idx) {
        const double v = parse_double(fields[c], line_no);
        if (v != std::floor(v) || v < 0) throw ParseError("label must be a non-negative integer", line_no);
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(parse_double(fields[c], line_no));
      }
    }
  }

  Dataset ds;
  ds.features = Tensor({labels.size(), dim}, std::move(values));
  ds.classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  ds.labels = std::move(labels);
  return ds;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& label_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t k = 0; k < data.dim(); ++k) out << 'f' << k << ',';
  out << label_column << '\n';
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < data.dim(); ++k) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data.features(i, k));
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << data.labels[i] << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Standardizer Standardizer::fit(const Tensor& features) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (n == 0) return s;
  for (std::size_t k = 0; k < d; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += features(i, k);
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (features(i, k) - mean) * (features(i, k) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    s.mean[k] = mean;
    s.scale[k] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(Tensor& features) const {
  if (features.cols() != mean.size()) throw DimensionError("standardizer width mismatch");
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t k = 0; k < mean.size(); ++k) features(i, k) = (features(i, k) - mean[k]) / scale[k];
}

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> out;
  for (const auto& c : clients) out.push_back(c.size());
  return out;
}

std::size_t Partition::total() const {
  std::size_t n = 0;
  for (const auto& c : clients) n += c.size();
  return n;
}

Partition partition_iid(std::size_t samples, std::size_t clients, std::uint64_t seed) {
  if (clients == 0) throw InputError("partition_iid: need at least one client");
  if (clients > samples) throw InputError("partition_iid: more clients than samples");
  std::vector<std::size_t> perm(samples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, {0x11d});
  std::shuffle(perm.begin(), perm.end(), rng);

  Partition p;
  p.clients.resize(clients);
  const std::size_t base = samples / clients;
  const std::size_t extra = samples % clients;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const std::size_t take = base + (k < extra ? 1 : 0);
    p.clients[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                        perm.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
  }
  return p;
}

Partition partition_dirichlet(std::span<const int> labels, int classes, std::size_t clients, double beta,
                              std::uint64_t seed) {
  if (!(beta > 0.0)) throw InputError("partition_dirichlet: beta must be positive");
  if (clients == 0) throw InputError("partition_dirichlet: need at least one client");
  if (classes < 1) throw InputError("partition_dirichlet: need at least one class");
  Rng rng = make_rng(seed, {0xd1c});
  std::gamma_distribution<double> gamma(beta, 1.0);

  Partition p;
  p.clients.resize(clients);
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);

    std::vector<double> props(clients);
    double total = 0.0;
    for (double& v : props) {
      v = gamma(rng);
      total += v;
    }
    if (!(total > 0.0)) {
      // All draws underflowed (tiny beta): the mass goes to one random client.
      std::fill(props.begin(), props.end(), 0.0);
      props[std::uniform_int_distribution<std::size_t>(0, clients - 1)(rng)] = 1.0;
      total = 1.0;
    }

    const std::size_t n = members.size();
    double cumulative = 0.0;
    std::size_t start = 0;
    for (std::size_t k = 0; k < clients; ++k) {
      cumulative += props[k] / total;
      const std::size_t end =
          k + 1 == clients ? n : std::min(n, static_cast<std::size_t>(std::floor(cumulative * static_cast<double>(n))));
      for (std::size_t j = start; j < std::max(start, end); ++j) p.clients[k].push_back(members[j]);
      start = std::max(start, end);
    }
  }

  for (std::size_t k = 0; k < clients; ++k) {
    if (!p.clients[k].empty()) continue;
    auto largest = std::max_element(p.clients.begin(), p.clients.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    if (largest->size() < 2) throw InputError("partition_dirichlet: not enough samples to give every client one");
    std::uniform_int_distribution<std::size_t> pick(0, largest->size() - 1);
    const std::size_t j = pick(rng);
    p.clients[k].push_back((*largest)[j]);
    largest->erase(largest->begin() + static_cast<std::ptrdiff_t>(j));
  }
  for (auto& c : p.clients) std::sort(c.begin(), c.end());
  return p;
}

std::vector<std::vector<std::size_t>> label_histograms(const Partition& p, std::span<const int> labels, int classes) {
  std::vector<std::vector<std::size_t>> out(p.client_count(), std::vector<std::size_t>(static_cast<std::size_t>(classes)));
  for (std::size_t k = 0; k < p.client_count(); ++k)
    for (std::size_t i : p.clients[k]) ++out[k][static_cast<std::size_t>(labels[i])];
  return out;
}

}  // namespace dtfl
