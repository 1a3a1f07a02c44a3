#include "trea/nn/params.hpp"

#include "trea/error.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace trea::nn {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'E', 'A', 'P', 'R', 'M', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("checkpoint truncated");
  return v;
}

}  // namespace

ad::Matrix Initializer::uniform(Eigen::Index rows, Eigen::Index cols, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  ad::Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng_);
  }
  return m;
}

ad::Matrix Initializer::xavier(Eigen::Index rows, Eigen::Index cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform(rows, cols, limit);
}

void ParamSet::add(std::string name, ad::Tensor tensor) {
  entries_.push_back({std::move(name), std::move(tensor)});
}

void ParamSet::append(const ParamSet& other) {
  for (const auto& e : other.entries_) entries_.push_back(e);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.tensor.value().size());
  return n;
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

double ParamSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) {
    if (e.tensor.grad().size() != 0) sq += e.tensor.grad().squaredNorm();
  }
  return std::sqrt(sq);
}

void ParamSet::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(out, entries_.size());
  for (const auto& e : entries_) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<std::int64_t>(out, e.tensor.rows());
    write_pod<std::int64_t>(out, e.tensor.cols());
    out.write(reinterpret_cast<const char*>(e.tensor.value().data()),
              static_cast<std::streamsize>(sizeof(double) * e.tensor.value().size()));
  }
}

void ParamSet::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ValidationError("checkpoint: bad magic");
  }
  const auto count = read_pod<std::uint64_t>(in);
  if (count != entries_.size()) {
    throw ValidationError("checkpoint: expected " + std::to_string(entries_.size()) +
                          " tensors, found " + std::to_string(count));
  }
  for (auto& e : entries_) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = read_pod<std::int64_t>(in);
    const auto cols = read_pod<std::int64_t>(in);
    if (name != e.name || rows != e.tensor.rows() || cols != e.tensor.cols()) {
      throw ValidationError("checkpoint: tensor '" + name + "' does not match '" + e.name + "'");
    }
    in.read(reinterpret_cast<char*>(e.tensor.mutable_value().data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw ValidationError("checkpoint truncated in '" + name + "'");
  }
}

std::vector<ad::Matrix> ParamSet::snapshot() const {
  std::vector<ad::Matrix> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.tensor.value());
  return out;
}

void ParamSet::restore(const std::vector<ad::Matrix>& values) {
  if (values.size() != entries_.size()) throw ContractError("restore: snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto t = entries_[i].tensor;
    t.mutable_value() = values[i];
  }
}

}  // namespace trea::nn
