#include "trea/encoders/graph_encoders.hpp"

#include "trea/error.hpp"
#include "trea/kg/text.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace trea::encoders {

namespace {

ad::Tensor activate(const ad::Tensor& x, Activation act) {
  return act == Activation::sigmoid ? ad::sigmoid(x) : ad::relu(x);
}

}  // namespace

RgcnParams RgcnParams::make(const kg::KnowledgeGraph& kg, Eigen::Index dim, int layers, nn::Initializer& init) {
  if (dim <= 0 || layers <= 0) throw ConfigError("rgcn: dim and layer count must be positive");
  RgcnParams p;
  p.base_embeddings = ad::Tensor::parameter(init.uniform(static_cast<Eigen::Index>(kg.entity_count()), dim, 0.1));
  for (int l = 0; l < layers; ++l) {
    std::vector<ad::Tensor> per_relation;
    for (std::size_t r = 0; r < kg.directed_relation_count(); ++r) {
      per_relation.push_back(ad::Tensor::parameter(init.xavier(dim, dim)));
    }
    p.relation_weights.push_back(std::move(per_relation));
    p.self_weights.push_back(ad::Tensor::parameter(init.xavier(dim, dim)));
  }
  return p;
}

void RgcnParams::register_into(nn::ParamSet& params, const std::string& prefix) const {
  params.add(prefix + ".base", base_embeddings);
  for (int l = 0; l < layer_count(); ++l) {
    const std::string layer = prefix + ".layer" + std::to_string(l);
    for (std::size_t r = 0; r < relation_weights[l].size(); ++r) {
      params.add(layer + ".relation" + std::to_string(r), relation_weights[l][r]);
    }
    params.add(layer + ".self", self_weights[l]);
  }
}

RelationalAdjacency RelationalAdjacency::build(const kg::KnowledgeGraph& kg) {
  RelationalAdjacency adj;
  adj.entity_count = kg.entity_count();
  const auto n = static_cast<Eigen::Index>(kg.entity_count());
  for (std::size_t r = 0; r < kg.directed_relation_count(); ++r) {
    const kg::RelationId rel{static_cast<std::uint32_t>(r)};
    std::vector<Eigen::Triplet<double>> entries;
    for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
      const kg::EntityId ent{e};
      const auto nbrs = kg.neighbors(ent, rel);
      if (nbrs.empty()) continue;
      const double weight = 1.0 / kg.norm_constant(ent, rel);
      for (const auto& nb : nbrs) entries.emplace_back(e, nb.index, weight);
    }
    ad::SparseMatrix m(n, n);
    m.setFromTriplets(entries.begin(), entries.end());
    adj.per_relation.push_back(std::move(m));
  }
  return adj;
}

ad::Tensor rgcn_forward(const RelationalAdjacency& adjacency, const RgcnParams& params) {
  if (params.base_embeddings.rows() != static_cast<Eigen::Index>(adjacency.entity_count)) {
    throw ConfigError("rgcn: embedding rows " + std::to_string(params.base_embeddings.rows()) +
                      " != entity count " + std::to_string(adjacency.entity_count));
  }
  const Eigen::Index d = params.dim();
  ad::Tensor h = params.base_embeddings;
  for (int l = 0; l < params.layer_count(); ++l) {
    const auto& rel = params.relation_weights[l];
    if (rel.size() != adjacency.per_relation.size()) {
      throw ConfigError("rgcn: layer " + std::to_string(l) + " has " + std::to_string(rel.size()) +
                        " relation matrices, graph has " + std::to_string(adjacency.per_relation.size()));
    }
    const auto& self = params.self_weights[l];
    if (self.rows() != d || self.cols() != d) throw ConfigError("rgcn: self matrix must be d x d");
    ad::Tensor pre = ad::matmul_nt(h, self);
    for (std::size_t r = 0; r < rel.size(); ++r) {
      if (rel[r].rows() != d || rel[r].cols() != d) throw ConfigError("rgcn: relation matrix must be d x d");
      if (adjacency.per_relation[r].nonZeros() == 0) continue;
      pre = ad::add(pre, ad::matmul_nt(ad::spmm(adjacency.per_relation[r], h), rel[r]));
    }
    h = activate(pre, params.activation);
  }
  return h;
}

ad::Tensor rgcn_forward(const kg::KnowledgeGraph& kg, const RgcnParams& params) {
  return rgcn_forward(RelationalAdjacency::build(kg), params);
}

GcnParams GcnParams::make(const kg::WordGraph& wg, Eigen::Index dim, int layers, nn::Initializer& init) {
  if (dim <= 0 || layers <= 0) throw ConfigError("gcn: dim and layer count must be positive");
  GcnParams p;
  p.base_embeddings = ad::Tensor::parameter(init.uniform(static_cast<Eigen::Index>(wg.size()), dim, 0.1));
  for (int l = 0; l < layers; ++l) p.weights.push_back(ad::Tensor::parameter(init.xavier(dim, dim)));
  return p;
}

void GcnParams::register_into(nn::ParamSet& params, const std::string& prefix) const {
  params.add(prefix + ".base", base_embeddings);
  for (int l = 0; l < layer_count(); ++l) params.add(prefix + ".layer" + std::to_string(l), weights[l]);
}

ad::SparseMatrix normalized_adjacency(const kg::WordGraph& wg) {
  const auto n = static_cast<Eigen::Index>(wg.size());
  std::vector<double> degree(wg.size(), 1.0);
  for (const auto& [a, b] : wg.edges()) {
    degree[a.index] += 1.0;
    degree[b.index] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> entries;
  for (Eigen::Index i = 0; i < n; ++i) entries.emplace_back(i, i, 1.0 / degree[i]);
  for (const auto& [a, b] : wg.edges()) {
    const double w = 1.0 / std::sqrt(degree[a.index] * degree[b.index]);
    entries.emplace_back(a.index, b.index, w);
    entries.emplace_back(b.index, a.index, w);
  }
  ad::SparseMatrix m(n, n);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

ad::Tensor gcn_forward(const ad::SparseMatrix& normalized, const GcnParams& params) {
  if (normalized.rows() != params.base_embeddings.rows()) {
    throw ConfigError("gcn: embedding rows " + std::to_string(params.base_embeddings.rows()) +
                      " != vocabulary size " + std::to_string(normalized.rows()));
  }
  ad::Tensor h = params.base_embeddings;
  for (const auto& w : params.weights) {
    if (w.rows() != h.cols() || w.cols() != h.cols()) throw ConfigError("gcn: layer matrix must be d x d");
    h = ad::relu(ad::matmul_nt(ad::spmm(normalized, h), w));
  }
  return h;
}

ad::Tensor gcn_forward(const kg::WordGraph& wg, const GcnParams& params) {
  return gcn_forward(normalized_adjacency(wg), params);
}

std::size_t load_pretrained_word_vectors(const std::filesystem::path& path, const kg::WordGraph& wg,
                                         GcnParams& params) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  const Eigen::Index d = params.base_embeddings.cols();
  std::string line;
  std::size_t line_no = 0;
  std::size_t filled = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) throw ParseError(path.string(), line_no, "non-numeric vector component");
    if (static_cast<Eigen::Index>(values.size()) != d) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(d) + " components, got " + std::to_string(values.size()));
    }
    const auto id = wg.find(kg::normalize(token));
    if (!id) continue;
    for (Eigen::Index j = 0; j < d; ++j) params.base_embeddings.mutable_value()(id->index, j) = values[j];
    ++filled;
  }
  return filled;
}

EmbeddingTable EmbeddingTable::from(const ad::Tensor& t) {
  if (!t.value().allFinite()) throw ValidationError("embedding table contains non-finite values");
  return {t.value()};
}

}  // namespace trea::encoders
