#pragma once

#include "trea/ad/tensor.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/word_graph.hpp"
#include "trea/nn/params.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace trea::encoders {

enum class Activation { sigmoid, relu };

/// Relation-aware graph convolution parameters: base entity embeddings plus,
/// per layer, one d x d matrix per directed relation and a self matrix.
struct RgcnParams {
  ad::Tensor base_embeddings;
  std::vector<std::vector<ad::Tensor>> relation_weights;  // [layer][relation]
  std::vector<ad::Tensor> self_weights;                   // [layer]
  Activation activation = Activation::sigmoid;

  static RgcnParams make(const kg::KnowledgeGraph& kg, Eigen::Index dim, int layers, nn::Initializer& init);
  int layer_count() const { return static_cast<int>(self_weights.size()); }
  Eigen::Index dim() const { return base_embeddings.cols(); }
  void register_into(nn::ParamSet& params, const std::string& prefix) const;
};

/// One sparse matrix per directed relation with entry (e, e') = 1 / Z_{e,r}
/// for every e' in N_e^r.
struct RelationalAdjacency {
  std::size_t entity_count = 0;
  std::vector<ad::SparseMatrix> per_relation;

  static RelationalAdjacency build(const kg::KnowledgeGraph& kg);
};

/// n_e <- act( sum_r sum_{e' in N_e^r} W_r n_e' / Z_{e,r} + W n_e ), per layer.
ad::Tensor rgcn_forward(const RelationalAdjacency& adjacency, const RgcnParams& params);
ad::Tensor rgcn_forward(const kg::KnowledgeGraph& kg, const RgcnParams& params);

struct GcnParams {
  ad::Tensor base_embeddings;
  std::vector<ad::Tensor> weights;  // [layer], d x d

  static GcnParams make(const kg::WordGraph& wg, Eigen::Index dim, int layers, nn::Initializer& init);
  int layer_count() const { return static_cast<int>(weights.size()); }
  void register_into(nn::ParamSet& params, const std::string& prefix) const;
};

/// D^-1/2 (A + I) D^-1/2 over the undirected word graph.
ad::SparseMatrix normalized_adjacency(const kg::WordGraph& wg);

/// H <- relu( A_hat H W^T ), per layer.
ad::Tensor gcn_forward(const ad::SparseMatrix& normalized, const GcnParams& params);
ad::Tensor gcn_forward(const kg::WordGraph& wg, const GcnParams& params);

/// Overwrites base word embeddings from a `token v1 ... vd` text file.
/// Returns the number of vocabulary rows that were filled.
std::size_t load_pretrained_word_vectors(const std::filesystem::path& path, const kg::WordGraph& wg,
                                         GcnParams& params);

/// Detached, validated output table.
struct EmbeddingTable {
  ad::Matrix rows;

  /// Throws ValidationError if any value is not finite.
  static EmbeddingTable from(const ad::Tensor& t);
  Eigen::Index count() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

}  // namespace trea::encoders
